"""Matrix-polytope calculus.

A matrix polytope is the convex hull of ``n_v`` equally shaped vertex
matrices, evaluated at a weight vector on the unit simplex::

    M(w) = sum_i w_i M_i = rowstack(M) @ gamma(w, n) = gamma_prime(w, m) @ colstack(M)

Products and sums of matrix polytopes whose weights come from two
(possibly different) simplex points ``beta`` and ``theta`` are stored as
an ``n_v x n_v`` grid of blocks, ``S(beta, theta) = gamma_prime(beta) @ S @ gamma(theta)``.
Row blocks are indexed by ``beta``, column blocks by ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension

SIMPLEX_TOL = 1e-12
NORMALIZE_TOL = 1e-9


class Simplex:
    """A point of the unit simplex (nonnegative weights summing to one).

    Inputs whose sum is off by at most ``1e-9`` are renormalized, which
    lets weights survive a JSON round trip. Larger deviations and negative
    entries are rejected.
    """

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.array(weights, dtype=float).ravel()
        if w.size == 0:
            raise InvalidDimension("simplex weights must be non-empty")
        if not np.all(np.isfinite(w)):
            raise ValueError("simplex weights must be finite")
        if np.any(w < -SIMPLEX_TOL):
            raise ValueError(f"simplex weights must be nonnegative, got {w}")
        w = np.clip(w, 0.0, None)
        s = w.sum()
        if abs(s - 1.0) > NORMALIZE_TOL:
            raise ValueError(f"simplex weights sum to {s!r}, expected 1")
        w = w / s
        w.setflags(write=False)
        self.weights = w

    @classmethod
    def vertex(cls, i, n_v):
        w = np.zeros(n_v)
        w[i] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, n_v):
        return cls(np.full(n_v, 1.0 / n_v))

    @classmethod
    def random(cls, n_v, rng):
        """Uniformly distributed point of the simplex."""
        return cls(rng.dirichlet(np.ones(n_v)))

    def __len__(self):
        return self.weights.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __repr__(self):
        return f"Simplex({self.weights.tolist()})"


def as_weights(w, n_v=None):
    """Return the weight vector of ``w`` (a Simplex or array-like)."""
    if not isinstance(w, Simplex):
        w = Simplex(w)
    if n_v is not None and len(w) != n_v:
        raise InvalidDimension(f"expected {n_v} simplex weights, got {len(w)}")
    return w.weights


class MatrixPolytope:
    """Ordered list of equally shaped vertex matrices."""

    __slots__ = ("vertices",)

    def __init__(self, vertices):
        mats = [np.atleast_2d(np.array(v, dtype=float)) for v in vertices]
        if not mats:
            raise InvalidDimension("a matrix polytope needs at least one vertex")
        shape = mats[0].shape
        for k, m in enumerate(mats):
            if m.ndim != 2 or m.shape != shape:
                raise InvalidDimension(
                    f"vertex {k} has shape {m.shape}, expected {shape}"
                )
        arr = np.stack(mats)
        arr.setflags(write=False)
        self.vertices = arr

    @classmethod
    def constant(cls, matrix, n_v):
        """Lift a constant matrix to ``n_v`` identical vertices."""
        return cls([matrix] * n_v)

    @property
    def n_v(self):
        return self.vertices.shape[0]

    @property
    def shape(self):
        return self.vertices.shape[1:]

    def __getitem__(self, i):
        return self.vertices[i]

    def __len__(self):
        return self.n_v

    def row_stack(self):
        """``[M_1 ... M_nv]``, shape ``m x n_v*n``."""
        return np.hstack(list(self.vertices))

    def col_stack(self):
        """``[M_1; ...; M_nv]``, shape ``n_v*m x n``."""
        return np.vstack(list(self.vertices))

    def map(self, fn):
        """Apply ``fn`` to every vertex and wrap the results."""
        return MatrixPolytope([fn(v) for v in self.vertices])

    def __repr__(self):
        return f"MatrixPolytope(n_v={self.n_v}, shape={self.shape})"


def evaluate(poly, w):
    """Evaluate ``sum_i w_i M_i``."""
    weights = as_weights(w, poly.n_v)
    return np.tensordot(weights, poly.vertices, axes=1)


def gamma(w, n):
    """Column selector ``[w_1 I_n; ...; w_nv I_n]`` (shape ``n_v*n x n``)."""
    weights = as_weights(w)
    return np.kron(weights[:, None], np.eye(n))


def gamma_prime(w, m):
    """Row selector ``[w_1 I_m ... w_nv I_m]`` (shape ``m x n_v*m``)."""
    weights = as_weights(w)
    return np.kron(weights[None, :], np.eye(m))


@dataclass(frozen=True)
class BlockGrid:
    """``n_v x n_v`` grid of equally shaped blocks.

    ``blocks[r, c]`` is the block in block-row ``r`` and block-column ``c``.
    Evaluating at ``(beta, theta)`` gives ``sum_r sum_c beta_r theta_c blocks[r, c]``.
    """

    blocks: np.ndarray  # shape (n_v, n_v, m, p)

    def __post_init__(self):
        b = np.array(self.blocks, dtype=float)
        if b.ndim != 4 or b.shape[0] != b.shape[1]:
            raise InvalidDimension(f"block grid must be (n_v, n_v, m, p), got {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def n_v(self):
        return self.blocks.shape[0]

    @property
    def block_shape(self):
        return self.blocks.shape[2:]

    def flatten(self):
        n_v, _, m, p = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(n_v * m, n_v * p)

    @classmethod
    def from_flat(cls, flat, n_v):
        flat = np.asarray(flat, dtype=float)
        rows, cols = flat.shape
        if rows % n_v or cols % n_v:
            raise InvalidDimension("flat matrix is not divisible into n_v blocks")
        m, p = rows // n_v, cols // n_v
        return cls(flat.reshape(n_v, m, n_v, p).transpose(0, 2, 1, 3))

    def evaluate(self, beta, theta):
        """``gamma_prime(beta) @ flatten() @ gamma(theta)`` via weighted sums."""
        wb = as_weights(beta, self.n_v)
        wt = as_weights(theta, self.n_v)
        return np.einsum("r,c,rcij->ij", wb, wt, self.blocks)


def composed_product(M, N):
    """Grid with ``blocks[i, j] = M_i @ N_j``."""
    if M.n_v != N.n_v:
        raise InvalidDimension(f"vertex counts differ: {M.n_v} vs {N.n_v}")
    if M.shape[1] != N.shape[0]:
        raise InvalidDimension(f"cannot multiply {M.shape} by {N.shape} vertices")
    return BlockGrid(np.einsum("iab,jbc->ijac", M.vertices, N.vertices))


def composed_sum(F, M, N):
    """Grid with ``blocks[i, j] = F_j + M_i @ N_j``.

    This is ``F(theta) + M(beta) N(theta)`` with ``beta`` on block rows.
    """
    prod = composed_product(M, N)
    if F.n_v != M.n_v:
        raise InvalidDimension(f"vertex counts differ: {F.n_v} vs {M.n_v}")
    if F.shape != prod.block_shape:
        raise InvalidDimension(
            f"F vertices are {F.shape}, products are {prod.block_shape}"
        )
    return BlockGrid(prod.blocks + F.vertices[None, :, :, :])


def diag_lift(M, n_v):
    """Block-diagonal matrix holding ``n_v`` copies of ``M``."""
    if n_v < 1:
        raise InvalidDimension("n_v must be >= 1")
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return np.kron(np.eye(n_v), M)
