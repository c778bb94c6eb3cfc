"""Gain schedules, closed-loop block grids and the runtime control law.

The control increment is::

    du = K(alpha) y + Kbar(alpha) u + Khat(alpha+) y+

Closed-loop matrices depend bilinearly on ``(alpha+, alpha)`` and are stored
as block grids whose block-row index runs over the ``Khat`` vertex (``alpha+``)
and whose block-column index runs over the plant vertex (``alpha``)::

    Acl(alpha+, alpha) = gamma_prime(alpha+) @ Acl.flatten() @ gamma(alpha)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension
from .plant import AugmentedSystem, LpvProblem
from .polytope_algebra import (
    BlockGrid,
    MatrixPolytope,
    as_weights,
    composed_sum,
)


@dataclass(frozen=True)
class GainSchedule:
    """Vertex gains ``K_i`` (n_u x n_y), ``Kbar_i`` (n_u x n_u), ``Khat_j`` (n_u x n_y)."""

    K: np.ndarray
    Kbar: np.ndarray
    Khat: np.ndarray

    def __post_init__(self):
        for name in ("K", "Kbar", "Khat"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim == 2:
                arr = arr[None]
            if arr.ndim != 3:
                raise InvalidDimension(f"{name} must be a list of matrices")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n_v = self.K.shape[0]
        if self.Kbar.shape[0] != n_v or self.Khat.shape[0] != n_v:
            raise InvalidDimension("K, Kbar and Khat need the same number of vertices")
        n_u, n_y = self.K.shape[1:]
        if self.Kbar.shape[1:] != (n_u, n_u) or self.Khat.shape[1:] != (n_u, n_y):
            raise InvalidDimension(
                f"inconsistent gain shapes K{self.K.shape[1:]}, "
                f"Kbar{self.Kbar.shape[1:]}, Khat{self.Khat.shape[1:]}"
            )

    @classmethod
    def zeros(cls, n_v, n_u, n_y):
        return cls(np.zeros((n_v, n_u, n_y)), np.zeros((n_v, n_u, n_u)),
                   np.zeros((n_v, n_u, n_y)))

    @property
    def n_v(self):
        return self.K.shape[0]

    def at(self, alpha, alpha_plus):
        """``(K(alpha), Kbar(alpha), Khat(alpha+))``."""
        a = as_weights(alpha, self.n_v)
        ap = as_weights(alpha_plus, self.n_v)
        return (np.tensordot(a, self.K, 1), np.tensordot(a, self.Kbar, 1),
                np.tensordot(ap, self.Khat, 1))

    def scaled(self, factor):
        return GainSchedule(self.K * factor, self.Kbar * factor, self.Khat * factor)

    def check_against(self, problem):
        if self.n_v != problem.n_v:
            raise InvalidDimension(f"gains have {self.n_v} vertices, plant has {problem.n_v}")
        if self.K.shape[1:] != (problem.n_u, problem.n_y):
            raise InvalidDimension(
                f"K vertices are {self.K.shape[1:]}, expected {(problem.n_u, problem.n_y)}"
            )


@dataclass(frozen=True)
class ClosedLoopGrids:
    """Block grids of the closed loop (``Acl``, ``Bcl``) and of the increment (``Adu``, ``Bdu``)."""

    Acl: BlockGrid
    Bcl: BlockGrid
    Adu: BlockGrid
    Bdu: BlockGrid
    n_x: int
    n_u: int

    @property
    def n_v(self):
        return self.Acl.n_v


def build_grids(system, gains):
    """Assemble the four closed-loop block grids.

    ``system`` may be an :class:`AugmentedSystem` or an :class:`LpvProblem`.
    Each grid is a composed sum ``F(alpha) + M(alpha+) N(alpha)`` with
    ``M`` carrying ``Khat`` and ``F``, ``N`` carrying the plant and the
    ``K``, ``Kbar`` gains.
    """
    if isinstance(system, AugmentedSystem):
        prob = system.problem
    elif isinstance(system, LpvProblem):
        prob = system
    else:
        raise TypeError("build_grids needs an AugmentedSystem or LpvProblem")
    gains.check_against(prob)
    C, D = prob.C, prob.Deta
    n_x, n_u, n_p, n_eta = prob.n_x, prob.n_u, prob.n_p, prob.n_eta
    A, B, Bp = prob.A.vertices, prob.B.vertices, prob.Bp.vertices
    K, Kb, Kh = gains.K, gains.Kbar, gains.Khat
    n_v = prob.n_v
    I_u = np.eye(n_u)

    F1 = MatrixPolytope([np.block([[A[i], B[i]], [K[i] @ C, I_u + Kb[i]]]) for i in range(n_v)])
    M1 = MatrixPolytope([np.vstack([np.zeros((n_x, prob.n_y)), Kh[j]]) for j in range(n_v)])
    N1 = MatrixPolytope([np.hstack([C @ A[i], C @ B[i]]) for i in range(n_v)])

    F2 = MatrixPolytope([
        np.block([
            [Bp[i], np.zeros((n_x, n_eta)), np.zeros((n_x, n_eta))],
            [np.zeros((n_u, n_p)), K[i] @ D, np.zeros((n_u, n_eta))],
        ])
        for i in range(n_v)
    ])
    N2 = MatrixPolytope([
        np.hstack([C @ Bp[i], np.zeros((prob.n_y, n_eta)), D]) for i in range(n_v)
    ])

    F3 = MatrixPolytope([np.hstack([K[i] @ C, Kb[i]]) for i in range(n_v)])
    M3 = MatrixPolytope(list(Kh))
    F4 = MatrixPolytope([
        np.hstack([np.zeros((n_u, n_p)), K[i] @ D, np.zeros((n_u, n_eta))]) for i in range(n_v)
    ])

    return ClosedLoopGrids(
        Acl=composed_sum(F1, M1, N1),
        Bcl=composed_sum(F2, M1, N2),
        Adu=composed_sum(F3, M3, N1),
        Bdu=composed_sum(F4, M3, N2),
        n_x=n_x,
        n_u=n_u,
    )


def closed_loop_matrices(problem, gains, alpha, alpha_plus):
    """Direct evaluation of ``(Acl, Bcl, Adu, Bdu)`` at ``(alpha+, alpha)``.

    Uses the interpolated plant and gains, independently of the block grids.
    """
    a = as_weights(alpha, problem.n_v)
    A = np.tensordot(a, problem.A.vertices, 1)
    B = np.tensordot(a, problem.B.vertices, 1)
    Bp = np.tensordot(a, problem.Bp.vertices, 1)
    K, Kb, Kh = gains.at(alpha, alpha_plus)
    C, D = problem.C, problem.Deta
    n_u, n_eta = problem.n_u, problem.n_eta
    Adu = np.hstack([K @ C + Kh @ C @ A, Kb + Kh @ C @ B])
    Bdu = np.hstack([Kh @ C @ Bp, K @ D, Kh @ D])
    Acl = np.vstack([np.hstack([A, B]), Adu + np.hstack([np.zeros((n_u, problem.n_x)), np.eye(n_u)])])
    Bcl = np.vstack([np.hstack([Bp, np.zeros((problem.n_x, 2 * n_eta))]), Bdu])
    return Acl, Bcl, Adu, Bdu


def step_closed_loop(grids, xi, d, alpha, alpha_plus):
    """One closed-loop step.

    ``d`` is ``(p, eta, eta+)``. Returns ``(xi_next, du)`` with
    ``xi_next[n_x:] == xi[n_x:] + du``.
    """
    xi = np.asarray(xi, dtype=float)
    d = np.asarray(d, dtype=float)
    n_xi = grids.Acl.block_shape[1]
    n_d = grids.Bcl.block_shape[1]
    if xi.shape != (n_xi,) or d.shape != (n_d,):
        raise InvalidDimension(f"expected xi ({n_xi},) and d ({n_d},), got {xi.shape}, {d.shape}")
    Acl = grids.Acl.evaluate(alpha_plus, alpha)
    Bcl = grids.Bcl.evaluate(alpha_plus, alpha)
    Adu = grids.Adu.evaluate(alpha_plus, alpha)
    Bdu = grids.Bdu.evaluate(alpha_plus, alpha)
    return Acl @ xi + Bcl @ d, Adu @ xi + Bdu @ d


def control_law_step(gains, u_prev, y_prev, y_now, alpha_prev, alpha_now):
    """Deployable input ``u_k = (I + Kbar) u_{k-1} + K y_{k-1} + Khat y_k``.

    ``K`` and ``Kbar`` are evaluated at ``alpha_{k-1}``, ``Khat`` at ``alpha_k``.
    At ``k = 0`` pass zeros for ``u_prev`` and ``y_prev``: the measured
    ``y_0`` then passes to ``u_0`` through ``Khat``.
    """
    K, Kb, Kh = gains.at(alpha_prev, alpha_now)
    u_prev = np.atleast_1d(np.asarray(u_prev, dtype=float))
    y_prev = np.atleast_1d(np.asarray(y_prev, dtype=float))
    y_now = np.atleast_1d(np.asarray(y_now, dtype=float))
    if u_prev.shape != (K.shape[0],) or y_prev.shape != (K.shape[1],) or y_now.shape != (K.shape[1],):
        raise InvalidDimension("input/output vectors do not match the gain shapes")
    return u_prev + Kb @ u_prev + K @ y_prev + Kh @ y_now

