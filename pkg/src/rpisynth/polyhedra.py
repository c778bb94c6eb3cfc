"""H-representation polyhedra, containment certificates and low-dimensional geometry."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import lp as lpmod
from .errors import (
    InvalidDimension,
    SolverError,
    UnboundedSet,
    UnsupportedDimension,
)

ROW_NORM_TOL = 1e-12
DEDUP_TOL = 1e-9
MAX_GEOMETRY_DIM = 4


class HPolyhedron:
    """The set ``{x : P x <= phi}`` with ``phi > 0`` (origin in the interior)."""

    __slots__ = ("P", "phi")

    def __init__(self, P, phi=None):
        P = np.atleast_2d(np.array(P, dtype=float))
        if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
            raise InvalidDimension(f"P must be a non-empty matrix, got shape {P.shape}")
        phi = np.ones(P.shape[0]) if phi is None else np.array(phi, dtype=float).ravel()
        if phi.size != P.shape[0]:
            raise InvalidDimension(f"phi has {phi.size} entries for {P.shape[0]} rows")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(phi))):
            raise ValueError("polyhedron data must be finite")
        norms = np.linalg.norm(P, axis=1)
        if np.any(norms < ROW_NORM_TOL):
            bad = np.flatnonzero(norms < ROW_NORM_TOL).tolist()
            raise ValueError(f"rows {bad} have (near) zero norm")
        if np.any(phi <= 0):
            raise ValueError("phi must be strictly positive")
        P.setflags(write=False)
        phi.setflags(write=False)
        self.P = P
        self.phi = phi

    @property
    def dim(self):
        return self.P.shape[1]

    @property
    def n_rows(self):
        return self.P.shape[0]

    def normalized(self):
        """Same set with unit bound vector (rows divided by ``phi``)."""
        return HPolyhedron(self.P / self.phi[:, None], np.ones(self.n_rows))

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.P @ x <= self.phi + tol))

    def margin(self, x):
        """``max_r (P_r x - phi_r)``; nonpositive inside the set."""
        return float(np.max(self.P @ np.asarray(x, dtype=float) - self.phi))

    def support(self, direction):
        """``max d @ x`` over the set; ``inf`` if unbounded in ``d``."""
        res = lpmod.solve(lpmod.LpProblem(np.asarray(direction, float), self.P, self.phi))
        if res.status == lpmod.UNBOUNDED:
            return np.inf
        if not res.optimal:
            raise SolverError(f"support LP returned {res.status}")
        return res.value

    def is_bounded(self):
        eye = np.eye(self.dim)
        return all(np.isfinite(self.support(s * e)) for e in eye for s in (1.0, -1.0))

    def bounding_box(self):
        eye = np.eye(self.dim)
        up = np.array([self.support(e) for e in eye])
        lo = -np.array([self.support(-e) for e in eye])
        if not (np.all(np.isfinite(up)) and np.all(np.isfinite(lo))):
            raise UnboundedSet("polyhedron is unbounded")
        return lo, up

    def __repr__(self):
        return f"HPolyhedron(rows={self.n_rows}, dim={self.dim})"


def box(lower, upper):
    """Axis-aligned box as an HPolyhedron (bounds must straddle the origin)."""
    lower = np.asarray(lower, dtype=float).ravel()
    upper = np.asarray(upper, dtype=float).ravel()
    n = lower.size
    P = np.vstack([np.eye(n), -np.eye(n)])
    return HPolyhedron(P, np.concatenate([upper, -lower]))


@dataclass(frozen=True)
class ContainmentCertificate:
    """Nonnegative ``Q`` with ``Q P_inner = P_outer`` and ``Q phi_inner <= phi_outer``."""

    Q: np.ndarray
    residual_eq: float
    residual_ineq: float

    contained = True


@dataclass(frozen=True)
class NotContained:
    """Outer row ``row`` is exceeded on the inner set by ``violation``."""

    row: int
    violation: float

    contained = False


def check_containment(inner, outer, tol=1e-9):
    """Decide ``inner ⊆ outer`` and recover a Farkas multiplier if so.

    Each row of the multiplier is the solution of
    ``min Q_r @ phi_inner  s.t.  Q_r @ P_inner = P_outer[r], Q_r >= 0``,
    which gives the tightest certificate row by row.

    Returns
    -------
    ContainmentCertificate or NotContained
    """
    if inner.dim != outer.dim:
        raise InvalidDimension(f"dimensions differ: {inner.dim} vs {outer.dim}")
    l1 = inner.n_rows
    Q = np.zeros((outer.n_rows, l1))
    for r in range(outer.n_rows):
        prob = lpmod.LpProblem(
            -inner.phi,
            A_eq=inner.P.T,
            b_eq=outer.P[r],
            lower=np.zeros(l1),
        )
        res = lpmod.solve(prob)
        if res.status == lpmod.INFEASIBLE:
            return NotContained(r, np.inf)
        if not res.optimal:
            raise SolverError(f"containment LP for row {r} returned {res.status}")
        q = np.maximum(res.x, 0.0)
        if q @ inner.phi > outer.phi[r] + tol:
            return NotContained(r, float(q @ inner.phi - outer.phi[r]))
        Q[r] = q
    res_eq = float(np.max(np.abs(Q @ inner.P - outer.P)))
    res_ineq = float(max(np.max(Q @ inner.phi - outer.phi), 0.0))
    return ContainmentCertificate(Q, res_eq, res_ineq)


def _check_geometry_dim(poly):
    if poly.dim > MAX_GEOMETRY_DIM:
        raise UnsupportedDimension(
            f"geometry routines support n <= {MAX_GEOMETRY_DIM}, got {poly.dim}"
        )


def enumerate_vertices(poly, tol=1e-9):
    """All vertices of a bounded polyhedron of dimension at most 4.

    Every ``n``-subset of rows is solved as a square system; solutions
    feasible for all rows are kept and deduplicated at ``1e-9``.
    """
    _check_geometry_dim(poly)
    if not poly.is_bounded():
        raise UnboundedSet("cannot enumerate vertices of an unbounded polyhedron")
    n = poly.dim
    P, phi = poly.P, poly.phi
    combos = np.array(list(itertools.combinations(range(poly.n_rows), n)))
    if combos.size == 0:
        return np.zeros((0, n))
    mats = P[combos]  # (k, n, n)
    rhs = phi[combos]  # (k, n)
    scale = np.linalg.norm(mats, axis=2).prod(axis=1)
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-12 * scale
    pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(pts @ P.T <= phi + tol * np.maximum(1.0, np.abs(phi)), axis=1)
    pts = pts[feas]
    return _dedup(pts, DEDUP_TOL)


def _dedup(pts, tol):
    out = []
    for p in pts:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    if not out:
        return np.zeros((0, pts.shape[1] if pts.ndim == 2 else 0))
    out = np.array(out)
    order = np.lexsort(out.T[::-1])
    return out[order]


def hull_volume(points):
    """Volume of the convex hull of ``points`` (0 for degenerate hulls)."""
    points = np.asarray(points, dtype=float)
    n = points.shape[1]
    if n == 1:
        return float(points.max() - points.min()) if len(points) else 0.0
    if len(points) <= n:
        return 0.0
    try:
        return float(ConvexHull(points).volume)
    except QhullError:
        return 0.0


def volume(poly, samples=1_000_000, seed=0):
    """Volume of a bounded polyhedron (``n <= 4``).

    Exact for ``n <= 3`` (vertex enumeration and a simplicial decomposition
    of the hull). For ``n == 4`` a Monte Carlo estimate over the bounding
    box is returned; use :func:`volume_mc` to also get its standard error.
    """
    _check_geometry_dim(poly)
    if poly.dim == 4:
        return volume_mc(poly, samples=samples, seed=seed)[0]
    return hull_volume(enumerate_vertices(poly))


def volume_mc(poly, samples=1_000_000, seed=0):
    """Monte Carlo volume estimate and its standard error."""
    lo, up = poly.bounding_box()
    rng = np.random.default_rng(seed)
    box_vol = float(np.prod(up - lo))
    hits = 0
    chunk = 200_000
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        x = lo + (up - lo) * rng.random((k, poly.dim))
        hits += int(np.count_nonzero(np.all(x @ poly.P.T <= poly.phi, axis=1)))
        done += k
    p = hits / samples
    return box_vol * p, box_vol * np.sqrt(p * (1 - p) / samples)


def remove_redundant(poly, tol=1e-9):
    """Drop rows whose omission does not change the set.

    Row ``r`` is redundant when ``max P_r x`` over the remaining rows does
    not exceed ``phi_r`` by more than ``tol``.
    """
    P = poly.P / poly.phi[:, None]
    # Exact duplicates first (rows are now scaled to unit bounds).
    keep = []
    for r in range(P.shape[0]):
        if not any(np.max(np.abs(P[r] - P[k])) <= 1e-12 for k in keep):
            keep.append(r)
    P = P[keep]
    active = list(range(P.shape[0]))
    for r in range(P.shape[0]):
        others = [k for k in active if k != r]
        if not others:
            continue
        res = lpmod.solve(lpmod.LpProblem(P[r], P[others], np.ones(len(others))))
        if res.status == lpmod.UNBOUNDED:
            continue
        if res.optimal and res.value <= 1.0 + tol:
            active.remove(r)
    return HPolyhedron(P[active], np.ones(len(active)))


def _fm_eliminate(P, phi, k):
    pos = np.flatnonzero(P[:, k] > 1e-14)
    neg = np.flatnonzero(P[:, k] < -1e-14)
    zero = np.flatnonzero(np.abs(P[:, k]) <= 1e-14)
    rows = [P[zero]]
    rhs = [phi[zero]]
    if pos.size and neg.size:
        a = P[pos][:, None, :] * (-P[neg, k])[None, :, None]
        b = P[neg][None, :, :] * P[pos, k][:, None, None]
        rows.append((a + b).reshape(-1, P.shape[1]))
        rhs.append((phi[pos][:, None] * (-P[neg, k])[None, :]
                    + phi[neg][None, :] * P[pos, k][:, None]).ravel())
    newP = np.delete(np.vstack(rows), k, axis=1)
    newphi = np.concatenate(rhs)
    norms = np.linalg.norm(newP, axis=1)
    ok = norms > ROW_NORM_TOL
    return newP[ok], newphi[ok]


def project(poly, keep_dims):
    """Orthogonal projection onto the coordinates ``keep_dims``.

    Eliminated coordinates are removed by Fourier–Motzkin, pruning
    redundant rows after each step. At most two coordinates may be
    eliminated.
    """
    keep_dims = [int(i) for i in keep_dims]
    n = poly.dim
    if not keep_dims or len(set(keep_dims)) != len(keep_dims) or any(
        i < 0 or i >= n for i in keep_dims
    ):
        raise InvalidDimension(f"invalid keep_dims {keep_dims} for dimension {n}")
    drop = [i for i in range(n) if i not in keep_dims]
    if len(drop) > 2:
        raise UnsupportedDimension("at most two coordinates can be eliminated")
    if not poly.is_bounded():
        raise UnboundedSet("cannot project an unbounded polyhedron")
    current = remove_redundant(poly)
    cols = list(range(n))
    for k in sorted(drop, reverse=True):
        P, phi = _fm_eliminate(current.P, current.phi, cols.index(k))
        cols.remove(k)
        current = remove_redundant(HPolyhedron(P, phi))
    order = [cols.index(i) for i in keep_dims]
    return HPolyhedron(current.P[:, order], current.phi)


def polygon(poly):
    """Vertices of a bounded 2-D polyhedron in counter-clockwise order."""
    if poly.dim != 2:
        raise InvalidDimension("polygon() needs a 2-D polyhedron")
    v = enumerate_vertices(poly)
    c = v.mean(axis=0)
    ang = np.arctan2(v[:, 1] - c[1], v[:, 0] - c[0])
    return v[np.argsort(ang)]
