"""Invariance, ultimate-boundedness and constraint conditions as residuals.

A candidate design consists of the shape matrix ``L`` of the outer set
``{xi : L xi <= 1}``, the inner bounds ``rho`` of ``{xi : L xi <= rho}``,
the gains and the nonnegative Farkas multipliers. Multipliers coupling two
vertices are stored as big matrices whose block ``(j, i)`` belongs to the
``Khat`` vertex ``j`` and the plant vertex ``i``.

The conditions, written per vertex pair ``(j, i)``, are::

    H_ji L   = L Acl_ji                 V_ji D  = L Bcl_ji
    H_ji 1 + V_ji 1 <= lam 1            H_ji rho + V_ji 1 <= eps1 rho
    G L = X,  G 1 <= 1                  J L = I
    Q_ji L   = Ud Adu_ji                T_ji D  = Ud Bdu_ji
    Q_ji 1 + T_ji 1 <= 1                gamma_t L psi_t <= 1

:func:`residuals` evaluates them on the assembled block grids and
:func:`residuals_vertex_pair_form` recomputes them one vertex pair at a time
from directly evaluated closed-loop matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .closed_loop import GainSchedule, build_grids, closed_loop_matrices
from .errors import InvalidDimension
from .plant import augment
from .polytope_algebra import gamma, gamma_prime


@dataclass
class CandidateSolution:
    """A design candidate. ``Q`` and ``T`` are ``None`` without a rate constraint."""

    L: np.ndarray
    rho: np.ndarray
    lam: float
    eps1: float
    gains: GainSchedule
    H: np.ndarray
    V: np.ndarray
    G: np.ndarray
    Q: np.ndarray | None = None
    T: np.ndarray | None = None
    J: np.ndarray | None = None
    gammas: np.ndarray | None = None
    psis: np.ndarray | None = None

    def __post_init__(self):
        self.L = np.atleast_2d(np.asarray(self.L, dtype=float))
        self.rho = np.asarray(self.rho, dtype=float).ravel()
        if self.rho.shape != (self.L.shape[0],):
            raise InvalidDimension("rho needs one entry per row of L")
        for k in ("H", "V", "G", "Q", "T", "J"):
            v = getattr(self, k)
            if v is not None:
                setattr(self, k, np.atleast_2d(np.asarray(v, dtype=float)))
        if self.J is None:
            self.J = np.linalg.pinv(self.L)
        if self.gammas is not None:
            self.gammas = np.asarray(self.gammas, dtype=float).ravel()
            self.psis = np.atleast_2d(np.asarray(self.psis, dtype=float))

    @property
    def l_r(self):
        return self.L.shape[0]

    @property
    def n_xi(self):
        return self.L.shape[1]


@dataclass
class ResidualReport:
    """Largest violation of every condition (``0`` when satisfied).

    ``worst_pair`` is the ``(j, i)`` vertex pair with the largest
    pair-wise violation when the report comes from the pair form.
    """

    values: dict = field(default_factory=dict)
    worst_pair: tuple | None = None

    @property
    def max_equality(self):
        return max((v for k, v in self.values.items() if k.startswith("eq:")), default=0.0)

    @property
    def max_inequality(self):
        return max((v for k, v in self.values.items() if not k.startswith("eq:")), default=0.0)

    @property
    def worst(self):
        return max(self.values.values(), default=0.0)

    def ok(self, tol=1e-6):
        return self.worst <= tol


def _pos(a):
    a = np.asarray(a, dtype=float)
    return float(np.max(a, initial=0.0)) if a.size else 0.0


def _abs(a):
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a), initial=0.0)) if a.size else 0.0


def residuals(problem, cand):
    """Residuals in big-matrix form over all vertex pairs at once."""
    aug = augment(problem)
    grids = build_grids(aug, cand.gains)
    n_v = problem.n_v
    L, rho = cand.L, cand.rho[:, None]
    l_r = L.shape[0]
    Dm = aug.Dbig.P
    l_d = Dm.shape[0]
    I_v = np.eye(n_v)
    liftL = np.kron(I_v, L)
    ones_r = np.kron(I_v, np.ones((l_r, 1)))
    ones_d = np.kron(I_v, np.ones((l_d, 1)))
    out = {}
    out["eq:invariance"] = _abs(cand.H @ liftL - liftL @ grids.Acl.flatten())
    out["eq:disturbance"] = _abs(cand.V @ np.kron(I_v, Dm) - liftL @ grids.Bcl.flatten())
    hv = cand.H @ ones_r + cand.V @ ones_d
    out["contraction"] = _pos(hv - cand.lam)
    out["lambda<1"] = _pos(cand.lam - 1.0)
    inner = cand.H @ np.kron(I_v, rho) + cand.V @ ones_d - cand.eps1 * np.tile(rho, (n_v, n_v))
    out["inner"] = _pos(inner)
    out["eq:state"] = _abs(cand.G @ L - aug.Xi.P)
    out["state"] = _pos(cand.G.sum(axis=1) - 1.0)
    out["eq:left_inverse"] = _abs(cand.J @ L - np.eye(L.shape[1]))
    mults = [cand.H, cand.V, cand.G]
    if problem.Udelta is not None:
        if cand.Q is None or cand.T is None:
            raise InvalidDimension("rate-constrained problems need Q and T multipliers")
        Ud = problem.Udelta
        l_du = Ud.shape[0]
        liftUd = np.kron(I_v, Ud)
        if cand.Q.shape != (n_v * l_du, n_v * l_r):
            raise InvalidDimension(f"Q must be {(n_v * l_du, n_v * l_r)}, got {cand.Q.shape}")
        out["eq:rate"] = _abs(cand.Q @ liftL - liftUd @ grids.Adu.flatten())
        out["eq:rate_disturbance"] = _abs(cand.T @ np.kron(I_v, Dm) - liftUd @ grids.Bdu.flatten())
        out["rate"] = _pos(cand.Q @ ones_r + cand.T @ ones_d - 1.0)
        mults += [cand.Q, cand.T]
    out["rho>=0"] = _pos(-cand.rho)
    out["rho<=1"] = _pos(cand.rho - 1.0)
    out["multipliers>=0"] = max(_pos(-M) for M in mults)
    if cand.gammas is not None and cand.gammas.size:
        out["directions"] = _pos(cand.gammas[None, :] * (L @ cand.psis.T) - 1.0)
        out["gamma>=0"] = _pos(-cand.gammas)
    return ResidualReport(out)


def pair_block(M, j, i, rows, cols, n_v):
    """Block ``(j, i)`` of a big matrix, extracted with vertex selectors."""
    e_j = np.eye(n_v)[j]
    e_i = np.eye(n_v)[i]
    return gamma_prime(e_j, rows) @ M @ gamma(e_i, cols)


def residuals_vertex_pair_form(problem, cand):
    """Residuals recomputed pair by pair from direct closed-loop evaluation."""
    aug = augment(problem)
    n_v = problem.n_v
    L, rho = cand.L, cand.rho
    l_r = L.shape[0]
    Dm = aug.Dbig.P
    l_d = Dm.shape[0]
    I_v = np.eye(n_v)
    eq_inv = eq_dist = contr = inner = 0.0
    eq_rate = eq_rate_d = rate = 0.0
    worst_pair, worst_val = None, -1.0
    for j in range(n_v):
        for i in range(n_v):
            Acl, Bcl, Adu, Bdu = closed_loop_matrices(problem, cand.gains, I_v[i], I_v[j])
            H = pair_block(cand.H, j, i, l_r, l_r, n_v)
            V = pair_block(cand.V, j, i, l_r, l_d, n_v)
            pair = (_abs(H @ L - L @ Acl), _abs(V @ Dm - L @ Bcl),
                    _pos(H.sum(1) + V.sum(1) - cand.lam),
                    _pos(H @ rho + V.sum(1) - cand.eps1 * rho))
            eq_inv, eq_dist = max(eq_inv, pair[0]), max(eq_dist, pair[1])
            contr, inner = max(contr, pair[2]), max(inner, pair[3])
            pair_val = max(pair)
            if problem.Udelta is not None:
                Ud = problem.Udelta
                l_du = Ud.shape[0]
                Q = pair_block(cand.Q, j, i, l_du, l_r, n_v)
                T = pair_block(cand.T, j, i, l_du, l_d, n_v)
                eq_rate = max(eq_rate, _abs(Q @ L - Ud @ Adu))
                eq_rate_d = max(eq_rate_d, _abs(T @ Dm - Ud @ Bdu))
                rate = max(rate, _pos(Q.sum(1) + T.sum(1) - 1.0))
                pair_val = max(pair_val, _abs(Q @ L - Ud @ Adu), _abs(T @ Dm - Ud @ Bdu),
                               _pos(Q.sum(1) + T.sum(1) - 1.0))
            if pair_val > worst_val:
                worst_pair, worst_val = (j, i), pair_val
    out = {
        "eq:invariance": eq_inv,
        "eq:disturbance": eq_dist,
        "contraction": contr,
        "lambda<1": _pos(cand.lam - 1.0),
        "inner": inner,
        "eq:state": _abs(cand.G @ L - aug.Xi.P),
        "state": _pos(cand.G.sum(axis=1) - 1.0),
        "eq:left_inverse": _abs(cand.J @ L - np.eye(L.shape[1])),
    }
    mults = [cand.H, cand.V, cand.G]
    if problem.Udelta is not None:
        out.update({"eq:rate": eq_rate, "eq:rate_disturbance": eq_rate_d, "rate": rate})
        mults += [cand.Q, cand.T]
    out["rho>=0"] = _pos(-rho)
    out["rho<=1"] = _pos(rho - 1.0)
    out["multipliers>=0"] = max(_pos(-M) for M in mults)
    if cand.gammas is not None and cand.gammas.size:
        vals = [g * (L @ psi) - 1.0 for g, psi in zip(cand.gammas, cand.psis)]
        out["directions"] = max(_pos(v) for v in vals)
        out["gamma>=0"] = _pos(-cand.gammas)
    return ResidualReport(out, worst_pair)
