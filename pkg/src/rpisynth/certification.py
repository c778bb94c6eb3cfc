"""Independent verification of a design from ``(problem, gains, L, rho)``.

Every multiplier is recovered from scratch, one row at a time, by small LPs,
so a certificate never relies on values produced by the synthesis. The
multiplier-free path :func:`one_step_worst_case` maximizes each row of ``L``
over the one-step image directly and must agree with the multiplier path by
LP duality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .closed_loop import build_grids
from .conditions import CandidateSolution, residuals
from .errors import RankDeficientL, UnboundedSet, ZeroRho
from .lp import LpProblem
from .plant import augment
from .polyhedra import HPolyhedron, check_containment

DEFAULT_EPS1 = 0.995
INNER_SLACK = 1e-9  # allowance over the exact inner level in the joint row LP


@dataclass
class Certificate:
    """Outcome of :func:`certify`.

    ``lam_star`` is the smallest contraction factor supported by the
    recovered multipliers; ``inner_excess`` is the largest violation of the
    inner-set condition (negative when it holds with slack); ``du_margin``
    is ``1`` minus the worst normalized input-increment level (``None``
    without a rate constraint); ``k_tilde`` is the finite-step bound
    (``None`` when some ``rho`` entry vanishes).
    """

    certified: bool
    tol: float
    lam_star: float
    inner_excess: float
    state_level: float
    du_margin: float | None
    k_tilde: int | None
    candidate: CandidateSolution
    residual: dict
    containment: object
    failures: list = field(default_factory=list)

    def summary(self):
        return {
            "certified": bool(self.certified),
            "tol": self.tol,
            "lambda_star": self.lam_star,
            "inner_excess": self.inner_excess,
            "state_level": self.state_level,
            "du_margin": self.du_margin,
            "k_tilde": self.k_tilde,
            "failures": [list(f) for f in self.failures],
        }


def _row_lp(L, D, a_xi, a_d, rho=None, rho_r=None, eps1=None, tol=0.0):
    """Minimize ``h 1 + v 1`` over ``h, v >= 0`` with ``h L = a_xi`` and ``v D = a_d``.

    With ``rho`` given, also enforce ``h rho + v 1 <= eps1 rho_r + tol``.
    Variables are ``[h, v]``; returns ``(h, v, value)`` or ``None``.
    """
    l_r, l_d = L.shape[0], D.shape[0]
    n = l_r + l_d
    A_eq = np.zeros((L.shape[1] + D.shape[1], n))
    A_eq[: L.shape[1], :l_r] = L.T
    A_eq[L.shape[1]:, l_r:] = D.T
    b_eq = np.concatenate([a_xi, a_d])
    A_ub = b_ub = None
    if rho is not None:
        A_ub = np.concatenate([rho, np.ones(l_d)])[None, :]
        b_ub = np.array([eps1 * rho_r + tol])
    res = lpmod.solve(LpProblem(-np.ones(n), A_ub, b_ub, A_eq, b_eq, np.zeros(n), None))
    if not res.optimal:
        return None
    x = np.maximum(res.x, 0.0)  # round-off can leave entries near -1e-10
    return x[:l_r], x[l_r:], -res.value


def _inner_lp(L, D, a_xi, a_d, rho):
    """Minimize ``h rho + v 1`` subject to the same equalities (the inner-set level)."""
    l_r, l_d = L.shape[0], D.shape[0]
    n = l_r + l_d
    A_eq = np.zeros((L.shape[1] + D.shape[1], n))
    A_eq[: L.shape[1], :l_r] = L.T
    A_eq[L.shape[1]:, l_r:] = D.T
    c = -np.concatenate([rho, np.ones(l_d)])
    res = lpmod.solve(LpProblem(c, None, None, A_eq, np.concatenate([a_xi, a_d]), np.zeros(n), None))
    if not res.optimal:
        return None
    x = np.maximum(res.x, 0.0)  # round-off can leave entries near -1e-10
    return x[:l_r], x[l_r:], -res.value


def finite_step_bound(L, rho, lam_tilde):
    """Worst-case number of steps from ``{L xi <= 1}`` into ``{L xi <= rho}``.

    ``eta = max_r 1 / rho_r`` is the smallest scaling with
    ``{L xi <= 1}`` inside ``eta {L xi <= rho}``, and the bound is
    ``ceil(log(1 / eta) / log(lam_tilde))``.
    """
    rho = np.asarray(rho, dtype=float).ravel()
    if not 0.0 < lam_tilde < 1.0:
        raise ValueError("lam_tilde must lie in (0, 1)")
    if np.any(rho <= 1e-12):
        raise ZeroRho(f"rho has entries <= 1e-12 at rows {np.flatnonzero(rho <= 1e-12).tolist()}")
    eta = float(np.max(1.0 / rho))
    if eta <= 1.0:
        return 0
    return max(0, math.ceil(math.log(1.0 / eta) / math.log(lam_tilde) - 1e-12))


def certify(problem, gains, L, rho, tol=1e-6, eps1=DEFAULT_EPS1, gammas=None, psis=None):
    """Recover all multipliers for ``(gains, L, rho)`` and check every condition.

    The certificate holds when the recovered ``lam_star`` is below one and
    every other condition holds within ``tol``. Failures are listed as
    ``(condition, pair, row, value)`` with ``pair = (j, i)`` the ``Khat``
    and plant vertex indices.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    rho = np.asarray(rho, dtype=float).ravel()
    aug = augment(problem)
    n_xi = problem.n_xi
    if L.shape[1] != n_xi or np.linalg.matrix_rank(L) < n_xi:
        raise RankDeficientL(f"L must have full column rank {n_xi}")
    gains.check_against(problem)
    grids = build_grids(aug, gains)
    D = aug.Dbig.P
    n_v, l_r, l_d = problem.n_v, L.shape[0], D.shape[0]
    H = np.zeros((n_v * l_r, n_v * l_r))
    V = np.zeros((n_v * l_r, n_v * l_d))
    failures = []
    lam_star = 0.0
    inner_excess = -np.inf
    worst = (None, None, -np.inf)
    for j in range(n_v):
        for i in range(n_v):
            LA = L @ grids.Acl.blocks[j, i]
            LB = L @ grids.Bcl.blocks[j, i]
            for r in range(l_r):
                lvl = _inner_lp(L, D, LA[r], LB[r], rho)
                if lvl is None:
                    raise UnboundedSet("multiplier recovery failed: {L xi <= 1} is not bounded")
                excess = lvl[2] - eps1 * rho[r]
                inner_excess = max(inner_excess, excess)
                # Spend no more of the tolerance than the inner level needs.
                slack = max(excess, 0.0) + INNER_SLACK
                sol = None
                if slack <= tol:
                    sol = _row_lp(L, D, LA[r], LB[r], rho, rho[r], eps1, slack)
                if sol is None:
                    sol = _row_lp(L, D, LA[r], LB[r], rho, rho[r], eps1, tol)
                if sol is None:
                    failures.append(("inner", (j, i), r, float(excess)))
                    sol = _row_lp(L, D, LA[r], LB[r])
                h, v, val = sol
                H[j * l_r + r, i * l_r:(i + 1) * l_r] = h
                V[j * l_r + r, i * l_d:(i + 1) * l_d] = v
                if val > worst[2]:
                    worst = ((j, i), r, val)
                lam_star = max(lam_star, val)
    if lam_star >= 1.0:
        failures.append(("contraction", worst[0], worst[1], float(lam_star)))

    Lam = HPolyhedron(L)
    containment = check_containment(Lam, aug.Xi, tol=tol)
    Xm = aug.Xi.P
    G = np.zeros((Xm.shape[0], l_r))
    state_level = 0.0
    for r in range(Xm.shape[0]):
        sol = _row_lp(L, np.zeros((0, 0)), Xm[r], np.zeros(0))
        if sol is None:
            raise UnboundedSet("constraint rows are not supported by {L xi <= 1}")
        G[r] = sol[0]
        state_level = max(state_level, sol[2])
        if sol[2] > 1.0 + tol:
            failures.append(("state", None, r, float(sol[2])))

    Q = T = None
    du_margin = None
    if problem.Udelta is not None:
        Ud = problem.Udelta
        l_du = Ud.shape[0]
        Q = np.zeros((n_v * l_du, n_v * l_r))
        T = np.zeros((n_v * l_du, n_v * l_d))
        level = 0.0
        for j in range(n_v):
            for i in range(n_v):
                UA = Ud @ grids.Adu.blocks[j, i]
                UB = Ud @ grids.Bdu.blocks[j, i]
                for r in range(l_du):
                    q, t, val = _row_lp(L, D, UA[r], UB[r])
                    Q[j * l_du + r, i * l_r:(i + 1) * l_r] = q
                    T[j * l_du + r, i * l_d:(i + 1) * l_d] = t
                    level = max(level, val)
                    if val > 1.0 + tol:
                        failures.append(("rate", (j, i), r, float(val)))
        du_margin = 1.0 - level

    if gammas is not None and np.size(gammas) == 0:
        gammas = psis = None
    if gammas is not None:
        g = np.asarray(gammas, dtype=float).ravel()
        lev = g[None, :] * (L @ np.atleast_2d(psis).T)
        if lev.size and lev.max() > 1.0 + tol:
            failures.append(("directions", None, int(np.argmax(lev.max(axis=0))), float(lev.max())))

    cand = CandidateSolution(
        L=L, rho=rho, lam=max(lam_star, 0.0), eps1=eps1, gains=gains,
        H=H, V=V, G=G, Q=Q, T=T, J=np.linalg.pinv(L),
        gammas=gammas, psis=psis,
    )
    report = residuals(problem, cand)
    named = {f[0] for f in failures}
    for key, val in report.values.items():
        name = key[3:] if key.startswith("eq:") else key
        if val > tol and name not in named:
            failures.append((name, None, None, float(val)))
    try:
        k_tilde = finite_step_bound(L, rho, eps1)
    except ZeroRho:
        k_tilde = None
    certified = lam_star < 1.0 and not failures
    return Certificate(
        certified=certified, tol=tol, lam_star=float(lam_star),
        inner_excess=float(inner_excess), state_level=float(state_level),
        du_margin=du_margin, k_tilde=k_tilde, candidate=cand,
        residual=dict(report.values), containment=containment, failures=failures,
    )


@dataclass
class OneStepReport:
    """Row-wise one-step maxima; arrays are indexed ``[j, i, r]``."""

    outer: np.ndarray
    inner: np.ndarray
    lam: float
    eps1: float
    rho: np.ndarray

    @property
    def worst_outer(self):
        return float(self.outer.max())

    @property
    def inner_excess(self):
        return float((self.inner - self.eps1 * self.rho[None, None, :]).max())

    def holds(self, tol=0.0):
        return self.worst_outer <= self.lam + tol and self.inner_excess <= tol


def one_step_worst_case(grids, L, rho, lam, D, eps1=DEFAULT_EPS1):
    """Maximize every row of ``L`` over the one-step image of ``{L xi <= 1}``.

    For each vertex pair and row, the maximum of
    ``L_r (Acl xi + Bcl d)`` over ``{L xi <= 1}`` and ``{D d <= 1}`` is found
    by LP, and likewise over ``{L xi <= rho}`` for the inner set. These are
    the multiplier-free forms of the contraction and inner-set conditions.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    rho = np.asarray(rho, dtype=float).ravel()
    Dp = D if isinstance(D, HPolyhedron) else HPolyhedron(D)
    outer_set = HPolyhedron(L)
    if not outer_set.is_bounded():
        raise UnboundedSet("{L xi <= 1} is unbounded")
    n_v = grids.n_v
    l_r = L.shape[0]
    outer = np.zeros((n_v, n_v, l_r))
    inner = np.zeros((n_v, n_v, l_r))
    inner_set = HPolyhedron(L, np.maximum(rho, 0.0)) if np.all(rho > 0) else None
    for j in range(n_v):
        for i in range(n_v):
            LA = L @ grids.Acl.blocks[j, i]
            LB = L @ grids.Bcl.blocks[j, i]
            for r in range(l_r):
                dist = Dp.support(LB[r])
                outer[j, i, r] = outer_set.support(LA[r]) + dist
                if inner_set is not None:
                    inner[j, i, r] = inner_set.support(LA[r]) + dist
                else:
                    inner[j, i, r] = _support_general(L, rho, LA[r]) + dist
    return OneStepReport(outer, inner, float(lam), float(eps1), rho)


def _support_general(L, rho, a):
    n = L.shape[1]
    res = lpmod.solve(LpProblem(a, L, rho, None, None, np.full(n, -np.inf), None))
    if not res.optimal:
        raise UnboundedSet("inner set support is unbounded")
    return float(res.value)
