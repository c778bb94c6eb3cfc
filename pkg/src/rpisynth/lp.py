"""Linear programming core.

Problems are stated in maximization form::

    maximize    c @ z
    subject to  A_ub @ z <= b_ub
                A_eq @ z == b_eq
                lower <= z <= upper

Two backends are available. ``"highs"`` (default) hands the problem to the
HiGHS solver shipped with scipy and is used by the synthesis and
certification code. ``"simplex"`` is a small dense revised simplex kept
in-repo for cross-checking; it is only meant for problems with a few
hundred variables at most.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import NumericalFailure, SolverError

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_HIGHS_OPTIONS = {
    "presolve": True,
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _as_matrix(a, n):
    if a is None:
        return sp.csr_matrix((0, n))
    if sp.issparse(a):
        return sp.csr_matrix(a, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return sp.csr_matrix((0, n))
    return sp.csr_matrix(a)


def _as_vector(b, m):
    if b is None:
        return np.zeros(0)
    b = np.asarray(b, dtype=float).ravel()
    if b.size != m:
        raise ValueError(f"bound vector has length {b.size}, expected {m}")
    return b


@dataclass
class LpProblem:
    """Maximize ``c @ z`` subject to linear inequalities, equalities and bounds.

    Variables are free unless ``lower``/``upper`` say otherwise. A row with
    all-zero coefficients and a negative right-hand side makes the problem
    trivially infeasible; this is detected at construction and recorded in
    ``flagged_infeasible``.
    """

    c: np.ndarray
    A_ub: object = None
    b_ub: object = None
    A_eq: object = None
    b_eq: object = None
    lower: object = None
    upper: object = None
    flagged_infeasible: bool = field(init=False, default=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub = _as_matrix(self.A_ub, n)
        self.A_eq = _as_matrix(self.A_eq, n)
        for name, a in (("A_ub", self.A_ub), ("A_eq", self.A_eq)):
            if a.shape[1] != n:
                raise ValueError(f"{name} has {a.shape[1]} columns, expected {n}")
        self.b_ub = _as_vector(self.b_ub, self.A_ub.shape[0])
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        self.lower = (
            np.full(n, -np.inf) if self.lower is None
            else np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        )
        self.upper = (
            np.full(n, np.inf) if self.upper is None
            else np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        )
        for name, arr in (("c", self.c), ("b_ub", self.b_ub), ("b_eq", self.b_eq),
                          ("A_ub", self.A_ub.data), ("A_eq", self.A_eq.data)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("variable bounds contain NaN")
        zero_ub = np.asarray(abs(self.A_ub).sum(axis=1)).ravel() == 0
        zero_eq = np.asarray(abs(self.A_eq).sum(axis=1)).ravel() == 0
        self.flagged_infeasible = bool(
            np.any(zero_ub & (self.b_ub < 0))
            or np.any(zero_eq & (self.b_eq != 0))
            or np.any(self.lower > self.upper)
        )

    @property
    def n(self):
        return self.c.size


@dataclass
class LpResult:
    """Outcome of :func:`solve`.

    For an optimal result, ``y_ub >= 0`` and ``y_eq`` are dual multipliers
    of the inequality and equality rows, and ``s_lower``/``s_upper >= 0``
    the multipliers of active variable bounds, so that
    ``A_ub.T @ y_ub + A_eq.T @ y_eq + s_upper - s_lower == c``.
    """

    status: str
    x: np.ndarray | None = None
    value: float | None = None
    y_ub: np.ndarray | None = None
    y_eq: np.ndarray | None = None
    s_lower: np.ndarray | None = None
    s_upper: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


def solve(lp, method="highs", max_pivots=50_000):
    """Solve an :class:`LpProblem`.

    Returns an :class:`LpResult` whose status is ``"optimal"``,
    ``"infeasible"`` or ``"unbounded"``. Raises :class:`SolverError` when
    the backend fails for any other reason.
    """
    if lp.flagged_infeasible:
        return LpResult(INFEASIBLE)
    if method == "highs":
        return _solve_highs(lp)
    if method == "simplex":
        return _solve_simplex(lp, max_pivots=max_pivots)
    raise ValueError(f"unknown LP method {method!r}")


def _solve_highs(lp):
    n = lp.n
    bounds = np.column_stack([lp.lower, lp.upper])
    res = linprog(
        -lp.c,
        A_ub=lp.A_ub if lp.A_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.A_ub.shape[0] else None,
        A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
        bounds=bounds if n else None,
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status == 2:
        return LpResult(INFEASIBLE, iterations=res.nit)
    if res.status == 3:
        return LpResult(UNBOUNDED, iterations=res.nit)
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    m_ub = lp.A_ub.shape[0]
    m_eq = lp.A_eq.shape[0]
    y_ub = -res.ineqlin.marginals if m_ub else np.zeros(0)
    y_eq = -res.eqlin.marginals if m_eq else np.zeros(0)
    return LpResult(
        OPTIMAL,
        x=res.x,
        value=float(lp.c @ res.x),
        y_ub=y_ub,
        y_eq=y_eq,
        s_lower=res.lower.marginals.copy(),
        s_upper=-res.upper.marginals,
        iterations=res.nit,
    )


def optimality_report(lp, res):
    """Residuals that certify an optimal :class:`LpResult`.

    Returns a dict with the primal infeasibility, the dual infeasibility
    (including sign violations of the multipliers), the complementary
    slackness residual and the duality gap ``dual value - primal value``.
    """
    x = res.x
    ub_slack = lp.b_ub - lp.A_ub @ x
    eq_res = lp.A_eq @ x - lp.b_eq
    primal = max(
        float(np.max(-ub_slack, initial=0.0)),
        float(np.max(np.abs(eq_res), initial=0.0)),
        float(np.max(lp.lower - x, initial=0.0)),
        float(np.max(x - lp.upper, initial=0.0)),
    )
    grad = lp.A_ub.T @ res.y_ub + lp.A_eq.T @ res.y_eq + res.s_upper - res.s_lower
    dual = max(
        float(np.max(np.abs(grad - lp.c), initial=0.0)),
        float(np.max(-res.y_ub, initial=0.0)),
        float(np.max(-res.s_lower, initial=0.0)),
        float(np.max(-res.s_upper, initial=0.0)),
    )
    lo_gap = np.where(np.isfinite(lp.lower), x - lp.lower, 0.0)
    up_gap = np.where(np.isfinite(lp.upper), lp.upper - x, 0.0)
    slack = max(
        float(np.max(np.abs(res.y_ub * ub_slack), initial=0.0)),
        float(np.max(np.abs(res.s_lower * lo_gap), initial=0.0)),
        float(np.max(np.abs(res.s_upper * up_gap), initial=0.0)),
    )
    lo_fin = np.isfinite(lp.lower)
    up_fin = np.isfinite(lp.upper)
    dual_value = (
        lp.b_ub @ res.y_ub + lp.b_eq @ res.y_eq
        + lp.upper[up_fin] @ res.s_upper[up_fin]
        - lp.lower[lo_fin] @ res.s_lower[lo_fin]
    )
    return {
        "primal_infeasibility": primal,
        "dual_infeasibility": dual,
        "complementary_slackness": slack,
        "duality_gap": float(dual_value - res.value),
    }


# --------------------------------------------------------------------------
# Dense revised simplex
# --------------------------------------------------------------------------

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-9
_REFACTOR_EVERY = 50
_BLAND_AFTER = 25  # consecutive degenerate pivots before switching rules


class _StandardForm:
    """``min f @ w  s.t.  G @ w == h, w >= 0`` built from an LpProblem.

    ``z = offset + T @ w`` recovers the original variables.
    """

    def __init__(self, lp):
        n = lp.n
        offset = np.zeros(n)
        T_rows, T_cols, T_vals = [], [], []
        extra_ub_rows = []  # (w column, bound) for finite-range variables
        k = 0
        for j in range(n):
            lo, up = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                offset[j] = lo
                T_rows.append(j); T_cols.append(k); T_vals.append(1.0)
                if np.isfinite(up):
                    extra_ub_rows.append((k, up - lo))
                k += 1
            elif np.isfinite(up):
                offset[j] = up
                T_rows.append(j); T_cols.append(k); T_vals.append(-1.0)
                k += 1
            else:
                T_rows += [j, j]; T_cols += [k, k + 1]; T_vals += [1.0, -1.0]
                k += 2
        n_struct = k
        T = sp.csr_matrix((T_vals, (T_rows, T_cols)), shape=(n, n_struct)).toarray()

        A_ub = lp.A_ub.toarray() @ T
        b_ub = lp.b_ub - lp.A_ub @ offset
        if extra_ub_rows:
            extra = np.zeros((len(extra_ub_rows), n_struct))
            for r, (col, bound) in enumerate(extra_ub_rows):
                extra[r, col] = 1.0
            A_ub = np.vstack([A_ub, extra])
            b_ub = np.concatenate([b_ub, [bd for _, bd in extra_ub_rows]])
        A_eq = lp.A_eq.toarray() @ T
        b_eq = lp.b_eq - lp.A_eq @ offset

        m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
        G = np.zeros((m_ub + m_eq, n_struct + m_ub))
        G[:m_ub, :n_struct] = A_ub
        G[:m_ub, n_struct:] = np.eye(m_ub)
        G[m_ub:, :n_struct] = A_eq
        h = np.concatenate([b_ub, b_eq])
        f = np.zeros(n_struct + m_ub)
        f[:n_struct] = -(lp.c @ T)

        self.G, self.h, self.f = G, h, f
        self.T, self.offset = T, offset
        self.n_struct = n_struct
        self.m_ub_orig = lp.A_ub.shape[0]
        self.m_ub = m_ub
        self.m_eq = m_eq
        self.extra_ub_rows = extra_ub_rows


class _Revised:
    def __init__(self, A, b, c, basis, max_pivots):
        self.A, self.b, self.c = A, b, c
        self.basis = list(basis)
        self.max_pivots = max_pivots
        self.pivots = 0
        self._refactor()

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        self.since_refactor = 0

    def primal(self):
        return self.Binv @ self.b

    def run(self, allowed):
        """Iterate until optimal; returns "optimal" or "unbounded"."""
        m, n = self.A.shape
        degenerate_run = 0
        use_bland = False
        while True:
            if self.pivots >= self.max_pivots:
                raise NumericalFailure(f"pivot budget of {self.max_pivots} exhausted")
            xB = self.primal()
            y = self.c[self.basis] @ self.Binv
            reduced = self.c - y @ self.A
            in_basis = np.zeros(n, dtype=bool)
            in_basis[self.basis] = True
            cand = np.flatnonzero(allowed & ~in_basis & (reduced < -_PIVOT_TOL))
            if cand.size == 0:
                return "optimal"
            if use_bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmin(reduced[cand])])
            d = self.Binv @ self.A[:, q]
            pos = np.flatnonzero(d > _PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = np.maximum(xB[pos], 0.0) / d[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12]
            if use_bland:
                r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                r = int(ties[np.argmax(d[ties])])
            degenerate_run = degenerate_run + 1 if best <= _FEAS_TOL else 0
            if degenerate_run >= _BLAND_AFTER:
                use_bland = True
            self._pivot(r, q, d)

    def _pivot(self, r, q, d):
        self.basis[r] = q
        self.pivots += 1
        self.since_refactor += 1
        if self.since_refactor >= _REFACTOR_EVERY:
            self._refactor()
            return
        piv = d[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(d, row)
        self.Binv[r] = row


def _solve_simplex(lp, max_pivots=50_000):
    sf = _StandardForm(lp)
    G, h, f = sf.G.copy(), sf.h.copy(), sf.f
    m, n = G.shape
    neg = h < 0
    G[neg] *= -1
    h[neg] *= -1

    # Phase I with one artificial per row.
    A1 = np.hstack([G, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    solver = _Revised(A1, h, c1, range(n, n + m), max_pivots)
    allowed = np.ones(n + m, dtype=bool)
    solver.run(allowed)
    xB = solver.primal()
    if c1[solver.basis] @ xB > 1e-7 * max(1.0, np.abs(h).max(initial=0.0)):
        return LpResult(INFEASIBLE, iterations=solver.pivots)

    # Drive zero-level artificials out of the basis; drop redundant rows.
    keep_rows = list(range(m))
    for r in range(m):
        if solver.basis[r] < n:
            continue
        row = solver.Binv[r] @ G
        nonbasic = [j for j in range(n) if j not in solver.basis]
        cands = [j for j in nonbasic if abs(row[j]) > 1e-7]
        if cands:
            q = cands[int(np.argmax(np.abs(row[cands])))]
            solver._pivot(r, q, solver.Binv @ A1[:, q])
            solver._refactor()
        else:
            keep_rows.remove(r)
    if len(keep_rows) < m:
        basis_rows = [solver.basis[r] for r in keep_rows]
        G, h = G[keep_rows], h[keep_rows]
        basis = basis_rows
    else:
        basis = solver.basis

    phase2 = _Revised(G, h, f, basis, max_pivots - solver.pivots)
    status = phase2.run(np.ones(n, dtype=bool))
    pivots = solver.pivots + phase2.pivots
    if status == "unbounded":
        return LpResult(UNBOUNDED, iterations=pivots)

    w = np.zeros(n)
    w[phase2.basis] = phase2.primal()
    w = np.maximum(w, 0.0)
    z = sf.offset + sf.T @ w[: sf.n_struct]

    # Duals of the standard form (sign-flipped rows restored).
    pi = f[phase2.basis] @ phase2.Binv
    full_pi = np.zeros(m)
    full_pi[keep_rows] = pi
    full_pi[neg] *= -1
    # min f.w has multipliers pi; for max c.z they flip sign.
    y_ub_all = -full_pi[: sf.m_ub]
    y_eq = -full_pi[sf.m_ub:]
    y_ub = y_ub_all[: sf.m_ub_orig]
    grad = lp.A_ub.T @ y_ub + lp.A_eq.T @ y_eq
    s = lp.c - grad
    s_upper = np.where(s > 0, s, 0.0)
    s_lower = np.where(s < 0, -s, 0.0)
    return LpResult(
        OPTIMAL,
        x=z,
        value=float(lp.c @ z),
        y_ub=y_ub,
        y_eq=y_eq,
        s_lower=s_lower,
        s_upper=s_upper,
        iterations=pivots,
    )
