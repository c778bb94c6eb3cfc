"""Design of gains and invariant polyhedra by multistart sequential LPs.

The design conditions are bilinear in the unknowns. Each start runs two
phases built from the same LP assembler, in which a product of two free
unknowns is linearized around the incumbent inside a trust region and a
product with one frozen factor stays exact.

Phase one
    Minimizes the contraction factor ``lambda`` with the inner-set
    condition dropped and ``rho = 1``. A linearized step moves ``L``
    together with the gains and multipliers, and an exact LP at the new
    ``L`` (``block A``: everything free except ``L`` and ``rho``) restores
    feasibility. It stops once ``lambda`` reaches ``lambda_target``.

Phase two
    Optimizes ``(1 - theta) mean(gamma) - theta mean(rho)``. A joint
    linearized step proposes ``L`` and ``rho``; the proposal is rescaled
    so that ``{L xi <= 1}`` fits the constraint set and is then polished
    back to exact feasibility (a block-A LP with softened inner condition,
    an exact LP in ``rho`` and the disturbance multipliers, and a
    bisection on the scale of ``rho``). Steps that do not improve the
    objective are rejected and the trust region shrinks.

Every returned point satisfies all conditions exactly up to LP tolerances;
the best start is kept.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from ._lpmodel import Expr, LinearModel
from .closed_loop import GainSchedule
from .conditions import CandidateSolution
from .errors import InvalidConfig, InvalidProblem, NoFeasibleStart, SolverError
from .plant import augment, validate
from .polyhedra import HPolyhedron

logger = logging.getLogger(__name__)

MULT_BOUND = 1e2
GAIN_BOUND = 1e2
GAMMA_BOUND = 1e2
LAMBDA_CAP = 1.0 - 1e-5
PHASE1_LAMBDA_CAP = 1e4
LAMBDA_WEIGHT = 1e-4
SLACK_WEIGHT = 1e3


@dataclass
class SynthesisConfig:
    """Designer choices for :func:`synthesize`.

    ``directions`` is a ``(t, n_xi)`` array of enlargement directions. When
    ``free_u_directions`` is set, the input part of every direction is a
    decision variable bounded by ``psi_u_bound`` in absolute value and the
    given input part is ignored.
    """

    l_r: int
    theta: float = 0.5
    directions: np.ndarray | None = None
    free_u_directions: bool = False
    psi_u_bound: float = 1.0
    eps1: float = 0.995
    mult_bound: float = MULT_BOUND
    gain_bound: float = GAIN_BOUND
    gamma_bound: float = GAMMA_BOUND
    starts: int = 16
    max_sweeps: int = 60
    stall_tol: float = 1e-6
    seed: int = 0
    phase1_iters: int = 80
    trust_radius: float = 0.2
    min_trust_radius: float = 1e-4
    lambda_target: float = 0.99
    pin_constraint_rows: str = "alternate"
    workers: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidConfig("theta must lie in [0, 1]")
        if self.directions is not None:
            d = np.atleast_2d(np.asarray(self.directions, dtype=float))
            self.directions = d if d.size else None
        if self.theta < 1.0 and self.directions is None:
            raise InvalidConfig("theta < 1 needs at least one enlargement direction")
        if self.pin_constraint_rows not in ("always", "never", "alternate"):
            raise InvalidConfig("pin_constraint_rows must be 'always', 'never' or 'alternate'")
        if not 0.0 < self.eps1 < 1.0:
            raise InvalidConfig("eps1 must lie in (0, 1)")
        if self.starts < 1 or self.max_sweeps < 1:
            raise InvalidConfig("starts and max_sweeps must be positive")

    @property
    def n_dirs(self):
        """Number of active directions; none are active at ``theta == 1``,
        where the objective ignores them (so the result cannot depend on them)."""
        if self.directions is None or self.theta >= 1.0:
            return 0
        return self.directions.shape[0]


@dataclass
class SynthesisResult:
    solution: CandidateSolution
    objective: float
    start: int
    history: list = field(default_factory=list)
    start_summaries: list = field(default_factory=list)


# --------------------------------------------------------------------------
# Problem constants and point representation
# --------------------------------------------------------------------------


class _Data:
    """Constant matrices of the design problem."""

    def __init__(self, problem, cfg):
        aug = augment(problem)
        self.problem = problem
        self.cfg = cfg
        p = problem
        self.n_v, self.n_x, self.n_u, self.n_y = p.n_v, p.n_x, p.n_u, p.n_y
        self.n_xi = p.n_xi
        self.n_d = p.n_d
        self.l_r = cfg.l_r
        self.X = aug.Xi.P
        self.D = aug.Dbig.P
        self.l_xi, self.l_d = self.X.shape[0], self.D.shape[0]
        self.Ud = p.Udelta
        self.Aaug = aug.Aaug.vertices
        self.Bpaug = aug.Bpaug.vertices
        C, D = p.C, p.Deta
        n_x, n_u, n_p, n_eta = p.n_x, p.n_u, p.n_p, p.n_eta
        self.S_u = np.vstack([np.zeros((n_x, n_u)), np.eye(n_u)])
        self.S_x = np.vstack([np.eye(n_x), np.zeros((n_u, n_x))])
        # du = K_i RK + Kbar_i RKb + Khat_j RKh[i]   (state part)
        self.RK = np.hstack([C, np.zeros((p.n_y, n_u))])
        self.RKb = np.hstack([np.zeros((n_u, n_x)), np.eye(n_u)])
        self.RKh = [np.hstack([C @ A, C @ B]) for A, B in zip(p.A.vertices, p.B.vertices)]
        # disturbance part
        self.SK = np.hstack([np.zeros((p.n_y, n_p)), D, np.zeros((p.n_y, n_eta))])
        self.SKh = [np.hstack([C @ Bp, np.zeros((p.n_y, n_eta)), D]) for Bp in p.Bp.vertices]
        self.pairs = [(j, i) for j in range(self.n_v) for i in range(self.n_v)]
        if cfg.l_r <= self.n_xi:
            raise InvalidConfig(f"l_r must exceed n_xi = {self.n_xi}")
        if cfg.directions is not None and cfg.directions.shape[1] != self.n_xi:
            raise InvalidConfig(f"directions must have {self.n_xi} columns")


def _empty_point(data):
    l_r, n_v, n_u, n_y = data.l_r, data.n_v, data.n_u, data.n_y
    t = data.cfg.n_dirs
    pt = {
        "L": np.zeros((l_r, data.n_xi)),
        "rho": np.ones((l_r, 1)),
        "lam": np.zeros((1, 1)),
        "G": np.zeros((data.l_xi, l_r)),
        "gamma": np.zeros((t, 1)),
        "z": np.zeros((t, n_u)),
    }
    for i in range(n_v):
        pt[f"K{i}"] = np.zeros((n_u, n_y))
        pt[f"Kb{i}"] = np.zeros((n_u, n_u))
        pt[f"Kh{i}"] = np.zeros((n_u, n_y))
    for j, i in data.pairs:
        pt[f"H{j}{i}"] = np.zeros((l_r, l_r))
        pt[f"V{j}{i}"] = np.zeros((l_r, data.l_d))
        if data.Ud is not None:
            pt[f"Q{j}{i}"] = np.zeros((data.Ud.shape[0], l_r))
            pt[f"T{j}{i}"] = np.zeros((data.Ud.shape[0], data.l_d))
    return pt


_GROUPS = {
    "L": lambda k: k == "L",
    "rho": lambda k: k == "rho",
    "lam": lambda k: k == "lam",
    "gains": lambda k: k.startswith(("K", "Kb", "Kh")),
    "H": lambda k: k.startswith("H"),
    "V": lambda k: k.startswith("V"),
    "G": lambda k: k == "G",
    "QT": lambda k: k.startswith(("Q", "T")),
    "gamma": lambda k: k in ("gamma", "z"),
}


def _free_keys(point, groups):
    keys = set()
    for g in groups:
        keys.update(k for k in point if _GROUPS[g](k))
    return keys


# --------------------------------------------------------------------------
# LP assembly
# --------------------------------------------------------------------------


class _Builder:
    """Assemble one LP around ``point`` with the variables in ``free`` unfrozen.

    Products of two free variables are linearized at ``point``; products with
    one frozen factor are exact.
    """

    def __init__(self, data, point, free, radius=None, lam_cap=LAMBDA_CAP):
        self.data, self.point, self.free = data, point, free
        self.m = LinearModel()
        self.vars = {}
        cfg = data.cfg
        bounds = {
            "L": (-cfg.gain_bound, cfg.gain_bound),
            "rho": (0.0, 1.0),
            "lam": (0.0, lam_cap),
            "G": (0.0, cfg.mult_bound),
            "gamma": (0.0, cfg.gamma_bound),
            "z": (-cfg.psi_u_bound * cfg.gamma_bound, cfg.psi_u_bound * cfg.gamma_bound),
        }
        for key in sorted(free):
            val = point[key]
            if key in bounds:
                lo, up = bounds[key]
            elif key[0] in "HVQT":
                lo, up = 0.0, cfg.mult_bound
            else:  # gains
                lo, up = -cfg.gain_bound, cfg.gain_bound
            lo = np.full(val.shape, lo)
            up = np.full(val.shape, up)
            if radius is not None and key in radius:
                r = radius[key]
                lo = np.maximum(lo, val - r)
                up = np.minimum(up, val + r)
            self.vars[key] = self.m.var(key, val.shape, lo, up)

    def lin(self, key, A=None, B=None):
        """``A @ X @ B`` for a single (free or frozen) matrix ``X``."""
        if key in self.vars:
            return self.vars[key].sandwich(A, B)
        val = self.point[key]
        if A is not None:
            val = A @ val
        if B is not None:
            val = val @ B
        return Expr(val.shape, const=val)

    def bilin(self, kx, M, ky, R=None):
        """``X @ M @ Y @ R`` (``M``/``R`` constant, ``None`` meaning identity)."""
        X0, Y0 = self.point[kx], self.point[ky]
        XM0 = X0 if M is None else X0 @ M
        MY0R = Y0 if M is None else M @ Y0
        if R is not None:
            MY0R = MY0R @ R
        fx, fy = kx in self.vars, ky in self.vars
        if fx and fy:
            const = XM0 @ (Y0 if R is None else Y0 @ R)
            return (self.vars[kx].sandwich(None, MY0R)
                    + self.vars[ky].sandwich(XM0, R) - const)
        if fx:
            return self.vars[kx].sandwich(None, MY0R)
        if fy:
            return self.vars[ky].sandwich(XM0, R)
        val = XM0 @ (Y0 if R is None else Y0 @ R)
        return Expr(val.shape, const=val)

    def eq(self, expr, rhs=0.0):
        if expr.terms:
            self.m.eq(expr, rhs)

    def le(self, expr, rhs=0.0):
        if expr.terms:
            self.m.le(expr, rhs)


def _assemble(data, point, free, *, phase1=False, radius=None, rate=True, soft_inner=False):
    b = _Builder(data, point, free, radius, PHASE1_LAMBDA_CAP if phase1 else LAMBDA_CAP)
    cfg = data.cfg
    l_r = data.l_r
    one_r = np.ones((l_r, 1))
    one_d = np.ones((data.l_d, 1))
    for j, i in data.pairs:
        H, V = f"H{j}{i}", f"V{j}{i}"
        K, Kb, Kh = f"K{i}", f"Kb{i}", f"Kh{j}"
        # L Acl = L Aaug_i + L S_u du_state(gains)
        LAcl = (b.lin("L", B=data.Aaug[i])
                + b.bilin("L", data.S_u, K, data.RK)
                + b.bilin("L", data.S_u, Kb, data.RKb)
                + b.bilin("L", data.S_u, Kh, data.RKh[i]))
        b.eq(b.bilin(H, None, "L") - LAcl)
        LBcl = (b.lin("L", B=data.Bpaug[i] @ np.hstack([np.eye(data.problem.n_p),
                                                         np.zeros((data.problem.n_p, 2 * data.problem.n_eta))]))
                + b.bilin("L", data.S_u, K, data.SK)
                + b.bilin("L", data.S_u, Kh, data.SKh[i]))
        b.eq(b.lin(V, B=data.D) - LBcl)
        b.le(b.lin(H, B=one_r) + b.lin(V, B=one_d) - b.lin("lam", A=one_r))
        if not phase1:
            inner = b.bilin(H, None, "rho") + b.lin(V, B=one_d) - cfg.eps1 * b.lin("rho")
            if soft_inner:
                slack = b.m.var(f"s{j}{i}", (l_r, 1), 0.0, np.inf)
                b.m.maximize(slack, -SLACK_WEIGHT)
                inner = inner - slack.expr()
            b.le(inner)
        if rate and data.Ud is not None:
            Q, T = f"Q{j}{i}", f"T{j}{i}"
            Ud = data.Ud
            du_state = b.lin(K, A=Ud, B=data.RK) + b.lin(Kb, A=Ud, B=data.RKb) + b.lin(Kh, A=Ud, B=data.RKh[i])
            b.eq(b.bilin(Q, None, "L") - du_state)
            du_dist = b.lin(K, A=Ud, B=data.SK) + b.lin(Kh, A=Ud, B=data.SKh[i])
            b.eq(b.lin(T, B=data.D) - du_dist)
            b.le(b.lin(Q, B=one_r) + b.lin(T, B=one_d), 1.0)
    b.eq(b.bilin("G", None, "L"), data.X)
    b.le(b.lin("G", B=one_r), 1.0)

    if not phase1 and cfg.n_dirs:
        for t, psi in enumerate(cfg.directions):
            if cfg.free_u_directions:
                psi_x = psi[: data.n_x][:, None]
                # L (S_x psi_x gamma_t + S_u z_t^T)
                g_t = _select_row(b, "gamma", t)
                z_t = _select_row(b, "z", t)
                expr = _bilin_expr(b, "L", data.S_x @ psi_x, g_t) + _bilin_expr(b, "L", data.S_u, z_t)
                b.le(expr, 1.0)
                b.le(z_t["expr"] - cfg.psi_u_bound * _repeat(g_t["expr"], data.n_u), 0.0)
                b.le(-z_t["expr"] - cfg.psi_u_bound * _repeat(g_t["expr"], data.n_u), 0.0)
            else:
                g_t = _select_row(b, "gamma", t)
                b.le(_bilin_expr(b, "L", psi[:, None], g_t), 1.0)

    m = b.m
    if phase1:
        if "lam" in b.vars:
            m.maximize(b.vars["lam"], -1.0)
    else:
        if cfg.n_dirs and "gamma" in b.vars and cfg.theta < 1.0:
            m.maximize(b.vars["gamma"], (1.0 - cfg.theta) / cfg.n_dirs)
        if "rho" in b.vars and cfg.theta > 0.0:
            m.maximize(b.vars["rho"], -cfg.theta / l_r)
        if "lam" in b.vars:
            m.maximize(b.vars["lam"], -LAMBDA_WEIGHT)
    return b


def _select_row(b, key, t):
    """Row ``t`` of matrix ``key`` as an expression of shape ``(1, ncols)``."""
    val = b.point[key]
    sel = np.zeros((1, val.shape[0]))
    sel[0, t] = 1.0
    return {"key": key, "sel": sel, "expr": b.lin(key, A=sel), "val": val[t:t + 1]}


def _repeat(expr, n):
    if expr.shape[1] == n:
        return expr
    return Expr(expr.shape[:1] + (n,), [(v, _kron_cols(c, n)) for v, c in expr.terms],
                np.repeat(expr.const, n, axis=1))


def _kron_cols(coef, n):
    return np.kron(coef, np.ones((n, 1)))


def _bilin_expr(b, kx, M, row):
    """``X @ M @ r.T`` where ``r`` is a selected row of a matrix variable."""
    key, sel = row["key"], row["sel"]
    X0 = b.point[kx]
    Y0 = row["val"].T  # (ncols, 1)
    XM0 = X0 @ M
    fx, fy = kx in b.vars, key in b.vars
    terms = None
    if fx:
        terms = b.vars[kx].sandwich(None, M @ Y0)
    if fy:
        # X0 M (sel Y)^T = X0 M Y^T sel^T ; Y var is (t, c): A @ Y^T needs transpose handling
        yexpr = _transpose_selected(b.vars[key], sel, XM0)
        terms = yexpr if terms is None else terms + yexpr
        if fx:
            terms = terms - XM0 @ Y0
    if terms is None:
        val = XM0 @ Y0
        return Expr(val.shape, const=val)
    return terms


def _transpose_selected(var, sel, A):
    """Expression ``A @ (sel @ Y).T`` for matrix variable ``Y`` (shape ``(t, c)``)."""
    c = var.shape[1]
    # (sel @ Y).T = kron(sel, I_c) @ vec(Y) in row-major order
    return Expr((A.shape[0], 1), [(var, A @ np.kron(sel, np.eye(c)))])


def _solve_block(data, point, groups, **kw):
    free = _free_keys(point, groups)
    b = _assemble(data, point, free, **kw)
    prob = b.m.build()
    try:
        res = lpmod.solve(prob)
    except SolverError as exc:
        logger.debug("block LP failed: %s", exc)
        return None
    if not res.optimal:
        return None
    new = dict(point)
    for key, var in b.vars.items():
        new[key] = b.m.value(res.x, var).copy()
    _clean(new)
    return new


def _clean(pt):
    for k, v in pt.items():
        if k[0] in "HVGQT" and k != "gamma":
            np.maximum(v, 0.0, out=v)
    pt["rho"] = np.clip(pt["rho"], 0.0, 1.0)


def _objective(data, pt):
    cfg = data.cfg
    J = 0.0
    if cfg.n_dirs:
        J += (1.0 - cfg.theta) * float(pt["gamma"].mean())
    J -= cfg.theta * float(pt["rho"].mean())
    return J


def _phase1_score(pt):
    return -float(pt["lam"][0, 0])


# --------------------------------------------------------------------------
# Initialization and the per-start search
# --------------------------------------------------------------------------


def initial_guess(problem, cfg, seed):
    """Starting point of one run.

    ``L`` stacks the augmented constraint matrix and ``l_r - l_xi`` corner
    cuts. A cut direction is either a one-step preimage of a constraint row
    (``X_r A_i`` for the open-loop augmented matrix) or a random convex
    combination of two constraint rows; it is scaled so that it removes a
    corner of the constraint box. Gains are uniform in ``[-0.2, 0.2]``,
    ``rho = 1`` and ``lambda = 0.99``.
    """
    data = _Data(problem, cfg)
    rng = np.random.default_rng(seed)
    X = data.X
    Xi = augment(problem).Xi
    pre = np.vstack([X @ A for A in data.Aaug])
    extra = []
    while len(extra) < cfg.l_r - data.l_xi:
        if rng.random() < 0.5:
            d = pre[rng.integers(pre.shape[0])]
        else:
            a, b = rng.choice(X.shape[0], size=2, replace=False)
            w = rng.uniform(0.2, 0.8)
            d = w * X[a] + (1 - w) * X[b]
        if np.linalg.norm(d) < 1e-6:
            continue
        h = Xi.support(d)
        if h <= 1.0 + 1e-9:
            continue
        extra.append(d / (h * rng.uniform(0.6, 0.95)))
    if cfg.l_r < data.l_xi:
        raise InvalidConfig(f"l_r = {cfg.l_r} is smaller than the {data.l_xi} constraint rows")
    L = np.vstack([X] + extra) if extra else X.copy()
    pt = _empty_point(data)
    pt["L"] = L
    for i in range(data.n_v):
        pt[f"K{i}"] = rng.uniform(-0.2, 0.2, pt[f"K{i}"].shape)
        pt[f"Kb{i}"] = rng.uniform(-0.2, 0.2, pt[f"Kb{i}"].shape)
        pt[f"Kh{i}"] = rng.uniform(-0.2, 0.2, pt[f"Kh{i}"].shape)
    pt["rho"] = np.ones((cfg.l_r, 1))
    pt["lam"] = np.full((1, 1), 0.99)
    return _to_candidate(data, pt)


_ALL_BUT_L_RHO = ("gains", "H", "V", "G", "QT", "gamma", "lam")
_ALL = ("L", "rho") + _ALL_BUT_L_RHO


def _pinned(data):
    return data.l_xi if data.pin else 0


def _fit_inside(data, L):
    """Scale ``L`` up (shrinking its polyhedron) until it fits in the constraint set."""
    if L is None:
        return None
    poly = HPolyhedron(L)
    c = max(poly.support(row) for row in data.X)
    if not np.isfinite(c):
        return L
    return L * c if c > 1.0 else L


def _radius(pt, groups, r, n_fixed_rows=0):
    """Trust-region radii; the first ``n_fixed_rows`` rows of ``L`` stay put."""
    rad = {}
    for key in _free_keys(pt, groups):
        rad[key] = r
    if "L" in rad and n_fixed_rows:
        rL = np.full(pt["L"].shape, r)
        rL[:n_fixed_rows] = 0.0
        rad["L"] = rL
    return rad


def _run_start(problem, cfg, start):
    data = _Data(problem, cfg)
    mode = cfg.pin_constraint_rows
    data.pin = mode == "always" or (mode == "alternate" and start % 2 == 0)
    seed = int(np.random.SeedSequence([cfg.seed, start]).generate_state(1)[0])
    cand = initial_guess(problem, cfg, seed)
    pt = _from_candidate(data, cand)
    history = []

    # Phase one: reach lambda <= target (rho = 1, no direction constraints).
    cur = _solve_block(data, pt, _ALL_BUT_L_RHO, phase1=True)
    if cur is None:
        return None, history, np.inf
    radius = cfg.trust_radius
    it = 0
    while cur["lam"][0, 0] > cfg.lambda_target and it < cfg.phase1_iters:
        it += 1
        step = _solve_block(data, cur, ("L",) + _ALL_BUT_L_RHO, phase1=True,
                            radius=_radius(cur, ("L", "gains", "H", "V", "G", "QT"), radius, _pinned(data)))
        nxt = None
        if step is not None:
            probe = dict(cur)
            probe["L"] = _fit_inside(data, step["L"])
            nxt = _solve_block(data, probe, _ALL_BUT_L_RHO, phase1=True)
        logger.debug("phase one %d: radius %.3g, lambda %s -> %s", it, radius,
                     cur["lam"][0, 0], None if nxt is None else nxt["lam"][0, 0])
        if nxt is not None and _phase1_score(nxt) > _phase1_score(cur) + 1e-9:
            cur = nxt
            radius = min(radius * 1.5, 1.0)
        else:
            radius *= 0.5
            if radius < cfg.min_trust_radius:
                break
    best_lam = float(cur["lam"][0, 0])
    if best_lam > cfg.lambda_target:
        logger.info("start %d: phase one stalled at lambda=%.4f", start, best_lam)
        return None, history, best_lam

    cur["rho"] = np.ones((cfg.l_r, 1))
    cur = _polish(data, cur)
    if cur is None:
        return None, history, best_lam
    J = _objective(data, cur)
    history.append(J)
    radius = cfg.trust_radius
    for sweep in range(cfg.max_sweeps):
        J_before = J
        step_groups = ("L", "rho") + _ALL_BUT_L_RHO
        step = _solve_block(data, cur, step_groups,
                            radius=_radius(cur, ("L", "rho", "gains", "H", "V", "G", "QT", "gamma"), radius, _pinned(data)))
        accepted = False
        if step is not None:
            probe = dict(cur)
            probe["L"] = _fit_inside(data, step["L"])
            probe["rho"] = step["rho"]
            nxt = _polish(data, probe)
            if nxt is None:
                probe["rho"] = cur["rho"]
                nxt = _polish(data, probe)
            if nxt is not None and _objective(data, nxt) > J + 1e-9:
                cur, accepted = nxt, True
        logger.debug("sweep %d: radius %.3g, J %.6f, accepted %s", sweep, radius,
                     _objective(data, cur), accepted)
        if accepted:
            radius = min(radius * 1.5, 1.0)
        else:
            radius *= 0.5
        J = _objective(data, cur)
        history.append(J)
        if radius < cfg.min_trust_radius or (accepted and J - J_before < cfg.stall_tol):
            break
    return _to_candidate(data, cur), history, float(cur["lam"][0, 0])


def _shrink_rho(data, pt, rel_tol=1e-4):
    """Smallest scaling ``s`` of ``rho`` for which block A stays feasible.

    Feasibility is monotone in ``s``: a solution at ``s`` gives
    ``H rho <= eps1 rho`` and hence remains a solution for any larger ``s``.
    Bisection therefore returns the block-A optimum along ``rho``'s ray.
    """
    rho0 = pt["rho"].copy()
    best = pt
    lo, hi = 0.0, 1.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        probe = dict(pt)
        probe["rho"] = mid * rho0
        sol = _solve_block(data, probe, _ALL_BUT_L_RHO)
        if sol is None:
            lo = mid
        else:
            hi, best = mid, sol
    return best


def _polish(data, pt, rounds=8):
    """Exact block-A solution at the ``L`` of ``pt``, starting from its ``rho``.

    Block A is first solved with a penalized slack on the inner-set
    condition, which tolerates the small violation a linearized step leaves
    behind, and the rho block then restores exact feasibility. When the
    objective weights ``rho``, ray bisections on ``rho`` (which re-optimize
    the gains) alternate with rho-block updates of its shape.
    """
    soft = _solve_block(data, pt, _ALL_BUT_L_RHO, soft_inner=True)
    if soft is None:
        return None
    best = _solve_block(data, soft, ("rho", "V", "lam"))
    if best is None:
        return None
    if data.cfg.theta <= 0.0:
        return best
    J = _objective(data, best)
    for _ in range(rounds):
        cand = _shrink_rho(data, best)
        shaped = _solve_block(data, cand, ("rho", "V", "lam"))
        if shaped is not None:
            cand = shaped
        J_new = _objective(data, cand)
        if J_new <= J + data.cfg.stall_tol:
            if J_new > J:
                best = cand
            break
        best, J = cand, J_new
    return best


def _to_candidate(data, pt):
    from .conditions import CandidateSolution

    n_v = data.n_v
    gains = GainSchedule(
        [pt[f"K{i}"] for i in range(n_v)],
        [pt[f"Kb{i}"] for i in range(n_v)],
        [pt[f"Kh{i}"] for i in range(n_v)],
    )
    l_r, l_d = data.l_r, data.l_d
    H = np.zeros((n_v * l_r, n_v * l_r))
    V = np.zeros((n_v * l_r, n_v * l_d))
    Q = T = None
    if data.Ud is not None and "Q00" in pt:
        l_du = data.Ud.shape[0]
        Q = np.zeros((n_v * l_du, n_v * l_r))
        T = np.zeros((n_v * l_du, n_v * l_d))
    for j, i in data.pairs:
        H[j * l_r:(j + 1) * l_r, i * l_r:(i + 1) * l_r] = pt[f"H{j}{i}"]
        V[j * l_r:(j + 1) * l_r, i * l_d:(i + 1) * l_d] = pt[f"V{j}{i}"]
        if Q is not None:
            l_du = data.Ud.shape[0]
            Q[j * l_du:(j + 1) * l_du, i * l_r:(i + 1) * l_r] = pt[f"Q{j}{i}"]
            T[j * l_du:(j + 1) * l_du, i * l_d:(i + 1) * l_d] = pt[f"T{j}{i}"]
    cfg = data.cfg
    gammas = pt["gamma"].ravel().copy() if cfg.n_dirs else None
    psis = None
    if cfg.n_dirs:
        psis = cfg.directions.copy()
        if cfg.free_u_directions:
            with np.errstate(divide="ignore", invalid="ignore"):
                psi_u = np.where(gammas[:, None] > 1e-12, pt["z"] / gammas[:, None], 0.0)
            psis[:, data.n_x:] = np.clip(psi_u, -cfg.psi_u_bound, cfg.psi_u_bound)
    L = pt["L"].copy()
    return CandidateSolution(
        L=L,
        rho=pt["rho"].ravel().copy(),
        lam=float(pt["lam"][0, 0]),
        eps1=cfg.eps1,
        gains=gains,
        H=H, V=V, G=pt["G"].copy(), Q=Q, T=T,
        J=np.linalg.pinv(L),
        gammas=gammas,
        psis=psis,
    )


def _from_candidate(data, cand):
    pt = _empty_point(data)
    pt["L"] = np.array(cand.L, dtype=float)
    pt["rho"] = np.asarray(cand.rho, dtype=float).reshape(-1, 1)
    pt["lam"] = np.full((1, 1), float(cand.lam))
    for i in range(data.n_v):
        pt[f"K{i}"] = np.array(cand.gains.K[i])
        pt[f"Kb{i}"] = np.array(cand.gains.Kbar[i])
        pt[f"Kh{i}"] = np.array(cand.gains.Khat[i])
    return pt


def _worker(args):
    problem, cfg, start = args
    return start, _run_start(problem, cfg, start)


def synthesize(problem, cfg):
    """Multistart design. Returns a :class:`SynthesisResult`.

    Raises :class:`NoFeasibleStart` if no start reaches a contractive design.
    """
    report = validate(problem)
    if not report.valid:
        raise InvalidProblem("; ".join(msg for _, msg in report.issues))
    _Data(problem, cfg)  # config checks
    jobs = [(problem, cfg, s) for s in range(cfg.starts)]
    workers = cfg.workers
    if workers is None:
        workers = int(os.environ.get("RPI_SYNTH_THREADS", "1") or 1)
    workers = max(1, min(workers, cfg.starts))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_worker, jobs))
    else:
        outcomes = [_worker(job) for job in jobs]
    outcomes.sort(key=lambda o: o[0])

    best = None
    summaries = []
    best_lam = np.inf
    for start, (cand, history, lam) in outcomes:
        best_lam = min(best_lam, lam)
        if cand is None:
            summaries.append({"start": start, "feasible": False, "lambda": lam})
            continue
        J = history[-1]
        summaries.append({"start": start, "feasible": True, "objective": J, "lambda": cand.lam})
        key = (J, -cand.lam, -start)
        if best is None or key > best[0]:
            best = (key, start, cand, history)
    if best is None:
        raise NoFeasibleStart(
            f"no start reached lambda <= {cfg.lambda_target}", profile={"best_lambda": best_lam}
        )
    _, start, cand, history = best
    return SynthesisResult(cand, history[-1], start, history, summaries)
