"""Closed-loop rollouts: constraint checks, containment and entry into the inner set.

The augmented state is ``xi_k = (x_k, u_k)`` where ``u_k`` is the input
applied at step ``k``. The disturbance of one step is ``d_k = (p_k, eta_k,
eta_{k+1})``; the measurement noise ``eta_{k+1}`` drawn at step ``k`` is the
``eta`` of step ``k + 1``, so the noise sequence stays consistent.

Rollouts are advanced together as arrays, but each one draws its initial
state, parameter sequence and random disturbances from its own generator
seeded by ``(seed, index)``. A rollout is therefore reproducible on its own.
"""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .closed_loop import build_grids
from .errors import InvalidConfig, SamplingFailure
from .lp import LpProblem, solve
from .plant import augment
from .polyhedra import HPolyhedron, enumerate_vertices

logger = logging.getLogger(__name__)

CHECK_TOL = 1e-8


@dataclass
class ScenarioConfig:
    """How rollouts are initialized and driven.

    ``init`` is ``"vertices"`` (cycle through the vertices of the outer set),
    ``"hit-and-run"`` (uniform in the outer set) or an array of initial
    states. ``alpha`` is ``"vertex-hop"`` (a random simplex vertex at every
    step), ``"uniform"`` (Dirichlet draws) or an array of weights.
    ``disturbance`` is ``"extreme"`` (greedy worst vertex), ``"uniform"``
    (uniform over the bounding box, rejected outside the set) or an array of
    ``(p, eta)`` rows.
    """

    horizon: int = 200
    rollouts: int = 100
    init: object = "vertices"
    alpha: object = "vertex-hop"
    disturbance: object = "extreme"
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidConfig("horizon must be at least 1")
        if self.rollouts < 1:
            raise InvalidConfig("rollouts must be at least 1")
        for name, allowed in (("init", ("vertices", "hit-and-run")),
                              ("alpha", ("vertex-hop", "uniform")),
                              ("disturbance", ("extreme", "uniform"))):
            val = getattr(self, name)
            if isinstance(val, str) and val not in allowed:
                raise InvalidConfig(f"{name} must be one of {allowed} or an explicit array")


@dataclass
class RolloutResult:
    """One trajectory with its checks.

    ``xi`` has ``horizon + 1`` rows, ``du`` has ``horizon`` rows (the
    increment taken after each step). ``entry`` is the first step with
    ``L xi <= rho`` or ``None``; ``margin`` is ``max_k max_r L_r xi_k``;
    ``ub_excess`` is the largest ``L_r xi_k - rho_r`` after entry.
    """

    xi: np.ndarray
    du: np.ndarray
    p: np.ndarray
    eta: np.ndarray
    alpha: np.ndarray
    n_x: int
    in_inner: np.ndarray
    entry: int | None
    margin: float
    ub_excess: float
    violations: dict

    @property
    def x(self):
        return self.xi[:, : self.n_x]

    @property
    def u(self):
        return self.xi[:, self.n_x:]


@dataclass
class RolloutSummary:
    results: list
    violations: dict
    max_entry: int | None
    never_entered: int
    max_margin: float
    max_ub_excess: float
    k_tilde: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def total_violations(self):
        return int(sum(self.violations.values()))

    def as_dict(self):
        return {
            "rollouts": len(self.results),
            "violations": {k: int(v) for k, v in self.violations.items()},
            "max_entry_step": self.max_entry,
            "never_entered": self.never_entered,
            "max_outer_level": self.max_margin,
            "max_inner_excess_after_entry": self.max_ub_excess,
            "k_tilde": self.k_tilde,
        }


def chebyshev_center(poly):
    """Center and radius of the largest Euclidean ball inside ``poly`` (by LP)."""
    n = poly.dim
    A = np.hstack([poly.P, np.linalg.norm(poly.P, axis=1)[:, None]])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    lower = np.full(n + 1, -np.inf)
    lower[-1] = 0.0
    res = solve(LpProblem(c, A, poly.phi, None, None, lower, None))
    if not res.optimal:
        raise SamplingFailure(f"no interior point found (LP status {res.status})")
    return res.x[:n], float(res.x[-1])


def hit_and_run(poly, n, rng, burn_in=50, thin=5):
    """``n`` approximately uniform samples from a bounded polyhedron."""
    if not poly.is_bounded():
        raise SamplingFailure("cannot sample an unbounded polyhedron")
    x, r = chebyshev_center(poly)
    if r <= 1e-12:
        raise SamplingFailure("polyhedron has an empty interior")
    P, phi = poly.P, poly.phi
    out = np.empty((n, poly.dim))
    steps = burn_in + n * thin
    k = 0
    for s in range(steps):
        d = rng.standard_normal(poly.dim)
        d /= np.linalg.norm(d)
        Pd = P @ d
        slack = phi - P @ x
        with np.errstate(divide="ignore"):
            t = slack / Pd
        t_hi = np.min(t[Pd > 1e-14], initial=np.inf)
        t_lo = np.max(t[Pd < -1e-14], initial=-np.inf)
        if not (np.isfinite(t_hi) and np.isfinite(t_lo)):
            raise SamplingFailure("polyhedron is unbounded along a sampled direction")
        x = x + rng.uniform(t_lo, t_hi) * d
        if s >= burn_in and (s - burn_in) % thin == 0 and k < n:
            out[k] = x
            k += 1
    return out


def _product_vertices(*sets):
    verts = [enumerate_vertices(HPolyhedron(S)) for S in sets]
    combos = [np.concatenate(c) for c in itertools.product(*verts)]
    return np.array(combos)


def rollout(problem, gains, L, rho, cfg, k_tilde=None):
    """Simulate ``cfg.rollouts`` trajectories of the closed loop.

    Returns a :class:`RolloutSummary`. Uncertified designs are simulated all
    the same; checks are reported, not enforced.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    rho = np.asarray(rho, dtype=float).ravel()
    aug = augment(problem)
    grids = build_grids(aug, gains)
    n_v, n_u = problem.n_v, problem.n_u
    n_p, n_eta, n_xi = problem.n_p, problem.n_eta, problem.n_xi
    R, K = cfg.rollouts, cfg.horizon
    rngs = [np.random.default_rng([cfg.seed, i]) for i in range(R)]
    outer = HPolyhedron(L)

    # initial states
    if isinstance(cfg.init, str) and cfg.init == "vertices":
        V = enumerate_vertices(outer)
        xi0 = np.array([V[rngs[i].integers(len(V))] for i in range(R)])
    elif isinstance(cfg.init, str):
        xi0 = np.vstack([hit_and_run(outer, 1, rngs[i]) for i in range(R)])
    else:
        given = np.atleast_2d(np.asarray(cfg.init, dtype=float))
        if given.shape[1] != n_xi:
            raise InvalidConfig(f"initial states need {n_xi} entries")
        xi0 = given[np.arange(R) % given.shape[0]]

    # parameter sequences, shape (R, K + 1, n_v)
    if isinstance(cfg.alpha, str) and cfg.alpha == "vertex-hop":
        idx = np.array([rngs[i].integers(n_v, size=K + 1) for i in range(R)])
        alphas = np.eye(n_v)[idx]
    elif isinstance(cfg.alpha, str):
        alphas = np.array([rngs[i].dirichlet(np.ones(n_v), size=K + 1) for i in range(R)])
    else:
        given = np.atleast_2d(np.asarray(cfg.alpha, dtype=float))
        if given.shape[1] != n_v:
            raise InvalidConfig(f"alpha rows need {n_v} weights")
        rows = given[np.arange(K + 1) % given.shape[0]]
        alphas = np.broadcast_to(rows, (R, K + 1, n_v)).copy()

    # disturbance candidates: (p, eta+) pairs
    mode = cfg.disturbance if isinstance(cfg.disturbance, str) else "given"
    if mode == "extreme":
        eta_verts = enumerate_vertices(HPolyhedron(problem.N))
        cands = _product_vertices(problem.P, problem.N)  # (n_c, n_p + n_eta)
        eta = np.array([eta_verts[rngs[i].integers(len(eta_verts))] for i in range(R)])
    elif mode == "uniform":
        Pset, Nset = HPolyhedron(problem.P), HPolyhedron(problem.N)
        draws = [_uniform_dist(Pset, Nset, K + 1, rngs[i]) for i in range(R)]
        p_seq = np.array([d[0] for d in draws])
        eta_seq = np.array([d[1] for d in draws])
        eta = eta_seq[:, 0]
    else:
        given = np.atleast_2d(np.asarray(cfg.disturbance, dtype=float))
        if given.shape[1] != n_p + n_eta:
            raise InvalidConfig(f"disturbance rows need {n_p + n_eta} entries (p, eta)")
        rows = given[np.arange(K + 1) % given.shape[0]]
        p_seq = np.broadcast_to(rows[:, :n_p], (R, K + 1, n_p))
        eta_seq = np.broadcast_to(rows[:, n_p:], (R, K + 1, n_eta))
        eta = eta_seq[:, 0].copy()

    Acl, Bcl = grids.Acl.blocks, grids.Bcl.blocks
    Adu, Bdu = grids.Adu.blocks, grids.Bdu.blocks
    xis = np.zeros((R, K + 1, n_xi))
    dus = np.zeros((R, K, n_u))
    ps = np.zeros((R, K, n_p))
    etas = np.zeros((R, K + 1, n_eta))
    xis[:, 0] = xi0
    etas[:, 0] = eta
    xi = xi0.copy()
    entered = np.all(xi0 @ L.T <= rho + CHECK_TOL, axis=1)
    safe_rho = np.where(rho > 1e-12, rho, 1.0)
    for k in range(K):
        a, ap = alphas[:, k], alphas[:, k + 1]
        # per-rollout matrices: M = sum_{j,i} ap_j a_i blocks[j, i]
        Ak = np.einsum("rj,ri,jimn->rmn", ap, a, Acl)
        Bk = np.einsum("rj,ri,jimn->rmn", ap, a, Bcl)
        Ak_du = np.einsum("rj,ri,jimn->rmn", ap, a, Adu)
        Bk_du = np.einsum("rj,ri,jimn->rmn", ap, a, Bdu)
        base = np.einsum("rmn,rn->rm", Ak, xi)
        if mode == "extreme":
            n_c = cands.shape[0]
            d_all = np.concatenate([
                cands[None, :, :n_p].repeat(R, 0),
                np.broadcast_to(eta[:, None, :], (R, n_c, n_eta)),
                cands[None, :, n_p:].repeat(R, 0),
            ], axis=2)
            nxt = base[:, None, :] + np.einsum("rmn,rcn->rcm", Bk, d_all)
            levels = nxt @ L.T
            score = np.where(entered[:, None], (levels / safe_rho).max(axis=2), levels.max(axis=2))
            pick = np.argmax(score, axis=1)
            d = d_all[np.arange(R), pick]
        else:
            d = np.concatenate([p_seq[:, k], eta, eta_seq[:, k + 1]], axis=1)
        xi_next = base + np.einsum("rmn,rn->rm", Bk, d)
        dus[:, k] = np.einsum("rmn,rn->rm", Ak_du, xi) + np.einsum("rmn,rn->rm", Bk_du, d)
        ps[:, k] = d[:, :n_p]
        eta = d[:, n_p + n_eta:]
        etas[:, k + 1] = eta
        xi = xi_next
        xis[:, k + 1] = xi
        entered |= np.all(xi @ L.T <= rho + CHECK_TOL, axis=1)

    results = [
        _check(problem, L, rho, xis[r], dus[r], ps[r], etas[r], alphas[r]) for r in range(R)
    ]
    totals = {"X": 0, "U": 0, "Udelta": 0, "Lambda": 0, "inner_after_entry": 0}
    for res in results:
        for key, val in res.violations.items():
            totals[key] += val
    entries = [res.entry for res in results if res.entry is not None]
    return RolloutSummary(
        results=results,
        violations=totals,
        max_entry=max(entries) if entries else None,
        never_entered=sum(res.entry is None for res in results),
        max_margin=max(res.margin for res in results),
        max_ub_excess=max(res.ub_excess for res in results),
        k_tilde=k_tilde,
    )


def _uniform_dist(Pset, Nset, n, rng):
    def draw(S):
        lo, hi = S.bounding_box()
        out = np.empty((n, S.dim))
        for k in range(n):
            for _ in range(1000):
                z = rng.uniform(lo, hi)
                if S.contains(z):
                    break
            out[k] = z
        return out

    return draw(Pset), draw(Nset)


def _check(problem, L, rho, xi, du, p, eta, alpha):
    n_x = problem.n_x
    x, u = xi[:, :n_x], xi[:, n_x:]
    lvl = xi @ L.T
    viol = {
        "X": int(np.sum(np.any(x @ problem.X.T > 1 + CHECK_TOL, axis=1))),
        "U": int(np.sum(np.any(u @ problem.U.T > 1 + CHECK_TOL, axis=1))),
        "Udelta": 0,
        "Lambda": int(np.sum(np.any(lvl > 1 + CHECK_TOL, axis=1))),
        "inner_after_entry": 0,
    }
    if problem.Udelta is not None:
        viol["Udelta"] = int(np.sum(np.any(du @ problem.Udelta.T > 1 + CHECK_TOL, axis=1)))
    inside = np.all(lvl <= rho + CHECK_TOL, axis=1)
    hits = np.flatnonzero(inside)
    entry = int(hits[0]) if hits.size else None
    ub = -np.inf
    if entry is not None:
        after = lvl[entry:] - rho
        ub = float(after.max())
        viol["inner_after_entry"] = int(np.sum(np.any(after > CHECK_TOL, axis=1)))
    return RolloutResult(
        xi=xi, du=du, p=p, eta=eta, alpha=alpha, n_x=n_x, in_inner=inside,
        entry=entry, margin=float(lvl.max()), ub_excess=ub, violations=viol,
    )


def export_trajectory(result, path):
    """Write ``k, x.., u.., du.., in_inner`` rows with 17 significant digits.

    Row ``k`` carries the increment taken after step ``k``; the last row
    has none and writes ``nan``.
    """
    n_x = result.n_x
    n_u = result.xi.shape[1] - n_x
    header = (["k"] + [f"x{i + 1}" for i in range(n_x)] + [f"u{i + 1}" for i in range(n_u)]
              + [f"du{i + 1}" for i in range(n_u)] + ["in_inner"])
    K = result.du.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(K + 1):
            du = result.du[k] if k < K else np.full(n_u, np.nan)
            row = ([str(k)] + [f"{v:.17g}" for v in result.xi[k]] + [f"{v:.17g}" for v in du]
                   + [str(int(result.in_inner[k]))])
            w.writerow(row)


def import_trajectory(path):
    """Read a file written by :func:`export_trajectory` into named columns."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        if name in ("k", "in_inner"):
            cols[name] = np.array([int(v) for v in vals])
        else:
            cols[name] = np.array([float(v) for v in vals])
    return cols
