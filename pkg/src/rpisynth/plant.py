"""LPV design problems and their augmented (state + input) form.

The plant is::

    x+ = A(alpha) x + B(alpha) u + Bp(alpha) p
    y  = C x + Deta eta

with state, input and input-rate constraints ``X x <= 1``, ``U u <= 1``,
``Udelta du <= 1`` and disturbance sets ``P p <= 1``, ``N eta <= 1``.
All sets use unit bound vectors; :func:`normalize_rows` converts a general
``(P, phi)`` description.

The augmented state is ``xi = (x, u)`` and the control increment
``du = u+ - u`` acts as the virtual input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .errors import InvalidDimension, InvalidProblem
from .polyhedra import HPolyhedron, ROW_NORM_TOL
from .polytope_algebra import MatrixPolytope


def normalize_rows(P, phi):
    """Rescale ``P x <= phi`` (``phi > 0``) to ``(P / phi) x <= 1``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    phi = np.asarray(phi, dtype=float).ravel()
    if np.any(phi <= 0):
        raise ValueError("bounds must be positive to normalize")
    return P / phi[:, None]


def _mat(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidDimension(f"{name} must be a matrix, got ndim={a.ndim}")
    a.setflags(write=False)
    return a


def _poly(v, name):
    if isinstance(v, MatrixPolytope):
        return v
    if isinstance(v, (list, tuple)) and v and np.ndim(v[0]) == 2:
        return MatrixPolytope(list(v))
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 2:
        return MatrixPolytope([arr])
    if arr.ndim == 3:
        return MatrixPolytope(list(arr))
    raise InvalidDimension(f"{name} must be a matrix or a list of matrices")


@dataclass(frozen=True)
class LpvProblem:
    """Complete design input.

    ``A``, ``B`` and ``Bp`` are matrix polytopes with a common vertex count
    (plain matrices are lifted to single-vertex polytopes and, when other
    terms have more vertices, repeated). ``X``, ``U``, ``Udelta``, ``P`` and
    ``N`` are constraint matrices of unit-bound polyhedra. ``Udelta`` may be
    ``None`` when the input rate is unconstrained.
    """

    A: MatrixPolytope
    B: MatrixPolytope
    Bp: MatrixPolytope
    C: np.ndarray
    Deta: np.ndarray
    X: np.ndarray
    U: np.ndarray
    Udelta: np.ndarray | None
    P: np.ndarray
    N: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        polys = {k: _poly(getattr(self, k), k) for k in ("A", "B", "Bp")}
        n_v = max(p.n_v for p in polys.values())
        for k, p in polys.items():
            if p.n_v == 1 and n_v > 1:
                p = MatrixPolytope.constant(p[0], n_v)
            object.__setattr__(self, k, p)
        for k in ("C", "Deta", "X", "U", "P", "N"):
            object.__setattr__(self, k, _mat(getattr(self, k), k))
        if self.Udelta is not None:
            object.__setattr__(self, "Udelta", _mat(self.Udelta, "Udelta"))

    @property
    def n_v(self):
        return self.A.n_v

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_p(self):
        return self.Bp.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    @property
    def n_eta(self):
        return self.Deta.shape[1]

    @property
    def n_xi(self):
        return self.n_x + self.n_u

    @property
    def n_d(self):
        return self.n_p + 2 * self.n_eta

    @property
    def rate_constrained(self):
        return self.Udelta is not None

    def sets(self):
        """The constraint and disturbance sets as HPolyhedra (by name)."""
        out = {"X": self.X, "U": self.U, "P": self.P, "N": self.N}
        if self.Udelta is not None:
            out["Udelta"] = self.Udelta
        return {k: HPolyhedron(v) for k, v in out.items()}


@dataclass
class ValidationReport:
    valid: bool
    n_v: int
    issues: list = field(default_factory=list)

    def codes(self):
        return [code for code, _ in self.issues]


def validate(problem):
    """Check dimensions, zero rows and boundedness of every set.

    Never raises; failures are listed in the returned report as
    ``(code, message)`` pairs.
    """
    issues = []
    try:
        n_v = problem.n_v
    except Exception as exc:  # malformed object
        return ValidationReport(False, 0, [("Malformed", str(exc))])

    for k in ("A", "B", "Bp"):
        poly = getattr(problem, k)
        if poly.n_v != n_v:
            issues.append(("VertexCount", f"{k} has {poly.n_v} vertices, expected {n_v}"))
    n_x = problem.n_x
    if problem.A.shape != (n_x, n_x):
        issues.append(("Dimension", f"A vertices must be square, got {problem.A.shape}"))
    if problem.B.shape[0] != n_x:
        issues.append(("Dimension", f"B has {problem.B.shape[0]} rows, expected {n_x}"))
    if problem.n_u < 1:
        issues.append(("Dimension", "the plant needs at least one input"))
    if problem.Bp.shape[0] != n_x:
        issues.append(("Dimension", f"Bp has {problem.Bp.shape[0]} rows, expected {n_x}"))
    if problem.C.shape[1] != n_x:
        issues.append(("Dimension", f"C has {problem.C.shape[1]} columns, expected {n_x}"))
    if problem.Deta.shape[0] != problem.n_y:
        issues.append(("Dimension", f"Deta has {problem.Deta.shape[0]} rows, expected {problem.n_y}"))
    expected_cols = {"X": n_x, "U": problem.n_u, "P": problem.n_p, "N": problem.n_eta}
    if problem.Udelta is not None:
        expected_cols["Udelta"] = problem.n_u
    for k, ncol in expected_cols.items():
        M = getattr(problem, k)
        if M.shape[1] != ncol:
            issues.append(("Dimension", f"{k} has {M.shape[1]} columns, expected {ncol}"))
            continue
        norms = np.linalg.norm(M, axis=1)
        if np.any(norms < ROW_NORM_TOL):
            issues.append(("ZeroRow", f"{k} has zero rows {np.flatnonzero(norms < ROW_NORM_TOL).tolist()}"))
            continue
        if M.shape[1] and not HPolyhedron(M).is_bounded():
            issues.append(("Unbounded", f"set {k} is unbounded"))
    return ValidationReport(not issues, n_v, issues)


@dataclass(frozen=True)
class AugmentedSystem:
    """Augmented plant in ``xi = (x, u)`` with the increment as input."""

    problem: LpvProblem
    Aaug: MatrixPolytope
    Baug: np.ndarray
    Bpaug: MatrixPolytope
    Caug: np.ndarray
    Detaaug: np.ndarray
    Xi: HPolyhedron
    Dbig: HPolyhedron
    Udelta: HPolyhedron | None

    @property
    def n_v(self):
        return self.problem.n_v

    @property
    def n_xi(self):
        return self.problem.n_xi

    @property
    def n_d(self):
        return self.problem.n_d

    @property
    def l_xi(self):
        return self.Xi.n_rows

    @property
    def l_d(self):
        return self.Dbig.n_rows


def augment(problem):
    """Build the augmented system; raises :class:`InvalidProblem` on bad input."""
    report = validate(problem)
    if not report.valid:
        raise InvalidProblem("; ".join(msg for _, msg in report.issues))
    n_x, n_u, n_y = problem.n_x, problem.n_u, problem.n_y
    Aaug = MatrixPolytope([
        np.block([[A, B], [np.zeros((n_u, n_x)), np.eye(n_u)]])
        for A, B in zip(problem.A.vertices, problem.B.vertices)
    ])
    Baug = np.vstack([np.zeros((n_x, n_u)), np.eye(n_u)])
    Bpaug = MatrixPolytope([
        np.vstack([Bp, np.zeros((n_u, problem.n_p))]) for Bp in problem.Bp.vertices
    ])
    Caug = block_diag(problem.C, np.eye(n_u), problem.C)
    Detaaug = np.vstack([problem.Deta, np.zeros((n_u + n_y, problem.n_eta))])
    Xi = HPolyhedron(block_diag(problem.X, problem.U))
    Dbig = HPolyhedron(block_diag(problem.P, problem.N, problem.N))
    Ud = HPolyhedron(problem.Udelta) if problem.Udelta is not None else None
    return AugmentedSystem(problem, Aaug, Baug, Bpaug, Caug, Detaaug, Xi, Dbig, Ud)
