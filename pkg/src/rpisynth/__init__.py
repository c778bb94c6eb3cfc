"""Design and certification of incremental output-feedback LPV controllers.

The controller is certified through two polyhedra sharing one face matrix:
an outer contractive robust positively invariant set ``{L xi <= 1}`` and an
inner ultimately bounded set ``{L xi <= rho}``.
"""

from .certification import Certificate, certify, finite_step_bound, one_step_worst_case
from .closed_loop import GainSchedule, build_grids, closed_loop_matrices
from .conditions import CandidateSolution, residuals
from .errors import (InvalidConfig, InvalidDimension, InvalidProblem, NoFeasibleStart,
                     RankDeficientL, RpiSynthError, SamplingFailure, SolverError, ZeroRho)
from .plant import LpvProblem, augment, validate
from .polyhedra import HPolyhedron, check_containment
from .polytope_algebra import BlockGrid, MatrixPolytope, Simplex, evaluate
from .simulation import ScenarioConfig, rollout
from .synthesis import SynthesisConfig, SynthesisResult, synthesize

__version__ = "0.1.0"

__all__ = [
    "BlockGrid", "CandidateSolution", "Certificate", "GainSchedule", "HPolyhedron",
    "InvalidConfig", "InvalidDimension", "InvalidProblem", "LpvProblem", "MatrixPolytope",
    "NoFeasibleStart", "RankDeficientL", "RpiSynthError", "SamplingFailure", "ScenarioConfig",
    "Simplex", "SolverError", "SynthesisConfig", "SynthesisResult", "ZeroRho", "augment",
    "build_grids", "certify", "check_containment", "closed_loop_matrices", "evaluate",
    "finite_step_bound", "one_step_worst_case", "residuals", "rollout", "synthesize", "validate",
]
