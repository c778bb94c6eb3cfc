"""Exception types raised across the package."""


class RpiSynthError(Exception):
    """Base class for all package errors."""


class InvalidDimension(RpiSynthError, ValueError):
    pass


class InvalidProblem(RpiSynthError, ValueError):
    pass


class InvalidConfig(RpiSynthError, ValueError):
    pass


class UnboundedSet(RpiSynthError, ValueError):
    pass


class UnsupportedDimension(RpiSynthError, ValueError):
    pass


class SolverError(RpiSynthError, RuntimeError):
    pass


class NumericalFailure(SolverError):
    """Pivot budget exhausted or basis became singular."""


class NoFeasibleStart(RpiSynthError, RuntimeError):
    """No multistart run reached a feasible design.

    ``profile`` holds the best residual profile seen, for diagnostics.
    """

    def __init__(self, message, profile=None):
        super().__init__(message)
        self.profile = profile


class RankDeficientL(RpiSynthError, ValueError):
    pass


class ZeroRho(RpiSynthError, ValueError):
    pass


class SamplingFailure(RpiSynthError, RuntimeError):
    pass
