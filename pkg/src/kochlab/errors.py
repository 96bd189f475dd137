"""Exception hierarchy shared by the lab modules."""


class KochLabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(KochLabError, ValueError):
    """An argument is outside the admissible parameter domain."""


class PrecisionError(KochLabError):
    """The available numeric precision cannot certify the requested result."""


class DepthError(KochLabError):
    """A continued-fraction table is too shallow for the request."""


class PositivityError(DomainError):
    """A roof would take non-positive values."""


class SingularityError(KochLabError):
    """A point lands on (or within the guard radius of) a singularity."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class BisectionError(KochLabError):
    """A monotone derivative failed to change sign on a partition interval."""


class GeometryError(DomainError):
    """Bump supports cannot be placed as required."""


class RankError(KochLabError):
    """A linear constraint system is infeasible at the requested size."""


class ConstructionError(KochLabError):
    """A randomized construction produced no admissible point."""


class WindowError(DomainError):
    """An empty time window was requested."""


class LevelError(DomainError):
    """A continued-fraction level is too small for the requested set."""


class ConfigError(KochLabError):
    """Experiment configuration failed validation."""


class BudgetError(KochLabError):
    """A suite exceeded its runtime budget."""


class MalformedInputError(KochLabError):
    """A report or CSV passed to the plotter cannot be interpreted."""
