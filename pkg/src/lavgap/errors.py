"""Exception hierarchy for lavgap."""


class LavgapError(Exception):
    """Base class for all library errors."""


class DomainError(LavgapError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class PreconditionError(LavgapError, ValueError):
    """A documented precondition of an operation does not hold."""


class DegenerateProbeError(LavgapError, ValueError):
    """A finite-difference probe has no admissible side."""


class InfeasiblePlanError(LavgapError):
    """The slow-down set is too small to compensate the fast set.

    ``deficit`` is the missing measure.
    """

    def __init__(self, message, deficit=0.0):
        super().__init__(message)
        self.deficit = deficit


class StructureError(LavgapError):
    """The Lagrangian violates a structure assumption needed by the construction."""


class ConstructionError(LavgapError):
    """A time change could not be built as a strictly increasing map."""


class ConfigError(LavgapError, ValueError):
    """Invalid run configuration; ``path`` points at the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class UnknownExampleError(LavgapError, KeyError):
    """No registered problem has the requested name."""
