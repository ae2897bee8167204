"""Exception hierarchy shared by all modules."""


class AquaError(Exception):
    """Base class for every error raised by this package."""


class InvalidSizeError(AquaError, ValueError):
    pass


class InvalidSpecError(AquaError, ValueError):
    pass


class InvalidVertexError(AquaError, ValueError):
    pass


class InvalidMoveError(AquaError, ValueError):
    pass


class InvalidRegionError(AquaError, ValueError):
    pass


class InvalidPreconditionError(AquaError, ValueError):
    pass


class UnsupportedStructureError(AquaError, ValueError):
    """Raised when an operation is only defined for paths or trees."""


class NonConvergenceError(AquaError, RuntimeError):
    pass


class StageConvergenceError(NonConvergenceError):
    pass


class BudgetExceededError(AquaError, RuntimeError):
    pass


class ContractViolation(AquaError, AssertionError):
    """A numeric contract (duality identity, leakage bound) failed at runtime."""
