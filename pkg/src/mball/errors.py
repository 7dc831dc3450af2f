"""Exception types shared across the package."""


class MballError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(MballError, ValueError):
    """An argument violates a documented precondition."""


class DimensionMismatchError(InvalidArgumentError):
    """Operands live in different ambient dimensions."""


class BoundarySingularityError(MballError, ValueError):
    """Pointwise evaluation requested exactly on a non-integrable boundary point."""


class ConditioningError(MballError, RuntimeError):
    """A Gram matrix or triangular factor is numerically singular."""

    def __init__(self, message, degree_block=None):
        super().__init__(message)
        self.degree_block = degree_block


class ConsistencyError(MballError, RuntimeError):
    """Two independent computations of the same quantity disagree."""


class ResolutionError(MballError, RuntimeError):
    """A quadrature budget-doubling check detected unresolved structure."""


class ConfigError(MballError, ValueError):
    """An experiment configuration failed to parse or validate."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
