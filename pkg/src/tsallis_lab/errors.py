"""Exception types shared across the lab."""


class TsallisLabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TsallisLabError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionMismatchError(TsallisLabError, ValueError):
    """Two operands live on spaces of different dimension."""


class CertificationError(TsallisLabError, RuntimeError):
    """A polynomial could not be certified below the degree cap.

    ``achieved_error`` carries the best grid error reached before giving up.
    """

    def __init__(self, message, achieved_error=float("nan"), degree=0):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.degree = degree


class ConstructionError(TsallisLabError, RuntimeError):
    """A circuit-level construction failed its own residual check."""
