"""Exception hierarchy shared by every module of the package."""


class ConfcovError(Exception):
    """Base class for all package errors."""


class ValidationError(ConfcovError, ValueError):
    """Input data violates a documented precondition."""


class GridMismatchError(ValidationError):
    """Two fields live on different grids."""


class VarianceError(ValidationError):
    """A tensor was supplied with the wrong index placement."""


class NonPositiveError(ValidationError):
    """A quantity required to be strictly positive is not.

    ``index`` holds the multi-index of the worst grid point.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalError(ConfcovError, ArithmeticError):
    """A numerical procedure failed (non-convergence, stagnation, ...)."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


ConvergenceError = NumericalError
