"""Exception types shared across the package."""


class WaistlabError(Exception):
    """Base class for all errors raised by waistlab."""


class DomainError(WaistlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(WaistlabError, ValueError):
    """Input data failed a consistency check (moments, Lipschitz, schedules, ...)."""


class NumericError(WaistlabError, ArithmeticError):
    """An iterative method did not converge.

    The last residual is kept on ``residual`` so callers can report it.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResourceError(WaistlabError):
    """The requested computation exceeds desk-scale limits."""
