"""Exception types shared by every module."""


class HopfLaxError(Exception):
    """Base class for solver errors."""


class DomainError(HopfLaxError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class NonConvergence(HopfLaxError, RuntimeError):
    """An iterative method stopped before meeting its tolerance.

    ``best`` carries whatever partial answer was available (argmin, value,
    last residual, ...) so callers can report it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NonFinite(HopfLaxError, ArithmeticError):
    """A callback produced NaN or infinity."""
