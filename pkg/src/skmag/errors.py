"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A parameter violates an operation's precondition."""


class RefinementRequired(RuntimeError):
    """A quadrature or time grid is too coarse for the requested accuracy."""


class InstabilityError(RuntimeError):
    """A simulated trajectory blew up (NaN or norm beyond the guard)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class PreconditionViolation(ValueError):
    """A hypothesis required by the requested computation does not hold."""


class UndefinedFit(ValueError):
    """A rate fit was requested on data it cannot be computed from."""
