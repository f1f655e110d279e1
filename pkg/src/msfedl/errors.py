"""Exception hierarchy shared across the package."""


class MsFedlError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(MsFedlError, ValueError):
    """An argument is outside its documented domain (wrong sign, shape, ...)."""


class InfeasibilityError(MsFedlError):
    """A scenario, allocation, or program has no feasible point."""


class DomainError(MsFedlError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class InfeasibleAccuracyError(DomainError):
    """The local accuracy target is too loose for the given condition number
    (the feasible hyper-learning-rate interval is empty)."""


class DivergenceError(MsFedlError):
    """An iterative learning run diverged."""
