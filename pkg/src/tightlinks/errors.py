"""Exception hierarchy shared by all modules."""


class TightLinkError(Exception):
    """Base class for every failure raised by this package."""


class DomainError(TightLinkError, ValueError):
    """An argument lies outside the domain of a formula."""


class QuadratureError(TightLinkError):
    """Adaptive quadrature failed.

    Attributes
    ----------
    estimate : float
        Best value available when the failure occurred (NaN if none).
    error : float
        Error estimate attached to ``estimate``.
    point : float or None
        Abscissa at which the integrand returned a non-finite value, if that
        is the cause of the failure.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf"), point=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.point = point


class RootFindingError(TightLinkError):
    """Bracketing root finder could not start or did not converge."""


class NewtonError(TightLinkError):
    """Newton iteration failed; carries the last iterate and its residual."""

    def __init__(self, message, x=None, residual=None):
        super().__init__(message)
        self.x = x
        self.residual = residual


class ConstraintViolation(TightLinkError):
    """A link violates one of its own constraints (thickness, walls, endpoints)."""
