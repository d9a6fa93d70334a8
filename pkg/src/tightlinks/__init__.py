"""Construction and balance verification of tight (thickness-critical) links."""

from .errors import (ConstraintViolation, DomainError, NewtonError, QuadratureError,
                     RootFindingError, TightLinkError)
from .geometry import EndpointConstraint, HalfSpaceObstacle, PolyCurve, PolyLink

__version__ = "0.1.0"

__all__ = [
    "TightLinkError",
    "DomainError",
    "QuadratureError",
    "RootFindingError",
    "NewtonError",
    "ConstraintViolation",
    "PolyCurve",
    "PolyLink",
    "EndpointConstraint",
    "HalfSpaceObstacle",
]
