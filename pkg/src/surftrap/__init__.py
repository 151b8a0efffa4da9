"""Electrostatics of planar surface-electrode ion traps with gaps and finite planes."""

from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    GeometryError,
    ParseError,
    QuadratureError,
    SeriesError,
    SingularityError,
    SurftrapError,
)

__version__ = "0.1.0"
