"""Exception types shared by the surftrap modules."""


class SurftrapError(Exception):
    """Base class for all library errors."""


class DomainError(SurftrapError, ValueError):
    """An argument lies outside the domain of the requested function."""


class SingularityError(DomainError):
    """Evaluation requested exactly at a singular point."""


class SeriesError(SurftrapError, ArithmeticError):
    """An infinite series did not reach its tolerance within the term cap."""


class QuadratureError(SurftrapError, ArithmeticError):
    """Numerical integration failed to reach the requested tolerance.

    ``achieved`` carries the error estimate reported by the integrator.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConvergenceError(SurftrapError, ArithmeticError):
    """An iterative procedure (optimizer, root finder, d-halving) failed."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConfigurationError(SurftrapError, ValueError):
    """Inconsistent or incomplete configuration."""


class GeometryError(SurftrapError, ValueError):
    """Electrode or gap geometry is inconsistent."""


class ParseError(SurftrapError, ValueError):
    """Malformed geometry file; ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
