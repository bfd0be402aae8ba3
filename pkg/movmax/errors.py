"""
Exception hierarchy.

Every error raised on purpose by movmax derives from MovmaxError. The
builtin bases (ValueError, RuntimeError) are kept so callers catching the
usual types keep working.
"""

from typing import Optional, Sequence


class MovmaxError(Exception):
    """Base class for all movmax errors."""


class ConfigError(MovmaxError, ValueError):
    """
    Invalid configuration file or command-line value.

    Attributes:
        line: Source line of the offending key, when known
    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(MovmaxError, ValueError):
    """Argument outside the domain of an operation."""


class ParameterDomainError(DomainError):
    """Model parameter outside its admissible range."""


class UnsupportedModelError(DomainError):
    """Operation not defined for the given model family."""


class DegenerateError(DomainError):
    """Zero displacement where a nondegenerate pair is required."""


class AtomLocationError(DomainError):
    """Spectral density requested at (or too close to) an atom."""


class DataError(MovmaxError, ValueError):
    """Observations or site design unusable for the requested estimate."""


class DesignDeficiencyError(DataError):
    """Site design does not identify the requested parameters."""


class EstimationFailureError(DataError):
    """Every site pair was flagged independent."""


class InfeasibleEstimateError(DataError):
    """
    Least-squares solution outside the model family.

    Attributes:
        a_hat: The offending coefficient vector
    """

    def __init__(self, message: str, a_hat: Sequence[float]):
        super().__init__(message)
        self.a_hat = tuple(float(a) for a in a_hat)


class NumericalError(MovmaxError, RuntimeError):
    """Numerical procedure failed to reach its target."""


class QuadratureAccuracyError(NumericalError):
    """
    Quadrature did not converge to the requested accuracy.

    Attributes:
        estimate: Achieved integral estimate
        abserr: Achieved absolute error estimate
    """

    def __init__(self, message: str, estimate: float, abserr: float):
        super().__init__(f"{message} (estimate {estimate!r}, error {abserr:.3g})")
        self.estimate = estimate
        self.abserr = abserr


class SimulationBudgetError(NumericalError):
    """Point budget exhausted before the exact stopping rule fired."""
