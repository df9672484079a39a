"""Exception hierarchy for the Fock space Toeplitz laboratory."""

from typing import Optional, Sequence


class FockToeplitzError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FockToeplitzError, ValueError):
    """Invalid or inconsistent experiment configuration."""


class InputError(FockToeplitzError, ValueError):
    """Invalid input data (duplicate points, bad CSV rows, ...)."""


class QuadratureError(FockToeplitzError, RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, estimate: Optional[float] = None,
                 suggested_cutoff: Optional[float] = None):
        super().__init__(message)
        self.estimate = estimate
        self.suggested_cutoff = suggested_cutoff


class PoisonedIntegrandError(QuadratureError):
    """Integrand returned NaN or infinity at a quadrature node."""


class MeasureTooThinError(FockToeplitzError, RuntimeError):
    """Disk mass stayed below 1 up to the bracket cap."""


class DegenerateMassError(FockToeplitzError, ValueError):
    """A disk carries zero mass where a ratio was requested."""


class FitFailure(FockToeplitzError, RuntimeError):
    """No feasible constant was found on the search grid."""


class DomainError(FockToeplitzError, ValueError):
    """Point outside the grid hull or the trusted truncation radius."""

    def __init__(self, message: str, points: Sequence[complex] = ()):
        super().__init__(message)
        self.points = list(points)


class DimensionMismatchError(FockToeplitzError, ValueError):
    """Matrix and basis dimensions disagree."""


class AssemblyError(FockToeplitzError, RuntimeError):
    """Assembled Toeplitz matrix failed its positivity check."""


class LatticeError(FockToeplitzError, RuntimeError):
    """Lattice construction did not cover the probe grid."""

    def __init__(self, message: str, uncovered: Sequence[complex] = ()):
        super().__init__(message)
        self.uncovered = list(uncovered)
