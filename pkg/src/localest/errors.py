"""Exception types raised by the localest package.

Every defensive check in the package raises one of these instead of a bare
ValueError so callers (and the CLI) can distinguish configuration mistakes
from genuine numerical failures.
"""


class LocalestError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LocalestError):
    """Malformed or inconsistent configuration input."""


class DomainTooSmall(LocalestError):
    """Probe radius too large for the unit interval."""


class ProbeOutsideDomain(LocalestError):
    """Probe support is not contained in the spatial domain."""


class NonConvergence(LocalestError):
    """Adaptive quadrature failed to reach tolerance within the panel cap."""


class MomentConditionViolated(LocalestError):
    """Kernel moments required to vanish are non-zero."""


class NonPositiveDiffusivity(LocalestError):
    """Diffusivity evaluated non-positive on the grid."""


class ZeroPivot(LocalestError):
    """Tridiagonal elimination hit a vanishing pivot."""


class TruncationInsufficient(LocalestError):
    """Spectral tail bound exceeds the requested tolerance at the mode cap."""


class DegenerateInformation(LocalestError):
    """Observed information is too small to divide by."""


class AnalyticUnavailable(LocalestError):
    """Kernel has no compactly supported second antiderivative."""


class ZeroModeDivergence(LocalestError):
    """Fourier transform does not vanish at the origin where required."""


class InternalInconsistency(LocalestError):
    """Two independent computations of the same quantity disagree."""


class RouteDisagreement(LocalestError):
    """Two quadrature routes for the same constant disagree."""


class DegeneratePsi(LocalestError):
    """Quadratic functional evaluated to a non-positive value."""


class OrderingViolated(LocalestError):
    """Variance ordering between estimators failed numerically."""


class InvalidLevel(LocalestError):
    """Confidence level outside the admissible range."""


class UnknownPreset(LocalestError):
    """Coefficient preset name not recognised."""


class SchemaMismatch(LocalestError):
    """CSV data does not match the documented schema."""
