"""Shared exception types so callers can tell failure modes apart."""


class TelesimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TelesimError, ValueError):
    """Invalid or inconsistent experiment configuration."""


class DomainError(TelesimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class TruncationError(TelesimError, ValueError):
    """Photon-number cutoff too small for the requested state."""


class NullConditionError(TelesimError, ValueError):
    """Conditioning on a zero-probability detection pattern."""


class InsufficientStatisticsError(TelesimError, ValueError):
    """Not enough counts to form the requested estimate."""


class CalibrationError(TelesimError, RuntimeError):
    """Offset calibration failed (peak not found or not significant)."""


class FitError(TelesimError, RuntimeError):
    """Curve fit failed to converge or produced unphysical values."""


class MethodInapplicableError(TelesimError, ValueError):
    """Estimator preconditions violated for the supplied data."""


class AnalysisError(TelesimError, RuntimeError):
    """Generic failure in the analysis layer (bad logs, empty windows)."""
