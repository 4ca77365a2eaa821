"""Exception types shared across the package."""


class DPDError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(DPDError, ValueError):
    """Invalid tuning parameter, boundary, scenario, or option."""


class DimensionError(DPDError, ValueError):
    """Empty or incompatibly shaped array input."""


class DegenerateDataError(DPDError, ValueError):
    """Data carries no usable variation (constant sample, all-zero window)."""


class SingularInformationError(DPDError, RuntimeError):
    """Information matrix estimate is numerically singular; the fit is degenerate."""


class OptimizationError(DPDError, RuntimeError):
    """Fit failed to converge after all restarts.

    The best iterate found is attached as ``best`` so callers can inspect it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UndefinedRatioError(DPDError, ArithmeticError):
    """Delay-ratio denominator is zero or undefined (no usable replications)."""
