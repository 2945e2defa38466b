"""Exception types shared across the package."""


class CtlPinnError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(CtlPinnError):
    """Invalid argument combination, shape mismatch, or bad configuration."""


class NumericError(CtlPinnError):
    """Non-finite value produced where finiteness is required."""


class PlanError(CtlPinnError):
    """Window plan violates a hard constraint or, in strict mode, a recommendation."""


class SchedulingError(CtlPinnError):
    """Window arithmetic produced an empty or inconsistent interval."""


class RangeError(CtlPinnError):
    """Query outside the solvable time range."""


class GeometryError(CtlPinnError):
    """Water level does not intersect a cross-section profile as required."""


class UnsupportedProfileError(GeometryError):
    """Cross-section profile has more than one flow channel at the queried level."""


class CheckpointError(CtlPinnError):
    """Checkpoint file is missing, corrupt, or from an incompatible version."""


class MetricError(CtlPinnError):
    """Metric is undefined for the given inputs (e.g. zero reference norm)."""


class ComparisonError(CtlPinnError):
    """Experiment manifests are not comparable."""


class OracleError(CtlPinnError):
    """Reference solver failed (instability, non-convergence)."""
