"""Exception hierarchy shared across the measurement pipeline."""


class DrillScanError(Exception):
    """Base class for all measurement-pipeline errors."""


class ConfigurationError(DrillScanError):
    """A parameter violates a precondition (bad bounds, zero counts, ...)."""


class DegenerateInputError(DrillScanError):
    """Input geometry is degenerate (duplicate markers, zero-extent cloud, ...)."""


class DataDeficiencyError(DrillScanError):
    """Not enough usable points in a required region (e.g. an angular window)."""


class InsufficientDataError(DrillScanError):
    """Fewer samples than an operation mathematically requires."""


class ProfileRangeError(DrillScanError):
    """Evaluation or overlap requested outside a profile's x range."""


class NumericFailureError(DrillScanError):
    """A numeric routine produced NaN/inf and cannot continue."""


class SimulationError(DrillScanError):
    """Synthetic scan generation failed (part left the sensor volume, ...)."""
