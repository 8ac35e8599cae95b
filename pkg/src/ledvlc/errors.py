"""Exception hierarchy for the link simulator and receiver."""


class LedvlcError(Exception):
    """Base class for all package errors."""


class GeometryError(LedvlcError, ValueError):
    """Invalid optical or link geometry (non-positive distance, pitch, ...)."""


class FocusError(GeometryError):
    """Focusing distance does not exceed the focal length."""


class DistortionError(LedvlcError, ValueError):
    """Radial distortion map is degenerate (not invertible) at the query radius."""


class PatternError(LedvlcError, ValueError):
    """Invalid pilot or symbol pattern (divisibility, shape, values)."""


class ConstraintInfeasibleError(LedvlcError, RuntimeError):
    """Pattern generation exhausted its attempt budget under the overlap bound."""


class FitError(LedvlcError, RuntimeError):
    """Distortion least-squares system is rank deficient or under-determined."""


class AmbiguousCornerError(LedvlcError, RuntimeError):
    """A farthest pilot point lies exactly on a quadrant boundary."""


class CalibrationError(LedvlcError, RuntimeError):
    """Pilot-phase failure; carries the name of the stage that failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class MetricError(LedvlcError, ValueError):
    """Undefined metric (size mismatch, BER with an all-zero reference)."""


class PgmError(LedvlcError, ValueError):
    """Malformed PGM stream."""


class ConfigError(LedvlcError, ValueError):
    """Invalid configuration file or field."""
