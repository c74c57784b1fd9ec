"""Exception hierarchy shared by every module."""


class SramageError(Exception):
    """Base class for all package errors."""


class ContractViolation(SramageError, ValueError):
    """An argument broke an operation's precondition."""


class ConfigError(SramageError):
    """Configuration file or option is invalid."""


class CalibrationInfeasible(SramageError):
    """Requested calibration targets cannot be met by the generative model."""


class DegenerateInput(SramageError, ValueError):
    """Input has no variance (or too few values) for the requested statistic."""


class AmbiguousBand(SramageError):
    """One or more bands contain no strongly-biased cells."""

    def __init__(self, bands):
        self.bands = list(bands)
        super().__init__(f"bands with no strongly-biased cells: {self.bands}")


class MalformedTrace(SramageError):
    """A write trace event is out of range or out of order."""

    def __init__(self, event_index: int, reason: str):
        self.event_index = event_index
        super().__init__(f"event {event_index}: {reason}")


class EmptyProfile(SramageError):
    """A software bias profile has no written bits."""


class FormatError(SramageError):
    """An on-disk artifact does not match its documented layout."""
