"""Recycled-chip detection from SRAM power-on statistics, in simulation."""

from .errors import (
    AmbiguousBand,
    CalibrationInfeasible,
    ConfigError,
    ContractViolation,
    DegenerateInput,
    EmptyProfile,
    FormatError,
    MalformedTrace,
    SramageError,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousBand",
    "CalibrationInfeasible",
    "ConfigError",
    "ContractViolation",
    "DegenerateInput",
    "EmptyProfile",
    "FormatError",
    "MalformedTrace",
    "SramageError",
    "__version__",
]
