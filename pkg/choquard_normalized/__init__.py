# Local
from .exceptions import (
    ChoquardError,
    DegenerateField,
    EnergyOverflow,
    InvalidArgument,
    InvalidState,
    MonotonicityViolation,
    NoMatchingPoint,
    ProjectionFailed,
    ResolutionError,
    ScanOverflow,
    UsageError,
)

__version__ = "0.3.0"

__all__ = (
    "ChoquardError",
    "DegenerateField",
    "EnergyOverflow",
    "InvalidArgument",
    "InvalidState",
    "MonotonicityViolation",
    "NoMatchingPoint",
    "ProjectionFailed",
    "ResolutionError",
    "ScanOverflow",
    "UsageError",
)
