"""Strategic joining and social welfare in a passenger-taxi double-ended queue."""

from .model import (
    OBSERVABLE,
    PARTIAL,
    DegenerateIntensityError,
    ModelError,
    ModelParams,
    NumericalError,
    StabilityWarning,
    UnstableError,
    ValidationError,
    validate,
)

__all__ = [
    "OBSERVABLE", "PARTIAL", "DegenerateIntensityError", "ModelError", "ModelParams",
    "NumericalError", "StabilityWarning", "UnstableError", "ValidationError", "validate",
]
__version__ = "0.1.0"
