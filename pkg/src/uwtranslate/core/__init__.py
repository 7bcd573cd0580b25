"""Core value types shared by every module."""

from uwtranslate.core.types import (
    ContrastiveConfig,
    DomainTag,
    GanMode,
    ImageTensor,
    Method,
    TrainConfig,
    denormalize,
    normalize,
)

__all__ = [
    "ContrastiveConfig",
    "DomainTag",
    "GanMode",
    "ImageTensor",
    "Method",
    "TrainConfig",
    "denormalize",
    "normalize",
]
