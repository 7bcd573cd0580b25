"""Training objectives."""

from uwtranslate.objectives.losses import (
    LossValue,
    combined_cut_loss,
    cycle_consistency_loss,
    gan_loss,
    info_nce,
    mse_loss,
    negative_index,
    patch_nce,
)

__all__ = [
    "LossValue",
    "combined_cut_loss",
    "cycle_consistency_loss",
    "gan_loss",
    "info_nce",
    "mse_loss",
    "negative_index",
    "patch_nce",
]
