"""Training engine: trainers, checkpoints, and the metrics logger."""

from uwtranslate.engine.checkpoint import (
    LoadedTranslator,
    TrainerState,
    config_hash,
    load_checkpoint,
    load_translator,
    read_descriptor,
    save_checkpoint,
)
from uwtranslate.engine.metrics_logger import MetricRecord, MetricsLogger
from uwtranslate.engine.trainers import (
    TRAINERS,
    AutoencoderTrainer,
    CUTTrainer,
    CycleGANTrainer,
    Pix2PixTrainer,
    Trainer,
    make_trainer,
    seed_everything,
    train_autoencoder,
    train_cut,
    train_cyclegan,
    train_pix2pix,
)

__all__ = [
    "AutoencoderTrainer",
    "CUTTrainer",
    "CycleGANTrainer",
    "LoadedTranslator",
    "MetricRecord",
    "MetricsLogger",
    "Pix2PixTrainer",
    "TRAINERS",
    "Trainer",
    "TrainerState",
    "config_hash",
    "load_checkpoint",
    "load_translator",
    "make_trainer",
    "read_descriptor",
    "save_checkpoint",
    "seed_everything",
    "train_autoencoder",
    "train_cut",
    "train_cyclegan",
    "train_pix2pix",
]
