"""Conditional flow-matching prior: network, training and checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .net import FourierEmbed, VelocityNet, fourier_time_embed
from .train import (
    AdamState,
    PairDataset,
    PlateauScheduler,
    TrainConfig,
    TrainingBatch,
    adamw_step,
    make_training_batch,
    normalization_stats,
    train,
)

__all__ = [
    "FourierEmbed",
    "VelocityNet",
    "fourier_time_embed",
    "PairDataset",
    "TrainConfig",
    "TrainingBatch",
    "AdamState",
    "PlateauScheduler",
    "adamw_step",
    "make_training_batch",
    "normalization_stats",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]
