"""Trainable refinement network (pure numpy, float64)."""

from .model import CnnModel, transfer_init
from .train import TrainConfig, TrainLog, evaluate, fit, positive_probability

__all__ = [
    "CnnModel",
    "TrainConfig",
    "TrainLog",
    "evaluate",
    "fit",
    "positive_probability",
    "transfer_init",
]
