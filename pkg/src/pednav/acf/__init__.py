"""Boosted channel-feature proposal detector."""

from .detect import Proposal, detect, nms
from .model import TreeEnsemble
from .train import BoostConfig, apply_trees, crop_features, train_acf

__all__ = [
    "BoostConfig",
    "Proposal",
    "TreeEnsemble",
    "apply_trees",
    "crop_features",
    "detect",
    "nms",
    "train_acf",
]
