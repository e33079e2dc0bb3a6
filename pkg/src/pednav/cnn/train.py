"""Minibatch SGD with momentum for the refinement network."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .layers import cross_entropy, softmax_backward

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 100
    lr: float = 0.001
    momentum: float = 0.9
    seed: int = 0


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)

    @property
    def final(self):
        return self.epochs[-1]


def evaluate(model, x, y, batch_size=200):
    """Mean loss and accuracy without touching layer caches."""
    losses = []
    correct = 0
    for i in range(0, len(x), batch_size):
        probs = model.forward(x[i : i + batch_size], train=False)
        yb = y[i : i + batch_size]
        losses.append(cross_entropy(probs, yb) * len(yb))
        correct += int((probs.argmax(axis=1) == yb).sum())
    return sum(losses) / len(x), correct / len(x)


def fit(model, x_train, y_train, x_val=None, y_val=None, cfg=None):
    """Train in place; returns a TrainLog with one entry per epoch.

    Raises RuntimeError when the loss turns non-finite (diverged run)
    rather than silently producing a NaN model.
    """
    cfg = cfg or TrainConfig()
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(x_train) != len(y_train):
        raise ValueError("sample/label count mismatch")
    if y_train.min() < 0 or y_train.max() >= model.n_classes:
        raise ValueError(
            f"labels must lie in [0, {model.n_classes}), got "
            f"[{y_train.min()}, {y_train.max()}]"
        )
    rng = np.random.default_rng(cfg.seed)
    logbook = TrainLog()

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x_train))
        epoch_loss = 0.0
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            probs = model.forward(x_train[idx], train=True)
            loss = cross_entropy(probs, y_train[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}, batch {i // cfg.batch_size}"
                )
            epoch_loss += loss * len(idx)
            model.backward(softmax_backward(probs, y_train[idx]))
            model.sgd_step(cfg.lr, cfg.momentum)
        train_loss = epoch_loss / len(order)

        if x_val is not None and len(x_val):
            val_loss, val_acc = evaluate(model, x_val, y_val)
        else:
            val_loss, val_acc = float("nan"), float("nan")
        logbook.epochs.append(EpochStats(epoch, train_loss, val_loss, val_acc))
        log.info(
            "epoch %d: train loss %.4f, val loss %.4f, val acc %.4f",
            epoch,
            train_loss,
            val_loss,
            val_acc,
        )
    return logbook


def positive_probability(model, crops, batch_size=200):
    """P(class 1) for a batch of 64x64 crops; class 1 is the target class."""
    if len(crops) == 0:
        return np.zeros(0)
    out = []
    for i in range(0, len(crops), batch_size):
        probs = model.forward(np.asarray(crops[i : i + batch_size]), train=False)
        out.append(probs[:, 1])
    return np.concatenate(out)
