"""Binary cross-entropy, thresholding and confusion-matrix bookkeeping."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ConsistencyError

PROB_CLAMP = 1e-12
DEFAULT_THRESHOLD = 0.5


def _clamp(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(p, y):
    """-[y ln p + (1-y) ln(1-p)] on probabilities clamped away from 0 and 1.

    Works elementwise on arrays; scalars in, float out.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    # Exact hits short-circuit so a perfect prediction scores exactly 0.
    exact = p == y
    pc = _clamp(p)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))
    loss = np.where(exact, 0.0, loss)
    return float(loss) if loss.ndim == 0 else loss


def bce_grad(p, y):
    """d(bce_loss)/dp, i.e. (p - y) / (p (1 - p)) on the clamped p."""
    pc = _clamp(np.asarray(p, dtype=np.float64))
    g = (pc - y) / (pc * (1.0 - pc))
    return float(g) if g.ndim == 0 else g


def mean_bce(p, y):
    return float(np.mean(bce_loss(np.asarray(p), np.asarray(y))))


def check_threshold(threshold):
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")


def classify(p, threshold=DEFAULT_THRESHOLD):
    """1 when ``p >= threshold`` (ties go to the positive class), else 0."""
    check_threshold(threshold)
    p = np.asarray(p)
    labels = (p >= threshold).astype(np.int64)
    return int(labels) if labels.ndim == 0 else labels


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts for a binary classifier; label 1 is the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def accuracy(self):
        if self.total == 0:
            return 0.0
        return (self.tp + self.tn) / self.total

    def to_csv(self):
        return f"tp,fp,tn,fn\n{self.tp},{self.fp},{self.tn},{self.fn}\n"

    def format_table(self):
        rows = [
            ("", "pred 1", "pred 0"),
            ("actual 1", str(self.tp), str(self.fn)),
            ("actual 0", str(self.fp), str(self.tn)),
        ]
        width = max(len(cell) for row in rows for cell in row)
        return "\n".join("  ".join(cell.rjust(width) for cell in row) for row in rows)


def confusion(predictions, labels):
    predictions = np.asarray(predictions).astype(np.int64).ravel()
    labels = np.asarray(labels).astype(np.int64).ravel()
    if predictions.shape != labels.shape:
        raise ConsistencyError(
            f"{predictions.size} predictions but {labels.size} labels"
        )
    if predictions.size == 0:
        raise ConsistencyError("cannot build a confusion matrix from zero samples")
    for name, arr in (("predictions", predictions), ("labels", labels)):
        if np.any((arr != 0) & (arr != 1)):
            raise ConsistencyError(f"{name} must be 0/1")
    pos, neg = labels == 1, labels == 0
    return ConfusionMatrix(
        tp=int(np.sum(pos & (predictions == 1))),
        fp=int(np.sum(neg & (predictions == 1))),
        tn=int(np.sum(neg & (predictions == 0))),
        fn=int(np.sum(pos & (predictions == 0))),
    )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float = math.nan
    val_accuracy: float = math.nan

    def __post_init__(self):
        if self.epoch < 1:
            raise ConfigError(f"epoch index must be >= 1, got {self.epoch}")
        if not math.isfinite(self.train_loss):
            raise ConsistencyError(f"non-finite training loss at epoch {self.epoch}")

    @property
    def has_validation(self):
        return not math.isnan(self.val_loss)
