"""Seeded mini-batch training loop, evaluation and metrics history."""

import csv
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from . import model as M
from .data import random_zoom
from .exceptions import ConfigError, InputError, ShapeError
from .metrics import ConfusionMatrix, EpochRecord, check_threshold, classify, confusion, mean_bce
from .optim import OPTIMIZERS, HyperParams, init_state, step

log = logging.getLogger(__name__)

FIRST_ACTIVATIONS = ("relu", "leaky_relu")
HISTORY_HEADER = ("epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy")

# Stream tags mixed into the seed so model init, shuffling and augmentation
# never share random draws.
_INIT_STREAM = 0
_EPOCH_STREAM = 1


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    first_layer_activation: str = "relu"
    leaky_slope: float = M.DEFAULT_LEAKY_SLOPE
    zoom_range: float = 0.0
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    hyper: HyperParams = field(default_factory=HyperParams)
    threshold: float = 0.5
    architecture: str = "default"  # or "reduced"

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.first_layer_activation not in FIRST_ACTIVATIONS:
            raise ConfigError(
                f"first_layer_activation must be one of {FIRST_ACTIVATIONS}, "
                f"got {self.first_layer_activation!r}"
            )
        if not 0.0 <= self.zoom_range < 1.0:
            raise ConfigError(f"zoom_range must lie in [0, 1), got {self.zoom_range}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.architecture not in ("default", "reduced"):
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        check_threshold(self.threshold)
        if self.first_layer_activation == "leaky_relu":
            M.activation("leaky_relu", self.leaky_slope)

    def layer_specs(self):
        build = M.default_architecture if self.architecture == "default" else M.reduced_architecture
        return build(self.first_layer_activation, self.leaky_slope)

    def to_dict(self):
        d = asdict(self)
        d["hyper"] = asdict(self.hyper)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hyper"] = HyperParams(**d.get("hyper", {}))
        return cls(**d)


@dataclass
class TrainingHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    @property
    def final(self):
        return self.records[-1]

    def to_csv(self):
        lines = [",".join(HISTORY_HEADER)]
        for r in self.records:
            vals = [r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy]
            lines.append(",".join([str(r.epoch)] + ["" if math.isnan(v) else repr(float(v)) for v in vals]))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path):
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != HISTORY_HEADER:
                raise InputError(f"{path}: unexpected header {reader.fieldnames}")
            records = [
                EpochRecord(
                    epoch=int(row["epoch"]),
                    **{k: float(row[k]) if row[k] else math.nan for k in HISTORY_HEADER[1:]},
                )
                for row in reader
            ]
        return cls(records)


class Evaluation(NamedTuple):
    loss: float
    accuracy: float
    confusion: ConfusionMatrix


def evaluate(model, dataset, threshold=0.5):
    """Mean BCE, accuracy and confusion matrix; never touches the parameters."""
    if len(dataset) == 0:
        raise InputError("cannot evaluate on an empty dataset")
    return evaluate_arrays(model, dataset.images, dataset.labels, threshold)


def evaluate_arrays(model, X, y, threshold=0.5):
    probs = M.predict_proba(model, X)
    cm = confusion(classify(probs, threshold), y)
    return Evaluation(mean_bce(probs, y), cm.accuracy(), cm)


def _validate_inputs(config, model, train_set, val_set):
    if len(train_set) == 0:
        raise InputError("training set is empty")
    for name, ds in (("train", train_set), ("validation", val_set)):
        for s in ds:
            if s.image.shape != model.input_shape:
                raise ShapeError(f"{name} sample {s.source_id}: shape {s.image.shape}, "
                                 f"model expects {model.input_shape}")
            if s.label not in (0, 1):
                raise InputError(f"{name} sample {s.source_id}: label {s.label!r} is not 0/1")


def _augment(batch, zoom_range, rng):
    return np.stack([random_zoom(img, zoom_range, rng) for img in batch])


def train(config, train_set, val_set=None, callback=None):
    """Train a fresh model; returns ``(model, history)``.

    ``callback(record)`` is invoked after each epoch when given.
    """
    from .data import Dataset

    val_set = val_set if val_set is not None else Dataset([])
    input_shape = train_set[0].image.shape if len(train_set) else M.INPUT_SHAPE
    model = M.build_model(config.layer_specs(), input_shape,
                          rng=np.random.default_rng([config.seed, _INIT_STREAM]))
    _validate_inputs(config, model, train_set, val_set)

    X, y = train_set.images, train_set.labels.astype(np.float64)
    Xv, yv = val_set.images, val_set.labels
    state = init_state(config.optimizer, model.params, config.hyper)
    n = len(X)
    history = TrainingHistory()
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, _EPOCH_STREAM, epoch])
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = X[idx]
            if config.zoom_range > 0:
                xb = _augment(xb, config.zoom_range, rng)
            probs, cache = M.forward(model, xb)
            # d(mean BCE)/d(logit) = (p - y) / batch
            grads = M.backward_logits(model, cache, (probs - y[idx]) / len(idx))
            model.params, state = step(model.params, grads, state)
        tr = evaluate_arrays(model, X, y.astype(np.int64), config.threshold)
        if len(Xv):
            va = evaluate_arrays(model, Xv, yv, config.threshold)
            record = EpochRecord(epoch, tr.loss, tr.accuracy, va.loss, va.accuracy)
        else:
            record = EpochRecord(epoch, tr.loss, tr.accuracy)
        history.records.append(record)
        log.info("epoch %d/%d train_loss=%.6g train_acc=%.4f val_loss=%.6g val_acc=%.4f",
                 epoch, config.epochs, record.train_loss, record.train_accuracy,
                 record.val_loss, record.val_accuracy)
        if callback is not None:
            callback(record)
    return model, history
