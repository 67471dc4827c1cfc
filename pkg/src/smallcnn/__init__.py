"""Small-data binary image classification with a from-scratch CNN."""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, Sample, SplitSpec, generate_synthetic, load_manifest, split
from .estimator import CNNClassifier, ImageResizer, RandomZoom
from .metrics import ConfusionMatrix, bce_grad, bce_loss, classify, confusion
from .model import Model, build_model, default_architecture, model_backward, model_forward
from .optim import HyperParams, OptimizerState, adam_step, init_state, rmsprop_step
from .training import TrainConfig, TrainingHistory, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "CNNClassifier", "ImageResizer", "RandomZoom",
    "ConfusionMatrix", "Dataset", "HyperParams", "Model", "OptimizerState", "Sample",
    "SplitSpec", "TrainConfig", "TrainingHistory",
    "adam_step", "bce_grad", "bce_loss", "build_model", "classify", "confusion",
    "default_architecture", "evaluate", "generate_synthetic", "init_state",
    "load_checkpoint", "load_manifest", "model_backward", "model_forward",
    "rmsprop_step", "save_checkpoint", "split", "train",
]
