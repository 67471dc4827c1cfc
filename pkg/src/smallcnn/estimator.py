"""scikit-learn compatible wrappers around the training engine."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_is_fitted

from . import model as M
from .data import IMAGE_SIZE, Dataset, Sample, preprocess, random_zoom
from .exceptions import InputError, ShapeError
from .metrics import classify, confusion
from .optim import HyperParams
from .training import TrainConfig, train


def check_images(X, shape=None):
    """Validate an image batch and return it as float64 ``(N, H, W, C)``.

    Accepts ``(N, H, W)`` (a channel axis is added) or ``(N, H, W, C)``.
    Pixels must lie in [0, 1].
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X[..., None]
    if X.ndim != 4:
        raise ShapeError(f"expected images shaped (N, H, W[, C]), got {X.shape}")
    if X.shape[0] == 0:
        raise InputError("no images given")
    if shape is not None and X.shape[1:] != tuple(shape):
        raise ShapeError(f"expected images of shape {tuple(shape)}, got {X.shape[1:]}")
    if not np.all(np.isfinite(X)):
        raise InputError("images contain NaN or infinity")
    if X.min() < 0.0 or X.max() > 1.0:
        raise InputError("pixel values must lie in [0, 1]")
    return X


def check_binary_labels(y, n):
    y = np.asarray(y).ravel()
    if y.shape[0] != n:
        raise InputError(f"{n} images but {y.shape[0]} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise InputError(f"labels must be 0/1, got {sorted(set(y.tolist()))}")
    return y.astype(np.int64)


def _as_dataset(X, y, prefix):
    return Dataset(Sample(img, int(lab), f"{prefix}{i}") for i, (img, lab) in enumerate(zip(X, y)))


class CNNClassifier(ClassifierMixin, BaseEstimator):
    """Binary image classifier trained with Adam or RMSProp.

    ``predict_proba`` gives the probability of the positive class;
    ``predict`` thresholds it with ties going to class 1.
    """

    def __init__(self, optimizer="adam", first_activation="relu", leaky_slope=0.01,
                 zoom_range=0.0, epochs=50, batch_size=16, learning_rate=0.001,
                 beta1=0.9, beta2=0.999, rho=0.9, epsilon=1e-8, threshold=0.5,
                 architecture="default", random_state=0):
        self.optimizer = optimizer
        self.first_activation = first_activation
        self.leaky_slope = leaky_slope
        self.zoom_range = zoom_range
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.rho = rho
        self.epsilon = epsilon
        self.threshold = threshold
        self.architecture = architecture
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            optimizer=self.optimizer,
            first_layer_activation=self.first_activation,
            leaky_slope=self.leaky_slope,
            zoom_range=self.zoom_range,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.random_state,
            hyper=HyperParams(self.learning_rate, self.beta1, self.beta2, self.rho, self.epsilon),
            threshold=self.threshold,
            architecture=self.architecture,
        )

    def fit(self, X, y, validation_data=None):
        config = self._config()
        X = check_images(X)
        y = check_binary_labels(y, X.shape[0])
        val = None
        if validation_data is not None:
            Xv = check_images(validation_data[0], X.shape[1:])
            val = _as_dataset(Xv, check_binary_labels(validation_data[1], Xv.shape[0]), "val")
        self.model_, self.history_ = train(config, _as_dataset(X, y, "train"), val)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_images(X, self.model_.input_shape)
        p = M.predict_proba(self.model_, X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return classify(self.predict_proba(X)[:, 1], self.threshold)

    def confusion_matrix(self, X, y):
        return confusion(self.predict(X), check_binary_labels(y, len(X)))

    def _more_tags(self):
        return {"binary_only": True}


class ImageResizer(TransformerMixin, BaseEstimator):
    """Stateless bilinear resize of an image batch to ``size`` (default 100x100)."""

    def __init__(self, size=IMAGE_SIZE):
        self.size = size

    def fit(self, X, y=None):
        check_images(X)
        return self

    def transform(self, X):
        X = check_images(X)
        return np.stack([preprocess(img, tuple(self.size)) for img in X])


class RandomZoom(TransformerMixin, BaseEstimator):
    """Random centre zoom augmentation with factor in [1 - zoom_range, 1 + zoom_range].

    Each ``transform`` call draws from a generator seeded once at ``fit``,
    so successive calls produce fresh but reproducible augmentations.
    """

    def __init__(self, zoom_range=0.2, random_state=0):
        self.zoom_range = zoom_range
        self.random_state = random_state

    def fit(self, X, y=None):
        check_images(X)
        self.rng_ = np.random.default_rng(self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "rng_")
        X = check_images(X)
        return np.stack([random_zoom(img, self.zoom_range, self.rng_) for img in X])
