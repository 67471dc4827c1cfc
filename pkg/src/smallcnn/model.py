"""Layer specifications, model construction, forward/backward passes."""

from dataclasses import dataclass, field, asdict

import numpy as np

from . import layers as L
from .exceptions import ConfigError, ConsistencyError, ShapeError
from .metrics import bce_grad, bce_loss
from .tensor import DTYPE

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid")
KINDS = ("conv2d", "maxpool2", "flatten", "dense", "activation")
DEFAULT_LEAKY_SLOPE = 0.01
INPUT_SHAPE = (100, 100, 1)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel_size: int = 0
    filters: int = 0
    units: int = 0
    activation: str = ""
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d" and (self.kernel_size < 1 or self.filters < 1):
            raise ConfigError("conv2d needs kernel_size >= 1 and filters >= 1")
        if self.kind == "dense" and self.units < 1:
            raise ConfigError("dense needs units >= 1")
        if self.kind == "activation":
            if self.activation not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {self.activation!r}")
            if self.activation == "leaky_relu":
                L.check_slope(self.slope)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v or k == "kind"}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def conv2d(kernel_size, filters):
    return LayerSpec("conv2d", kernel_size=kernel_size, filters=filters)


def maxpool2():
    return LayerSpec("maxpool2")


def flatten():
    return LayerSpec("flatten")


def dense(units):
    return LayerSpec("dense", units=units)


def activation(name, slope=DEFAULT_LEAKY_SLOPE):
    if name == "leaky_relu":
        return LayerSpec("activation", activation=name, slope=slope)
    return LayerSpec("activation", activation=name)


def default_architecture(first_activation="relu", leaky_slope=DEFAULT_LEAKY_SLOPE):
    """conv3x3x16 -> act -> pool -> conv3x3x32 -> relu -> pool -> dense64 -> relu -> dense1 -> sigmoid."""
    return [
        conv2d(3, 16),
        activation(first_activation, leaky_slope),
        maxpool2(),
        conv2d(3, 32),
        activation("relu"),
        maxpool2(),
        flatten(),
        dense(64),
        activation("relu"),
        dense(1),
        activation("sigmoid"),
    ]


def reduced_architecture(first_activation="relu", leaky_slope=DEFAULT_LEAKY_SLOPE):
    """Same layer kinds as the default stack, sized for 8x8 inputs."""
    return [
        conv2d(3, 2),
        activation(first_activation, leaky_slope),
        maxpool2(),
        conv2d(2, 3),
        activation("relu"),
        maxpool2(),
        flatten(),
        dense(4),
        activation("relu"),
        dense(1),
        activation("sigmoid"),
    ]


def shape_chain(specs, input_shape):
    """Per-layer output shapes (unbatched); raises ShapeError on a mismatch."""
    shape = tuple(input_shape)
    shapes = []
    for i, spec in enumerate(specs):
        if spec.kind == "conv2d":
            if len(shape) != 3:
                raise ShapeError(f"layer {i}: conv2d needs (H, W, C) input, got {shape}")
            h, w, _ = shape
            k = spec.kernel_size
            if k > h or k > w:
                raise ShapeError(f"layer {i}: kernel {k} larger than input {h}x{w}")
            shape = (h - k + 1, w - k + 1, spec.filters)
        elif spec.kind == "maxpool2":
            if len(shape) != 3 or shape[0] < 2 or shape[1] < 2:
                raise ShapeError(f"layer {i}: maxpool2 needs spatial input >= 2x2, got {shape}")
            shape = (shape[0] // 2, shape[1] // 2, shape[2])
        elif spec.kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif spec.kind == "dense":
            if len(shape) != 1:
                raise ShapeError(f"layer {i}: dense needs a flat input, got {shape}; add flatten")
            shape = (spec.units,)
        shapes.append(shape)
    return shapes


def _param_shapes(specs, input_shape):
    out = {}
    prev = tuple(input_shape)
    for i, (spec, shape) in enumerate(zip(specs, shape_chain(specs, input_shape))):
        if spec.kind == "conv2d":
            out[f"layer{i}.kernel"] = (spec.kernel_size, spec.kernel_size, prev[2], spec.filters)
            out[f"layer{i}.bias"] = (spec.filters,)
        elif spec.kind == "dense":
            out[f"layer{i}.weight"] = (prev[0], spec.units)
            out[f"layer{i}.bias"] = (spec.units,)
        prev = shape
    return out


@dataclass
class Model:
    specs: list
    params: dict
    input_shape: tuple = INPUT_SHAPE

    def __post_init__(self):
        self.specs = list(self.specs)
        self.input_shape = tuple(int(d) for d in self.input_shape)
        validate_architecture(self.specs, self.input_shape)
        expected = _param_shapes(self.specs, self.input_shape)
        if set(expected) != set(self.params):
            raise ConsistencyError(
                f"parameter names {sorted(self.params)} do not match architecture {sorted(expected)}"
            )
        for name, shape in expected.items():
            if tuple(self.params[name].shape) != shape:
                raise ConsistencyError(f"{name}: shape {self.params[name].shape}, expected {shape}")

    @property
    def n_params(self):
        return sum(p.size for p in self.params.values())

    def copy(self):
        return Model(self.specs, {k: v.copy() for k, v in self.params.items()}, self.input_shape)


def validate_architecture(specs, input_shape):
    if len(specs) < 2:
        raise ConfigError("a model needs at least dense(1) and sigmoid")
    head, out = specs[-2], specs[-1]
    if not (head.kind == "dense" and head.units == 1 and out.kind == "activation"
            and out.activation == "sigmoid"):
        raise ConfigError("final layers must be dense(1) followed by sigmoid")
    if any(s.kind == "activation" and s.activation == "sigmoid" for s in specs[:-1]):
        raise ConfigError("sigmoid is only supported as the output activation")
    shape_chain(specs, input_shape)


def build_model(specs=None, input_shape=INPUT_SHAPE, rng=None, init="glorot"):
    """Create a model with Glorot-uniform weights and zero biases.

    ``rng`` is a ``numpy.random.Generator`` or an int seed. ``init="zeros"``
    gives an all-zero parameter set.
    """
    if specs is None:
        specs = default_architecture()
    if init not in ("glorot", "zeros"):
        raise ConfigError(f"unknown init {init!r}")
    rng = np.random.default_rng(rng)
    validate_architecture(specs, input_shape)
    params = {}
    for name, shape in _param_shapes(specs, input_shape).items():
        if init == "zeros" or name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=DTYPE)
            continue
        if len(shape) == 4:
            k, _, c, f = shape
            fan_in, fan_out = k * k * c, k * k * f
        else:
            fan_in, fan_out = shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-limit, limit, size=shape).astype(DTYPE)
    return Model(specs, params, input_shape)


@dataclass
class ForwardCache:
    """Per-layer state saved by :func:`forward` for :func:`backward`.

    ``entries[i]`` is a tuple whose layout depends on the layer kind.
    """

    specs: tuple
    input_shape: tuple
    entries: list = field(default_factory=list)
    logits: np.ndarray = None
    probs: np.ndarray = None


_FUSED = ("fused",)


def _fusable(specs, i):
    return (specs[i].kind == "activation" and specs[i].activation in ("relu", "leaky_relu")
            and i + 1 < len(specs) and specs[i + 1].kind == "maxpool2")


def forward(model, X, keep_cache=True):
    """Run a batch ``(N, H, W, C)`` through the model.

    Returns ``(probs, cache)`` with ``probs`` of shape ``(N,)``. The cache is
    None when ``keep_cache`` is false.
    """
    X = np.asarray(X, dtype=DTYPE)
    if X.ndim != 4 or X.shape[1:] != model.input_shape:
        raise ShapeError(f"expected batch of {model.input_shape} images, got {X.shape}")
    specs = model.specs
    cache = ForwardCache(tuple(specs), model.input_shape)
    entries = cache.entries
    x = X
    i = 0
    while i < len(specs):
        spec = specs[i]
        inp = x
        if spec.kind == "conv2d":
            x, cols = L.conv2d_batch(x, model.params[f"layer{i}.kernel"], model.params[f"layer{i}.bias"])
            entry = (inp, cols)
        elif _fusable(specs, i):
            x, idx = L.act_pool_batch(x, spec.activation, spec.slope)
            if keep_cache:
                entries.extend([(inp, idx), _FUSED])
            i += 2
            continue
        elif spec.kind == "maxpool2":
            x = L.maxpool2_batch(x)
            entry = (inp, x)
        elif spec.kind == "flatten":
            x = x.reshape(x.shape[0], -1)
            entry = (inp.shape,)
        elif spec.kind == "dense":
            x = L.dense_batch(x, model.params[f"layer{i}.weight"], model.params[f"layer{i}.bias"])
            entry = (inp,)
        elif spec.activation == "relu":
            x = L.relu(x)
            entry = (inp,)
        elif spec.activation == "leaky_relu":
            x = L.leaky_relu(x, spec.slope)
            entry = (inp,)
        else:
            cache.logits = x[:, 0]
            x = L.sigmoid(x)
            entry = (inp,)
        if keep_cache:
            entries.append(entry)
        i += 1
    probs = x[:, 0]
    cache.probs = probs
    return probs, (cache if keep_cache else None)


def predict_proba(model, X, batch_size=16):
    """Probabilities for a batch of images, evaluated in fixed-size chunks."""
    X = np.asarray(X, dtype=DTYPE)
    out = [forward(model, X[i:i + batch_size], keep_cache=False)[0]
           for i in range(0, X.shape[0], batch_size)]
    return np.concatenate(out) if out else np.zeros(0, dtype=DTYPE)


def _check_cache(model, cache):
    if cache is None or cache.specs != tuple(model.specs) or cache.input_shape != model.input_shape:
        raise ConsistencyError("forward cache was produced by a different model")
    if len(cache.entries) != len(model.specs):
        raise ConsistencyError("forward cache is incomplete (was keep_cache disabled?)")


def backward_logits(model, cache, grad_logits):
    """Parameter gradients given d(loss)/d(logit) per sample, shape ``(N,)``."""
    _check_cache(model, cache)
    g = np.asarray(grad_logits, dtype=DTYPE).reshape(-1, 1)
    grads = {}
    # the trailing sigmoid has already been folded into grad_logits
    for i in range(len(model.specs) - 2, -1, -1):
        spec, entry = model.specs[i], cache.entries[i]
        if entry is _FUSED:
            continue
        if spec.kind == "conv2d":
            x, cols = entry
            gk, gb, g = L.conv2d_backward(x, model.params[f"layer{i}.kernel"], g, cols=cols,
                                          need_input_grad=i > 0)
            grads[f"layer{i}.kernel"], grads[f"layer{i}.bias"] = gk, gb
        elif _fusable(model.specs, i):
            x, idx = entry
            g = L.act_pool_backward(x, idx, g, spec.activation, spec.slope)
        elif spec.kind == "maxpool2":
            g = L.maxpool2_backward(entry[0], entry[1], g)
        elif spec.kind == "flatten":
            g = g.reshape(entry[0])
        elif spec.kind == "dense":
            gw, gb, g = L.dense_backward(entry[0], model.params[f"layer{i}.weight"], g)
            grads[f"layer{i}.weight"], grads[f"layer{i}.bias"] = gw, gb
        elif spec.activation == "relu":
            g = L.relu_backward(entry[0], g)
        elif spec.activation == "leaky_relu":
            g = L.leaky_relu_backward(entry[0], g, spec.slope)
    return {name: grads[name] for name in model.params}


def backward(model, cache, grad_probs):
    """Parameter gradients given d(loss)/d(probability) per sample.

    Gradients are summed over the batch; scale ``grad_probs`` by 1/N for a
    mean-reduced loss.
    """
    _check_cache(model, cache)
    grad_probs = np.broadcast_to(np.asarray(grad_probs, dtype=DTYPE), cache.logits.shape)
    return backward_logits(model, cache, L.sigmoid_backward(cache.logits, grad_probs))


def model_forward(model, image):
    """Probability for one ``(H, W, C)`` image plus the cache for backward."""
    image = np.asarray(image, dtype=DTYPE)
    if image.shape != model.input_shape:
        raise ShapeError(f"expected image of shape {model.input_shape}, got {image.shape}")
    probs, cache = forward(model, image[None])
    return float(probs[0]), cache


def model_backward(model, cache, dloss_dprob):
    return backward(model, cache, dloss_dprob)


def sample_loss(model, image, label):
    p, _ = model_forward(model, image)
    return bce_loss(p, label)


def grad_check_report(model, image, label, h=1e-6, grads=None):
    """Worst relative error per parameter tensor, analytic vs central differences.

    Relative error is ``|a - b| / max(|a|, |b|, 1e-8)``. ``grads`` overrides
    the analytic gradients (used to verify the checker catches bugs).
    """
    if grads is None:
        p, cache = model_forward(model, image)
        grads = model_backward(model, cache, bce_grad(p, label))
    probe = model.copy()
    report = {}
    for name, param in probe.params.items():
        flat = param.reshape(-1)
        analytic = grads[name].reshape(-1)
        worst = 0.0
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = sample_loss(probe, image, label)
            flat[j] = orig - h
            down = sample_loss(probe, image, label)
            flat[j] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[j]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
        report[name] = worst
    return report


def grad_check(model, image, label, h=1e-6, grads=None):
    return max(grad_check_report(model, image, label, h=h, grads=grads).values())
