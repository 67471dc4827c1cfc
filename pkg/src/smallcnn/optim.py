"""Adam and RMSProp parameter updates.

Both steps are pure: they return new parameter and state objects and leave
their inputs untouched. Parameters and gradients are dicts of float64
arrays keyed by parameter name.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, ConsistencyError

OPTIMIZERS = ("adam", "rmsprop")


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9  # RMSProp decay
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        for name in ("beta1", "beta2", "rho"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {value}")


@dataclass(frozen=True)
class OptimizerState:
    kind: str
    hyper: HyperParams
    s: dict
    v: dict = field(default_factory=dict)
    t: int = 0

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZERS}")


def init_state(kind, params, hyper=None):
    hyper = hyper or HyperParams()
    zeros = {name: np.zeros_like(p) for name, p in params.items()}
    v = {name: np.zeros_like(p) for name, p in params.items()} if kind == "adam" else {}
    return OptimizerState(kind=kind, hyper=hyper, s=zeros, v=v, t=0)


def _check(params, grads, state, kind):
    if state.kind != kind:
        raise ConsistencyError(f"{kind}_step called with a {state.kind} state")
    for other, label in ((grads, "gradients"), (state.s, "state")):
        if set(other) != set(params):
            raise ConsistencyError(f"{label} keys {sorted(other)} differ from params {sorted(params)}")
        for name, p in params.items():
            if other[name].shape != p.shape:
                raise ConsistencyError(f"{label} {name}: shape {other[name].shape} != {p.shape}")


def adam_step(params, grads, state):
    _check(params, grads, state, "adam")
    hp = state.hyper
    t = state.t + 1
    c1 = 1.0 - hp.beta1 ** t
    c2 = 1.0 - hp.beta2 ** t
    new_params, new_v, new_s = {}, {}, {}
    for name, w in params.items():
        g = grads[name]
        v = hp.beta1 * state.v[name]
        v += (1.0 - hp.beta1) * g
        s = hp.beta2 * state.s[name]
        s += (1.0 - hp.beta2) * (g * g)
        # W - lr * (v / c1) / (sqrt(s / c2) + eps)
        denom = np.sqrt(s / c2)
        denom += hp.epsilon
        update = v / c1
        update *= hp.learning_rate
        update /= denom
        new_params[name] = w - update
        new_v[name], new_s[name] = v, s
    return new_params, replace(state, v=new_v, s=new_s, t=t)


def rmsprop_step(params, grads, state):
    _check(params, grads, state, "rmsprop")
    hp = state.hyper
    new_params, new_s = {}, {}
    for name, w in params.items():
        g = grads[name]
        s = hp.rho * state.s[name]
        s += (1.0 - hp.rho) * (g * g)
        denom = np.sqrt(s)
        denom += hp.epsilon
        update = hp.learning_rate * g
        update /= denom
        new_params[name] = w - update
        new_s[name] = s
    return new_params, replace(state, s=new_s, t=state.t + 1)


def step(params, grads, state):
    """Dispatch on ``state.kind``."""
    if state.kind == "adam":
        return adam_step(params, grads, state)
    return rmsprop_step(params, grads, state)
