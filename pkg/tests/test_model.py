import numpy as np
import pytest

from smallcnn import model as M
from smallcnn.exceptions import ConfigError, ConsistencyError, ShapeError
from smallcnn.metrics import bce_grad


def small_model(seed, first="relu", filters=1):
    specs = [M.conv2d(3, filters), M.activation(first), M.maxpool2(), M.flatten(),
             M.dense(3), M.activation("relu"), M.dense(1), M.activation("sigmoid")]
    return M.build_model(specs, (8, 8, 1), rng=seed)


def test_default_architecture_shape_chain():
    specs = M.default_architecture()
    shapes = M.shape_chain(specs, (100, 100, 1))
    assert shapes == [(98, 98, 16), (98, 98, 16), (49, 49, 16), (47, 47, 32), (47, 47, 32),
                      (23, 23, 32), (16928,), (64,), (64,), (1,), (1,)]
    model = M.build_model(specs, rng=0)
    assert model.n_params == 3 * 3 * 16 + 16 + 3 * 3 * 16 * 32 + 32 + 16928 * 64 + 64 + 64 + 1


def test_head_must_be_dense1_sigmoid():
    with pytest.raises(ConfigError):
        M.build_model([M.flatten(), M.dense(2), M.activation("sigmoid")], (4, 4, 1))
    with pytest.raises(ConfigError):
        M.build_model([M.flatten(), M.dense(1)], (4, 4, 1))


def test_incompatible_layers_fail_at_build():
    with pytest.raises(ShapeError):
        M.build_model([M.dense(4), M.dense(1), M.activation("sigmoid")], (4, 4, 1))
    with pytest.raises(ShapeError):
        M.build_model([M.conv2d(5, 2), M.flatten(), M.dense(1), M.activation("sigmoid")], (4, 4, 1))


@pytest.mark.parametrize("kwargs", [dict(kind="conv2d", kernel_size=0, filters=1),
                                    dict(kind="dense", units=0),
                                    dict(kind="activation", activation="leaky_relu", slope=1.0),
                                    dict(kind="activation", activation="tanh"),
                                    dict(kind="pool")])
def test_layer_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        M.LayerSpec(**kwargs)


def test_glorot_bounds_and_zero_biases():
    model = M.build_model(rng=3)
    k = model.params["layer3.kernel"]
    limit = np.sqrt(6.0 / (3 * 3 * 16 + 3 * 3 * 32))
    assert np.abs(k).max() <= limit
    assert np.abs(k).max() > 0.9 * limit
    for name, p in model.params.items():
        if name.endswith(".bias"):
            assert not p.any()


def test_forward_output_range_and_zero_model(rng):
    image = rng.uniform(size=(100, 100, 1))
    p, _ = M.model_forward(M.build_model(rng=1), image)
    assert 0.0 < p < 1.0
    p0, _ = M.model_forward(M.build_model(init="zeros"), image)
    assert p0 == 0.5


def test_forward_deterministic(rng):
    image = rng.uniform(size=(100, 100, 1))
    a, _ = M.model_forward(M.build_model(rng=9), image)
    b, _ = M.model_forward(M.build_model(rng=9), image)
    assert a == b


def test_forward_rejects_wrong_shape():
    with pytest.raises(ShapeError):
        M.model_forward(M.build_model(rng=0), np.zeros((64, 64, 1)))


def test_batched_forward_matches_single(rng):
    model = small_model(4, filters=2)
    X = rng.uniform(size=(5, 8, 8, 1))
    batch, _ = M.forward(model, X)
    singles = [M.model_forward(model, x)[0] for x in X]
    np.testing.assert_allclose(batch, singles, rtol=0, atol=1e-15)


def test_backward_zero_upstream_gives_zero_grads(rng):
    model = small_model(2)
    _, cache = M.model_forward(model, rng.uniform(size=(8, 8, 1)))
    grads = M.model_backward(model, cache, 0.0)
    assert set(grads) == set(model.params)
    for name, g in grads.items():
        assert g.shape == model.params[name].shape
        assert not g.any()


def test_dead_relu_units_get_zero_gradient(rng):
    model = small_model(2, filters=2)
    model.params["layer0.bias"][:] = -100.0
    _, cache = M.model_forward(model, rng.uniform(size=(8, 8, 1)))
    grads = M.model_backward(model, cache, 1.0)
    assert not grads["layer0.kernel"].any()
    assert not grads["layer0.bias"].any()
    assert not grads["layer4.weight"].any()


def test_backward_rejects_foreign_cache(rng):
    image = rng.uniform(size=(8, 8, 1))
    _, cache = M.model_forward(small_model(1), image)
    other = M.build_model(M.reduced_architecture(), (8, 8, 1), rng=1)
    with pytest.raises(ConsistencyError):
        M.model_backward(other, cache, 1.0)
    _, nocache = M.forward(other, image[None], keep_cache=False)
    with pytest.raises(ConsistencyError):
        M.model_backward(other, nocache, 1.0)


def test_grad_check_small_conv_model(rng):
    model = small_model(11)
    assert M.grad_check(model, rng.uniform(size=(8, 8, 1)), 1) <= 1e-5


def test_grad_check_linear_model(rng):
    model = M.build_model([M.flatten(), M.dense(1), M.activation("sigmoid")], (8, 8, 1), rng=2)
    assert M.grad_check(model, rng.uniform(size=(8, 8, 1)), 0) <= 1e-7


def test_grad_check_detects_corrupted_gradient(rng):
    model = small_model(5)
    image = rng.uniform(size=(8, 8, 1))
    p, cache = M.model_forward(model, image)
    grads = M.model_backward(model, cache, bce_grad(p, 1))
    w = grads["layer6.weight"].reshape(-1)
    w[np.argmax(np.abs(w))] *= 2.0
    assert M.grad_check(model, image, 1, grads=grads) >= 0.4


@pytest.mark.parametrize("first", ["relu", "leaky_relu"])
@pytest.mark.parametrize("seed", range(10))
def test_grad_check_reduced_model_ten_seeds(first, seed):
    r = np.random.default_rng(seed)
    model = M.build_model(M.reduced_architecture(first), (8, 8, 1), r)
    image = r.uniform(size=(8, 8, 1))
    label = int(r.integers(0, 2))
    assert M.grad_check(model, image, label) <= 1e-5


def test_grad_check_does_not_mutate_model(rng):
    model = small_model(3)
    before = {k: v.copy() for k, v in model.params.items()}
    M.grad_check(model, rng.uniform(size=(8, 8, 1)), 0)
    for k, v in before.items():
        assert np.array_equal(model.params[k], v)
