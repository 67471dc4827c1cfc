import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from smallcnn.exceptions import ShapeError
from smallcnn.tensor import as_tensor, elementwise, flatten, matmul, reshape, tensor_create


@pytest.mark.parametrize("shape, fill, expected_count", [
    ([2, 2], 0.0, 4),
    ([1], 7.5, 1),
    ([3, 2, 2], 1.0, 12),
])
def test_tensor_create(shape, fill, expected_count):
    t = tensor_create(shape, fill)
    assert t.dtype == np.float64
    assert t.size == expected_count
    assert np.all(t == fill)


@pytest.mark.parametrize("shape", [[0], [2, -1], []])
def test_tensor_create_rejects_bad_shapes(shape):
    with pytest.raises(ShapeError):
        tensor_create(shape)


def test_elementwise_examples():
    a, b = as_tensor([1, 2]), as_tensor([3, 4])
    np.testing.assert_array_equal(elementwise(a, b, "add"), [4, 6])
    np.testing.assert_array_equal(elementwise(a, tensor_create([2]), "mul"), [0, 0])
    c = as_tensor([2, 4])
    np.testing.assert_array_equal(elementwise(c, c, "sub"), [0, 0])


def test_elementwise_shape_mismatch():
    with pytest.raises(ShapeError):
        elementwise(tensor_create([2]), tensor_create([3]), "add")
    with pytest.raises(ShapeError):
        # no broadcasting
        elementwise(tensor_create([2, 1]), tensor_create([2, 2]), "add")


def test_matmul_examples():
    A = as_tensor([[1.5, -2.0], [0.25, 3.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), A), A)
    np.testing.assert_array_equal(matmul(as_tensor([[1, 2]]), as_tensor([[3], [4]])), [[11.0]])
    np.testing.assert_array_equal(matmul(A, tensor_create([2, 3])), np.zeros((2, 3)))


def test_matmul_shape_errors():
    with pytest.raises(ShapeError):
        matmul(tensor_create([2, 3]), tensor_create([2, 3]))
    with pytest.raises(ShapeError):
        matmul(tensor_create([3]), tensor_create([3, 1]))


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(arrays(np.float64, 7, elements=finite), arrays(np.float64, 7, elements=finite))
def test_add_mul_commute_exactly(a, b):
    for op in ("add", "mul"):
        np.testing.assert_array_equal(elementwise(a, b, op), elementwise(b, a, op))


@given(st.integers(1, 16), st.integers(1, 16), st.integers(1, 16), st.integers(1, 16),
       st.integers(0, 2 ** 32 - 1))
@settings(max_examples=50)
def test_matmul_associative(m, k, n, p, seed):
    r = np.random.default_rng(seed)
    A, B, C = (r.uniform(-1, 1, s) for s in ((m, k), (k, n), (n, p)))
    np.testing.assert_allclose(matmul(matmul(A, B), C), matmul(A, matmul(B, C)), rtol=0, atol=1e-9)


def test_reshape_flatten_round_trip(rng):
    t = rng.standard_normal((3, 4, 5))
    r = reshape(flatten(t), (3, 4, 5))
    assert r.tobytes() == t.tobytes()
    assert r is not t
    with pytest.raises(ShapeError):
        reshape(t, (7, 7))
