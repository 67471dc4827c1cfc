"""Dense float64 arrays and the few primitives the layers build on.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 in C order.
These helpers add the shape checks the rest of the package relies on;
numpy does not broadcast here on purpose.
"""

import numpy as np

from .exceptions import ShapeError

DTYPE = np.float64

_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def tensor_create(shape, fill=0.0):
    """Return a new tensor of ``shape`` with every element equal to ``fill``."""
    shape = tuple(int(d) for d in shape)
    if not shape or any(d < 1 for d in shape):
        raise ShapeError(f"all dimensions must be >= 1, got {shape}")
    return np.full(shape, fill, dtype=DTYPE)


def as_tensor(data, shape=None):
    """Copy ``data`` into a contiguous float64 tensor, optionally reshaped."""
    arr = np.array(data, dtype=DTYPE, order="C", copy=True)
    if shape is not None:
        arr = reshape(arr, shape)
    return arr


def reshape(t, shape):
    """Reshape into a fresh copy; the element count must not change."""
    shape = tuple(int(d) for d in shape)
    if int(np.prod(shape)) != t.size:
        raise ShapeError(f"cannot reshape {t.shape} ({t.size} elements) to {shape}")
    return np.array(t, dtype=DTYPE, copy=True).reshape(shape)


def flatten(t):
    return reshape(t, (t.size,))


def elementwise(a, b, op):
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}; expected one of {sorted(_ELEMENTWISE)}")
    if a.shape != b.shape:
        raise ShapeError(f"elementwise {op}: shape mismatch {a.shape} vs {b.shape}")
    return _ELEMENTWISE[op](a, b, dtype=DTYPE)


def matmul(a, b):
    """Rank-2 matrix product with explicit inner-dimension checking."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return np.matmul(a, b, dtype=DTYPE)
