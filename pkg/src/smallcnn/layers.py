"""Forward and backward kernels for the CNN building blocks.

Every function works on a leading batch axis: images are ``(N, H, W, C)``,
dense activations are ``(N, features)``. The single-sample helpers at the
bottom of the module accept unbatched inputs.
"""

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ConfigError, ShapeError
from .tensor import DTYPE


# -- activations -------------------------------------------------------------

def relu(x):
    return np.where(x > 0, x, 0.0)


def relu_backward(x, grad_out):
    return grad_out * (x > 0)


def check_slope(slope):
    if not 0.0 < slope < 1.0:
        raise ConfigError(f"leaky relu slope must lie in (0, 1), got {slope}")


def leaky_relu(x, slope=0.01):
    check_slope(slope)
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x, grad_out, slope=0.01):
    return np.where(x > 0, grad_out, slope * grad_out)


def sigmoid(x):
    """Logistic function; ``exp`` only ever sees non-positive arguments."""
    x = np.asarray(x, dtype=DTYPE)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_backward(x, grad_out):
    # s(x) * s(-x) keeps precision where 1 - s(x) would round to zero.
    return grad_out * sigmoid(x) * sigmoid(-x)


# -- convolution ---------------------------------------------------------------

def im2col(x, k):
    """Rows are receptive fields ordered (kh, kw, C), matching kernel layout."""
    n, h, w, c = x.shape
    win = sliding_window_view(x, (k, k), axis=(1, 2))  # N, H', W', C, k, k
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n * (h - k + 1) * (w - k + 1), k * k * c)


def _check_conv(x, kernels, bias):
    if x.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d expects (N,H,W,C) input and (k,k,C,F) kernels, got {x.shape}, {kernels.shape}")
    _, h, w, c = x.shape
    k, k2, kc, f = kernels.shape
    if k != k2:
        raise ShapeError(f"kernels must be square, got {kernels.shape}")
    if kc != c:
        raise ShapeError(f"kernel channels {kc} do not match input channels {c}")
    if k > h or k > w:
        raise ShapeError(f"kernel size {k} exceeds input {h}x{w}")
    if bias.shape != (f,):
        raise ShapeError(f"bias shape {bias.shape} does not match {f} filters")


def conv2d_batch(x, kernels, bias):
    """Valid cross-correlation, stride 1. Returns ``(out, cols)``.

    Single-channel input goes through one im2col matmul (``cols`` is
    returned for reuse in backward); multi-channel input is computed as a
    sum of k*k shifted matmuls, which avoids materialising the column
    matrix, and ``cols`` is None.
    """
    _check_conv(x, kernels, bias)
    n, h, w, c = x.shape
    k, _, _, f = kernels.shape
    ho, wo = h - k + 1, w - k + 1
    if c == 1:
        cols = im2col(x, k)
        out = cols @ kernels.reshape(k * k * c, f)
        out += bias
        return out.reshape(n, ho, wo, f), cols
    out = np.empty((n, ho, wo, f), dtype=DTYPE)
    out[...] = bias
    for a in range(k):
        for b in range(k):
            out += x[:, a:a + ho, b:b + wo, :] @ kernels[a, b]
    return out, None


def conv2d_backward(x, kernels, grad_out, cols=None, need_input_grad=True):
    """Gradients of a valid stride-1 convolution.

    Returns ``(grad_kernels, grad_bias, grad_input)``; ``grad_input`` is None
    when ``need_input_grad`` is false (first layer).
    """
    n, h, w, c = x.shape
    k, _, _, f = kernels.shape
    ho, wo = h - k + 1, w - k + 1
    g = grad_out.reshape(-1, f)
    if cols is None:
        cols = im2col(x, k)
    grad_k = (cols.T @ g).reshape(kernels.shape)
    grad_b = g.sum(axis=0)
    if not need_input_grad:
        return grad_k, grad_b, None
    grad_x = np.zeros(x.shape, dtype=DTYPE)
    for a in range(k):
        for b in range(k):
            grad_x[:, a:a + ho, b:b + wo, :] += grad_out @ kernels[a, b].T
    return grad_k, grad_b, grad_x


# -- pooling -------------------------------------------------------------------

def _pool_slices(x):
    n, h, w, f = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2 needs at least 2x2 spatial input, got {h}x{w}")
    h2, w2 = 2 * (h // 2), 2 * (w // 2)
    return [x[:, i:h2:2, j:w2:2, :] for i in (0, 1) for j in (0, 1)]


def maxpool2_batch(x):
    """2x2 max pooling, stride 2; a trailing odd row/column is dropped."""
    s = _pool_slices(x)
    return np.maximum(np.maximum(s[0], s[1]), np.maximum(s[2], s[3]))


def maxpool2_backward(x, out, grad_out):
    """Route each gradient to the first maximal element of its window."""
    grad_x = np.zeros_like(x)
    taken = np.zeros(out.shape, dtype=bool)
    h2, w2 = 2 * out.shape[1], 2 * out.shape[2]
    for pos, s in enumerate(_pool_slices(x)):
        i, j = divmod(pos, 2)
        hit = (s == out) & ~taken
        taken |= hit
        grad_x[:, i:h2:2, j:w2:2, :] = np.where(hit, grad_out, 0.0)
    return grad_x


@numba.njit(cache=True)
def _act_pool_kernel(x, leaky, slope):
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    out = np.empty((n, h2, w2, c))
    idx = np.empty((n, h2, w2, c), np.uint8)
    for i in range(n):
        for y in range(h2):
            for xx in range(w2):
                for ch in range(c):
                    best = x[i, 2 * y, 2 * xx, ch]
                    bi = 0
                    v = x[i, 2 * y, 2 * xx + 1, ch]
                    if v > best:
                        best, bi = v, 1
                    v = x[i, 2 * y + 1, 2 * xx, ch]
                    if v > best:
                        best, bi = v, 2
                    v = x[i, 2 * y + 1, 2 * xx + 1, ch]
                    if v > best:
                        best, bi = v, 3
                    if not best > 0:
                        best = best * slope if leaky else 0.0
                    out[i, y, xx, ch] = best
                    idx[i, y, xx, ch] = bi
    return out, idx


@numba.njit(cache=True)
def _act_pool_backward_kernel(x, idx, grad_out, leaky, slope):
    n, h2, w2, c = grad_out.shape
    grad_x = np.zeros(x.shape)
    for i in range(n):
        for y in range(h2):
            for xx in range(w2):
                for ch in range(c):
                    bi = idx[i, y, xx, ch]
                    a = 2 * y + bi // 2
                    b = 2 * xx + bi % 2
                    g = grad_out[i, y, xx, ch]
                    if not x[i, a, b, ch] > 0:
                        g = g * slope if leaky else 0.0
                    grad_x[i, a, b, ch] = g
    return grad_x


def act_pool_batch(x, name, slope=0.0):
    """``maxpool2(act(x))`` for relu/leaky_relu, computed as ``act(maxpool2(x))``.

    The two orders agree exactly because both activations are monotone.
    Returns ``(out, idx)`` where ``idx`` is the winning position (0-3) of
    each 2x2 window, first maximum on ties.
    """
    _pool_slices(x)
    return _act_pool_kernel(np.ascontiguousarray(x, dtype=DTYPE), name == "leaky_relu", float(slope))


def act_pool_backward(x, idx, grad_out, name, slope=0.0):
    return _act_pool_backward_kernel(x, idx, np.ascontiguousarray(grad_out, dtype=DTYPE),
                                     name == "leaky_relu", float(slope))


# -- dense -----------------------------------------------------------------------

def dense_batch(x, weights, bias):
    if x.ndim != 2 or weights.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ShapeError(f"dense: input {x.shape} incompatible with weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise ShapeError(f"dense: bias {bias.shape} does not match {weights.shape[1]} units")
    return x @ weights + bias


def dense_backward(x, weights, grad_out):
    return x.T @ grad_out, grad_out.sum(axis=0), grad_out @ weights.T


# -- unbatched convenience wrappers ----------------------------------------------

def conv2d_forward(image, kernels, bias):
    """Convolve a single ``(H, W, C)`` image."""
    if image.ndim != 3:
        raise ShapeError(f"expected (H, W, C) image, got {image.shape}")
    out, _ = conv2d_batch(image[None], kernels, bias)
    return out[0]


def maxpool2(image):
    if image.ndim != 3:
        raise ShapeError(f"expected (H, W, F) input, got {image.shape}")
    return maxpool2_batch(image[None])[0]


def dense_forward(x, weights, bias):
    if x.ndim != 1:
        raise ShapeError(f"expected a vector input, got {x.shape}")
    return dense_batch(x[None], weights, bias)[0]
