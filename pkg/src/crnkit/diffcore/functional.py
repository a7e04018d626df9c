"""Differentiable primitives used by the CRN and HCRN layers."""
import numpy as np

from .. import kernels
from ..errors import DimensionError
from .tensor import Tensor, add_macs, matmul


def linear(x, W, b=None):
    """Affine map along the last axis: ``x @ W + b``."""
    x = Tensor.wrap(x)
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise DimensionError(
            f"linear: input shape {x.shape} does not match weight shape {W.shape}"
        )
    out = matmul(x, W)
    if b is not None:
        out = out + b
    return out


def concat(tensors, axis=-1):
    tensors = [Tensor.wrap(t) for t in tensors]
    ndim = tensors[0].ndim
    ax = axis % ndim
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            a != b for i, (a, b) in enumerate(zip(ref, t.shape)) if i != ax
        ):
            raise DimensionError(
                f"concat along axis {axis}: shapes {[t.shape for t in tensors]} do not conform"
            )
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=ax)

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return Tensor._result(out, tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [Tensor.wrap(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack: shapes {sorted(shapes)} differ")
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim

    def backward(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(tensors)))

    return Tensor._result(out, tuple(tensors), backward)


def hadamard(x, y):
    """Elementwise product; ``y`` may broadcast against ``x``."""
    x, y = Tensor.wrap(x), Tensor.wrap(y)
    try:
        np.broadcast_shapes(x.shape, y.shape)
    except ValueError as exc:
        raise DimensionError(f"hadamard: shapes {x.shape} and {y.shape} do not conform") from exc
    return x * y


def elu(x):
    """ELU with alpha = 1."""
    xd = x.data
    out = kernels.elu(xd)
    return Tensor._result(out, (x,), lambda g: (kernels.elu_grad(xd, g),))


def sigmoid(x):
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor._result(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    out = np.tanh(x.data)
    return Tensor._result(out, (x,), lambda g: (g * (1.0 - out * out),))


def exp(x):
    out = np.exp(x.data)
    return Tensor._result(out, (x,), lambda g: (g * out,))


def log(x):
    xd = x.data
    return Tensor._result(np.log(xd), (x,), lambda g: (g / xd,))


def relu(x):
    mask = x.data > 0
    return Tensor._result(x.data * mask, (x,), lambda g: (g * mask,))


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Tensor._result(s, (x,), backward)


def mean_pool(x, axis):
    return x.mean(axis=axis)


def max_pool(x, axis):
    return x.max(axis=axis)


def subset_mean(x, subsets):
    """Average the objects named by each subset.

    Args:
        x: objects of shape ``(..., n, K, F)``.
        subsets: integer array ``(t, k)``; every row lists k object indices.

    Returns:
        Tensor of shape ``(..., t, K, F)``.
    """
    subsets = np.asarray(subsets, dtype=np.int64)
    if x.ndim < 3:
        raise DimensionError(f"subset_mean expects (..., n, K, F), got {x.shape}")
    lead = x.shape[:-3]
    n, K, F = x.shape[-3:]
    if subsets.size and (subsets.min() < 0 or subsets.max() >= n):
        raise DimensionError(f"subset indices out of range for n={n}")
    rows = int(np.prod(lead)) if lead else 1
    flat = x.data.reshape(rows, n, K, F)
    t, k = subsets.shape
    add_macs("subset_mean", rows * t * k * K * F)
    out = kernels.subset_mean(flat, subsets).reshape(lead + (t, K, F))

    def backward(g):
        gx = kernels.subset_mean_grad(g.reshape(rows, t, K, F), subsets, n)
        return (gx.reshape(x.shape),)

    return Tensor._result(out, (x,), backward)


def gather(x, subsets):
    """Pick objects without reducing: ``(..., n, K, F)`` -> ``(..., t, k, K, F)``."""
    subsets = np.asarray(subsets, dtype=np.int64)
    ax = x.ndim - 3
    index = (slice(None),) * ax + (subsets,)
    return x[index]
