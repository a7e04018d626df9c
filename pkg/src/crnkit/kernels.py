"""Hot inner loops of the CRN unit.

Every kernel exists twice: a numba ``@njit`` version and a numpy version
with the same signature. ``subset_mean`` / ``subset_mean_grad`` and
``elu`` / ``elu_grad`` dispatch to one of them according to
:data:`crnkit._jit.JIT_ENABLED`. Both implementations stay importable
(``numpy_impl`` and ``numba_impl``) so tests and benchmarks can compare
them directly.

Array layout for the subset kernels: objects ``x`` are ``(R, n, K, F)``
C-contiguous, subsets ``idx`` are ``(t, k)`` int64, the output is
``(R, t, K, F)``.
"""
from types import SimpleNamespace

import numpy as np

from ._jit import HAVE_NUMBA, JIT_ENABLED, njit


def _subset_mean_np(x, idx):
    k = idx.shape[1]
    # (R, t, k, K, F) -> mean over the k members
    return x[:, idx].sum(axis=2) / k


def _subset_mean_grad_np(grad, idx, n):
    R, t, K, F = grad.shape
    k = idx.shape[1]
    out = np.zeros((R, n, K, F), dtype=grad.dtype)
    scaled = grad / k
    for j in range(k):
        # np.add.at handles repeated object indices across the t draws
        np.add.at(out, (slice(None), idx[:, j]), scaled)
    return out


def _elu_np(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad_np(x, grad):
    return grad * np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


@njit(cache=True)
def _subset_mean_nb(x, idx):
    R, n, K, F = x.shape
    t, k = idx.shape
    out = np.zeros((R, t, K, F), dtype=x.dtype)
    inv = 1.0 / k
    for r in range(R):
        for s in range(t):
            for j in range(k):
                o = idx[s, j]
                for a in range(K):
                    for f in range(F):
                        out[r, s, a, f] += x[r, o, a, f]
            for a in range(K):
                for f in range(F):
                    out[r, s, a, f] *= inv
    return out


@njit(cache=True)
def _subset_mean_grad_nb(grad, idx, n):
    R, t, K, F = grad.shape
    k = idx.shape[1]
    out = np.zeros((R, n, K, F), dtype=grad.dtype)
    inv = 1.0 / k
    for r in range(R):
        for s in range(t):
            for j in range(k):
                o = idx[s, j]
                for a in range(K):
                    for f in range(F):
                        out[r, o, a, f] += grad[r, s, a, f] * inv
    return out


@njit(cache=True)
def _elu_nb(x):
    flat = x.ravel()
    out = np.empty_like(flat)
    for i in range(flat.size):
        v = flat[i]
        out[i] = v if v > 0 else np.expm1(v)
    return out.reshape(x.shape)


@njit(cache=True)
def _elu_grad_nb(x, grad):
    fx = x.ravel()
    fg = grad.ravel()
    out = np.empty_like(fg)
    for i in range(fx.size):
        v = fx[i]
        out[i] = fg[i] if v > 0 else fg[i] * np.exp(v)
    return out.reshape(grad.shape)


numpy_impl = SimpleNamespace(
    subset_mean=_subset_mean_np,
    subset_mean_grad=_subset_mean_grad_np,
    elu=_elu_np,
    elu_grad=_elu_grad_np,
)

numba_impl = (
    SimpleNamespace(
        subset_mean=_subset_mean_nb,
        subset_mean_grad=_subset_mean_grad_nb,
        elu=_elu_nb,
        elu_grad=_elu_grad_nb,
    )
    if HAVE_NUMBA
    else numpy_impl
)

active = numba_impl if JIT_ENABLED else numpy_impl


def subset_mean(x, idx):
    """Mean of the objects listed in each row of ``idx``, for every leading row."""
    return active.subset_mean(np.ascontiguousarray(x), np.ascontiguousarray(idx, dtype=np.int64))


def subset_mean_grad(grad, idx, n):
    return active.subset_mean_grad(
        np.ascontiguousarray(grad), np.ascontiguousarray(idx, dtype=np.int64), n
    )


def elu(x):
    return active.elu(np.ascontiguousarray(x))


def elu_grad(x, grad):
    return active.elu_grad(np.ascontiguousarray(x), np.ascontiguousarray(grad))
