"""Dense tensor with reverse-mode autodiff.

Each differentiable op returns a new :class:`Tensor` remembering its parents
and a closure that maps the output gradient to parent gradients. Calling
:meth:`Tensor.backward` orders the recorded graph topologically (that
ordering is the tape) and walks it once in reverse. Only leaves that require
grad (normally :class:`Parameter` objects) receive a ``.grad``; intermediate
gradients are discarded after the sweep.
"""
import threading
from contextlib import contextmanager

import numpy as np

from ..errors import ContractError, DimensionError

_state = threading.local()


def _grad_enabled():
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class MacCounter:
    """Accumulates multiply-accumulate counts per op kind."""

    def __init__(self):
        self.by_op = {}

    @property
    def total(self):
        return sum(self.by_op.values())

    def add(self, kind, count):
        self.by_op[kind] = self.by_op.get(kind, 0) + int(count)

    def __repr__(self):
        return f"MacCounter(total={self.total}, by_op={self.by_op})"


@contextmanager
def count_macs():
    """Count forward-pass MACs of every op executed in the block.

    Counting rules: a linear map over R rows costs ``R*in*out``; a Hadamard
    product costs one per output element; ``mean``/``sum`` reductions and
    the subset mean cost one per input element read. Activations, additions
    and data movement are free.
    """
    counters = getattr(_state, "counters", None)
    if counters is None:
        counters = _state.counters = []
    counter = MacCounter()
    counters.append(counter)
    try:
        yield counter
    finally:
        counters.remove(counter)


def add_macs(kind, count):
    for counter in getattr(_state, "counters", ()) or ():
        counter.add(kind, count)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_array(value, like=None):
    if isinstance(value, Tensor):
        return value.data
    dtype = like.dtype if like is not None else np.float64
    return np.asarray(value, dtype=dtype)


class Tensor:
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    # -- construction helpers -------------------------------------------------
    @staticmethod
    def _result(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @staticmethod
    def wrap(value, like=None):
        if isinstance(value, Tensor):
            return value
        return Tensor(_as_array(value, like.data if like is not None else None))

    # -- basic attributes -----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    # -- autodiff -------------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ContractError(
                    f"backward() needs a scalar loss, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return
        order = _topological(self)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = Tensor.wrap(other, self)
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor._result(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        return Tensor._result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        return self + (-Tensor.wrap(other, self))

    def __rsub__(self, other):
        return Tensor.wrap(other, self) + (-self)

    def __mul__(self, other):
        other = Tensor.wrap(other, self)
        a, b = self.data, other.data
        out = a * b
        if a.size > 1 and b.size > 1:
            add_macs("hadamard", out.size)

        def backward(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._result(out, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def reciprocal(self):
        inv = 1.0 / self.data
        return Tensor._result(inv, (self,), lambda g: (-g * inv * inv,))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        src_shape = self.shape
        out = self.data[index]

        basic = _is_basic_index(index)

        def backward(g):
            full = np.zeros(src_shape, dtype=g.dtype)
            if basic:
                full[index] = g
            else:
                np.add.at(full, index, g)
            return (full,)

        return Tensor._result(out, (self,), backward)

    # -- shape ops ------------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.shape
        return Tensor._result(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(src),)
        )

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = tuple(np.argsort(axes))
        return Tensor._result(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),)
        )

    def broadcast_to(self, shape):
        src = self.shape
        try:
            out = np.broadcast_to(self.data, shape)
        except ValueError as exc:
            raise DimensionError(f"cannot broadcast {src} to {tuple(shape)}") from exc
        return Tensor._result(
            np.ascontiguousarray(out), (self,), lambda g: (_unbroadcast(g, src),)
        )

    # -- reductions -----------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        src = self.shape
        add_macs("reduce", self.size)
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, src).copy(),)

        return Tensor._result(out, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        src = self.shape
        count = self.size if axis is None else int(
            np.prod([src[a] for a in np.atleast_1d(axis)])
        )
        add_macs("reduce", self.size)
        out = self.data.mean(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g / count, src).copy(),)

        return Tensor._result(out, (self,), backward)

    def max(self, axis=None, keepdims=False):
        data = self.data
        out = data.max(axis=axis, keepdims=True)
        mask = data == out
        # ties share the gradient equally
        share = mask / mask.sum(axis=axis, keepdims=True)
        result = out if keepdims else (
            out.reshape(()) if axis is None else np.squeeze(out, axis=axis)
        )

        def backward(g):
            if not keepdims:
                g = g.reshape(out.shape)
            return (share * g,)

        return Tensor._result(result, (self,), backward)


class Parameter(Tensor):
    """Trainable leaf tensor carrying its Adam state."""

    def __init__(self, data, name=None, dtype=None):
        super().__init__(data, requires_grad=True, name=name, dtype=dtype)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self):
        return f"Parameter(name={self.name!r}, shape={self.shape})"


def _is_basic_index(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(
        isinstance(i, (slice, int, np.integer)) or i is Ellipsis or i is None
        for i in items
    )


def _topological(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def matmul(x, w):
    """``x @ w`` for ``x`` of shape ``(..., in)`` and a 2-D ``w`` of shape ``(in, out)``."""
    x = Tensor.wrap(x)
    w = Tensor.wrap(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"matmul shape mismatch: x{x.shape} @ W{w.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd
    rows = xd.size // xd.shape[-1]
    add_macs("linear", rows * wd.shape[0] * wd.shape[1])

    def backward(g):
        gx = g @ wd.T
        gw = xd.reshape(-1, wd.shape[0]).T @ g.reshape(-1, wd.shape[1])
        return gx, gw

    return Tensor._result(out, (x, w), backward)
