"""Parameterised building blocks: modules, initialisation, LSTM."""
import zlib

import numpy as np

from ..errors import ConfigurationError
from . import functional as F
from .tensor import Parameter, Tensor

INIT_SCHEME = "glorot_uniform"


class Initializer:
    """Deterministic parameter factory.

    Each parameter's values depend only on ``(seed, name)``, so two models that
    share a parameter name start from identical weights even when one of them
    omits other components.
    """

    def __init__(self, seed=0, dtype=np.float64):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)

    def _rng(self, name):
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def weight(self, name, fan_in, fan_out, shape=None):
        shape = shape or (fan_in, fan_out)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        data = self._rng(name).uniform(-limit, limit, size=shape).astype(self.dtype)
        return Parameter(data, name=name)

    def zeros(self, name, shape):
        return Parameter(np.zeros(shape, dtype=self.dtype), name=name)


class Module:
    """Container that discovers Parameters and sub-Modules held as attributes."""

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Parameter):
                yield value.name or f"{prefix}{key}", value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")
                    elif isinstance(item, Parameter):
                        yield item.name or f"{prefix}{key}.{i}", item
            elif isinstance(value, dict):
                for k, item in value.items():
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{k}.")
                    elif isinstance(item, Parameter):
                        yield item.name or f"{prefix}{key}.{k}", item

    def parameters(self):
        seen = set()
        for _, p in self.named_parameters():
            if id(p) not in seen:
                seen.add(id(p))
                yield p

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise ConfigurationError(
                f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ConfigurationError(
                    f"state for {name} has shape {value.shape}, expected {p.shape}"
                )
            p.data[...] = value


class Linear(Module):
    def __init__(self, init, name, d_in, d_out, bias=True):
        self.W = init.weight(f"{name}.W", d_in, d_out)
        self.b = init.zeros(f"{name}.b", (d_out,)) if bias else None

    def __call__(self, x):
        return F.linear(x, self.W, self.b)


class LSTMCell(Module):
    """Standard LSTM cell; gate order in the fused weights is i, f, g, o."""

    def __init__(self, init, name, d_in, d_hidden):
        self.d_in = d_in
        self.d_hidden = d_hidden
        self.W_x = init.weight(f"{name}.W_x", d_in, 4 * d_hidden)
        self.W_h = init.weight(f"{name}.W_h", d_hidden, 4 * d_hidden)
        self.b = init.zeros(f"{name}.b", (4 * d_hidden,))

    def __call__(self, x, state):
        h, c = state
        gates = F.linear(x, self.W_x) + F.linear(h, self.W_h) + self.b
        H = self.d_hidden
        i = F.sigmoid(gates[..., 0:H])
        f = F.sigmoid(gates[..., H : 2 * H])
        g = F.tanh(gates[..., 2 * H : 3 * H])
        o = F.sigmoid(gates[..., 3 * H : 4 * H])
        c_new = f * c + i * g
        h_new = o * F.tanh(c_new)
        return h_new, c_new

    def zero_state(self, lead_shape, dtype):
        z = np.zeros(tuple(lead_shape) + (self.d_hidden,), dtype=dtype)
        return Tensor(z), Tensor(z.copy())


class LSTM(Module):
    """Unidirectional LSTM over axis ``-2`` of a ``(..., T, d_in)`` input."""

    def __init__(self, init, name, d_in, d_hidden):
        self.cell = LSTMCell(init, f"{name}.cell", d_in, d_hidden)

    def __call__(self, seq, reverse=False):
        steps = seq.shape[-2]
        state = self.cell.zero_state(seq.shape[:-2], seq.dtype)
        order = range(steps - 1, -1, -1) if reverse else range(steps)
        outputs = [None] * steps
        for t in order:
            state = self.cell(seq[..., t, :], state)
            outputs[t] = state[0]
        return outputs, state[0]

    def final_state(self, seq):
        return self(seq)[1]


class BiLSTM(Module):
    """Bidirectional LSTM with ``d_out / 2`` hidden units per direction."""

    def __init__(self, init, name, d_in, d_out):
        if d_out % 2:
            raise ConfigurationError(f"BiLSTM output width must be even, got {d_out}")
        self.fwd = LSTM(init, f"{name}.fwd", d_in, d_out // 2)
        self.bwd = LSTM(init, f"{name}.bwd", d_in, d_out // 2)

    def __call__(self, seq):
        """Return ``(hiddens (..., T, d_out), final (..., d_out))``.

        ``final`` joins the forward pass's state after the last step with the
        backward pass's state after the first step.
        """
        f_out, f_last = self.fwd(seq)
        b_out, b_last = self.bwd(seq, reverse=True)
        hiddens = F.stack(
            [F.concat([a, b], axis=-1) for a, b in zip(f_out, b_out)], axis=-2
        )
        final = F.concat([f_last, b_last], axis=-1)
        return hiddens, final


def lstm_cell(x, state, cell):
    """Functional alias: one step of ``cell`` on ``x``."""
    return cell(x, state)


def bilstm_encode(seq, d_out, init=None, name="bilstm", module=None):
    """Encode ``seq`` (``(..., T, d_in)``) with a BiLSTM of total width ``d_out``.

    Pass ``module`` to reuse trained weights; otherwise a fresh BiLSTM is
    built from ``init``.
    """
    if d_out % 2:
        raise ConfigurationError(f"BiLSTM output width must be even, got {d_out}")
    if module is None:
        module = BiLSTM(init or Initializer(), name, seq.shape[-1], d_out)
    return module(seq)
