"""Conditional Relation Network unit.

A CRN maps an array of ``n`` objects (each ``K x F``) plus one or two
conditioning vectors to an array of ``k_max - 1`` objects of the same shape.
For every tuple size ``k = 2..k_max`` it draws ``t`` random size-``k``
subsets, aggregates each subset (``g``), fuses it with the context (``h``)
and averages the ``t`` fused results (``p``).

Objects are carried as one tensor of shape ``(..., n, K, F)``; the leading
axes are batch rows (samples, clips, answer choices) that share one draw of
subsets per call.
"""
import zlib
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from .diffcore import functional as F
from .diffcore.nn import BiLSTM, Initializer, Linear, Module
from .diffcore.tensor import Tensor
from .errors import ConfigurationError, ContractError, DimensionError, SamplingError

G_FORMS = ("average-pool", "concat")
H_FORMS = (
    "additive",
    "multiplicative",
    "sequential",
    "dual-additive",
    "dual-multiplicative",
    "dual-sequential",
)


class ObjectArray:
    """Ordered array of ``n`` objects sharing one ``K x F`` shape.

    Wraps a tensor of shape ``(..., n, K, F)``; indexing returns single
    objects as ``(..., K, F)`` tensors.
    """

    def __init__(self, data):
        if not isinstance(data, Tensor):
            data = Tensor(data)
        if data.ndim < 3:
            raise DimensionError(f"object array needs (..., n, K, F), got {data.shape}")
        if data.shape[-3] < 1:
            raise DimensionError("object array must hold at least one object")
        self.data = data

    @classmethod
    def from_objects(cls, objects):
        shapes = {tuple(o.shape) for o in objects}
        if len(shapes) != 1:
            raise DimensionError(f"objects have mixed shapes {sorted(shapes)}")
        return cls(F.stack(objects, axis=-3))

    @property
    def n(self):
        return self.data.shape[-3]

    @property
    def K(self):
        return self.data.shape[-2]

    @property
    def F(self):
        return self.data.shape[-1]

    @property
    def lead_shape(self):
        return self.data.shape[:-3]

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.data[..., i, :, :]

    def objects(self):
        return [self[i] for i in range(self.n)]

    def __repr__(self):
        return f"ObjectArray(n={self.n}, K={self.K}, F={self.F}, lead={self.lead_shape})"


@dataclass
class ConditioningContext:
    """One or two context vectors, shape ``(..., F)`` each."""

    c1: Tensor
    c2: Optional[Tensor] = None

    def __post_init__(self):
        self.c1 = Tensor.wrap(self.c1)
        if self.c2 is not None:
            self.c2 = Tensor.wrap(self.c2)
            if self.c2.shape[-1] != self.c1.shape[-1]:
                raise DimensionError(
                    f"context widths differ: {self.c1.shape} vs {self.c2.shape}"
                )

    @property
    def width(self):
        return self.c1.shape[-1]


@dataclass
class CRNConfig:
    k_max: int
    t: int = 2
    g_form: str = "average-pool"
    h_form: str = "multiplicative"
    rng_seed: int = 0

    def __post_init__(self):
        if self.g_form not in G_FORMS:
            raise ConfigurationError(f"unknown g form {self.g_form!r}; expected one of {G_FORMS}")
        if self.h_form not in H_FORMS:
            raise ConfigurationError(f"unknown h form {self.h_form!r}; expected one of {H_FORMS}")
        if self.t < 1:
            raise ConfigurationError(f"t must be >= 1, got {self.t}")
        if self.k_max < 1:
            raise ConfigurationError(f"k_max must be >= 1, got {self.k_max}")


def _draw(n, k, t, rng):
    keys = rng.random((t, n))
    idx = np.argsort(keys, axis=1, kind="stable")[:, :k]
    # members kept in temporal order; matters only for concat-g
    return np.sort(idx, axis=1).astype(np.int64)


def sample_subsets(n, k, t, rng):
    """Draw ``t`` independent size-``k`` subsets of ``range(n)``.

    Each subset holds ``k`` distinct indices (sorted ascending); the same
    subset may come up in more than one draw.

    Raises:
        ContractError: ``k < 2`` or ``k > n``.
        SamplingError: ``t >= C(n, k)``.
    """
    if k > n or k < 2:
        raise ContractError(f"subset size k={k} must satisfy 2 <= k <= n={n}")
    total = comb(n, k)
    if t >= total:
        raise SamplingError(f"t={t} must be < C({n},{k})={total}")
    return _draw(n, k, t, rng)


def g_aggregate(subset, form="average-pool"):
    """Aggregate a subset of objects ``(..., k, K, F)``.

    average-pool returns ``(..., K, F)``; concat joins the members along the
    feature axis giving ``(..., K, k*F)``.
    """
    if form == "average-pool":
        return subset.mean(axis=-3)
    if form == "concat":
        k, K, Fw = subset.shape[-3:]
        lead = subset.shape[:-3]
        axes = tuple(range(len(lead))) + (len(lead) + 1, len(lead), len(lead) + 2)
        return subset.transpose(axes).reshape(lead + (K, k * Fw))
    raise ConfigurationError(f"unknown g form {form!r}")


def _fusion_inputs(x, ctx, form):
    """Build the list of blocks concatenated before the h weight."""
    dual = form.startswith("dual-")
    if dual and ctx.c2 is None:
        raise ConfigurationError(f"h form {form!r} needs a second context feature")
    base = form[5:] if dual else form
    ctxs = [ctx.c1, ctx.c2] if dual else [ctx.c1]
    lead_ndim = x.ndim - 1
    expanded = []
    for c in ctxs:
        if c.shape[-1] != x.shape[-1]:
            raise DimensionError(
                f"context width {c.shape[-1]} does not match object width {x.shape[-1]}"
            )
        # (..., F) -> (..., 1, ..., 1, F) so it broadcasts over subset and K axes
        pad = lead_ndim - (c.ndim - 1)
        c = c.reshape(c.shape[:-1] + (1,) * pad + (c.shape[-1],))
        expanded.append(c.broadcast_to(x.shape))
    if base == "additive":
        return [x] + expanded
    return [x] + [x * c for c in expanded] + expanded


def fusion_width(form, F_width):
    dual = form.startswith("dual-")
    base = form[5:] if dual else form
    n_ctx = 2 if dual else 1
    if base == "additive":
        return (1 + n_ctx) * F_width
    return (1 + 2 * n_ctx) * F_width


class HCondition(Module):
    """Parameters of one conditioning sub-network ``h^k``.

    Non-sequential forms compute ``ELU(W [blocks])`` with no bias; the
    sequential forms run a BiLSTM along the K axis of the concatenated
    blocks and max-pool over K, so they emit ``1 x F`` objects.
    """

    def __init__(self, init, name, form, F_width):
        if form not in H_FORMS:
            raise ConfigurationError(f"unknown h form {form!r}; expected one of {H_FORMS}")
        self.form = form
        width = fusion_width(form, F_width)
        if form.endswith("sequential"):
            self.W = None
            self.lstm = BiLSTM(init, f"{name}.bilstm", width, F_width)
        else:
            self.W = init.weight(f"{name}.W", width, F_width)
            self.lstm = None

    def __call__(self, x, ctx):
        blocks = _fusion_inputs(x, ctx, self.form)
        s = F.concat(blocks, axis=-1)
        if self.lstm is None:
            return F.elu(F.linear(s, self.W))
        hiddens, _ = self.lstm(s)
        return hiddens.max(axis=-2, keepdims=True)


def h_condition(g_out, ctx, form, params):
    """Fuse aggregated subsets ``g_out`` (``(..., K, F)``) with ``ctx`` using ``params``."""
    if params.form != form:
        raise ConfigurationError(f"params built for {params.form!r}, asked for {form!r}")
    return params(g_out, ctx)


class CRN(Module):
    """One CRN unit with per-``k`` parameters.

    ``n`` is fixed at construction because the set of tuple sizes (and so the
    parameter set) depends on it. Modes:

    * ``relations``: ``2 <= k_max < n``; outputs ``k_max - 1`` objects.
    * ``pair``: ``n == 2``; the single full subset is used once, one output.
    * ``singleton``: ``k_max == 1`` with ``n != 2`` (the no-relation ablation);
      ``t`` single objects are drawn, ``g`` is the identity, one output.
    """

    def __init__(self, init, name, n, F_width, config):
        self.name = name
        self.n = int(n)
        self.F = int(F_width)
        self.config = config
        self.uid = zlib.crc32(name.encode("utf-8"))
        k_max, t = config.k_max, config.t
        if self.n < 1:
            raise ConfigurationError(f"{name}: CRN needs n >= 1, got {n}")
        if self.n == 2 and k_max in (1, 2):
            self.mode = "pair"
            self.ks = [2]
        elif k_max == 1:
            self.mode = "singleton"
            self.ks = [1]
            if t > self.n:
                raise SamplingError(f"{name}: t={t} singletons exceed n={self.n}")
        else:
            if not 2 <= k_max < self.n:
                raise ConfigurationError(
                    f"{name}: k_max={k_max} must satisfy 1 <= k_max < n={self.n}"
                )
            for k in range(2, k_max + 1):
                if t >= comb(self.n, k):
                    raise SamplingError(
                        f"{name}: t={t} must be < C({self.n},{k})={comb(self.n, k)}"
                    )
            self.mode = "relations"
            self.ks = list(range(2, k_max + 1))
        self.h = {k: HCondition(init, f"{name}.h{k}", config.h_form, self.F) for k in self.ks}
        if config.g_form == "concat":
            self.g_proj = {
                k: Linear(init, f"{name}.g{k}", k * self.F, self.F, bias=False)
                for k in self.ks
                if k > 1
            }
        else:
            self.g_proj = {}

    @property
    def out_len(self):
        return len(self.ks)

    def draw_subsets(self, rng):
        """Subsets for every k this unit evaluates, as a dict k -> (t, k) array."""
        t = self.config.t
        if self.mode == "pair":
            return {2: np.array([[0, 1]], dtype=np.int64)}
        if self.mode == "singleton":
            return {1: rng.integers(0, self.n, size=(t, 1)).astype(np.int64)}
        return {k: sample_subsets(self.n, k, t, rng) for k in self.ks}

    def rng_for(self, seed):
        return np.random.default_rng([int(seed), self.uid])

    def __call__(self, objects, ctx, seed=None, rng=None, subsets=None):
        """Run the unit and return the result array as a list of ``(..., K, F)`` tensors."""
        X = objects.data if isinstance(objects, ObjectArray) else Tensor.wrap(objects)
        if X.ndim < 3:
            raise DimensionError(f"{self.name}: objects need (..., n, K, F), got {X.shape}")
        if X.shape[-3] != self.n:
            raise DimensionError(f"{self.name}: built for n={self.n}, got {X.shape[-3]} objects")
        if X.shape[-1] != self.F:
            raise DimensionError(f"{self.name}: built for F={self.F}, got width {X.shape[-1]}")
        if not isinstance(ctx, ConditioningContext):
            ctx = ConditioningContext(ctx)
        if subsets is None:
            if rng is None:
                rng = self.rng_for(self.config.rng_seed if seed is None else seed)
            subsets = self.draw_subsets(rng)
        results = []
        for k in self.ks:
            idx = np.asarray(subsets[k], dtype=np.int64)
            if self.config.g_form == "concat" and k > 1:
                g = g_aggregate(F.gather(X, idx), "concat")
                g = self.g_proj[k](g)
            else:
                g = F.subset_mean(X, idx)
            h = self.h[k](g, ctx)
            results.append(h.mean(axis=-3))
        return results


def crn_forward(objects, ctx, config=None, params=None, init=None, seed=None, rng=None, subsets=None):
    """Functional entry point returning the result array as an :class:`ObjectArray`.

    ``params`` is a :class:`CRN` holding the per-k weights. When omitted a
    fresh unit is built from ``config`` and ``init``.
    """
    X = objects if isinstance(objects, ObjectArray) else ObjectArray(objects)
    if params is None:
        if config is None:
            raise ConfigurationError("crn_forward needs either params or config")
        params = CRN(init or Initializer(), "crn", X.n, X.F, config)
    out = params(X, ctx, seed=seed, rng=rng, subsets=subsets)
    return ObjectArray(F.stack(out, axis=-3))
