"""Textual stream: question-driven pre-selection, one passage-level CRN, max-pool."""
import numpy as np

from ..crn import CRN, ConditioningContext, CRNConfig
from ..data.segmentation import segment_subtitles
from ..diffcore import functional as F
from ..diffcore.nn import Linear, Module
from ..errors import ConfigurationError
from .config import resolve_k_max


class Preselect(Module):
    """``W [U; U*q]`` (plus ``U*a`` when answers condition too), no bias."""

    def __init__(self, init, name, d, dual=False):
        self.dual = dual
        self.W = Linear(init, f"{name}.W", (3 if dual else 2) * d, d, bias=False)

    def __call__(self, U, q, a=None):
        return textual_preselect(U, q, self, a)


def textual_preselect(U, q, params, a=None):
    """Row-wise modulation of ``U`` (..., R, d) by the question (and answer)."""
    qq = q.reshape(q.shape[:-1] + (1,) * (U.ndim - q.ndim) + (q.shape[-1],))
    blocks = [U, U * qq]
    if params.dual:
        if a is None:
            raise ConfigurationError("answer-conditioned pre-selection needs an answer feature")
        aa = a.reshape(a.shape[:-1] + (1,) * (U.ndim - a.ndim) + (a.shape[-1],))
        blocks.append(U * aa)
    return params.W(F.concat(blocks, axis=-1))


class TextualStream(Module):
    def __init__(self, init, cfg, S, dual=False):
        self.cfg = cfg
        self.S = int(S)
        if self.S > cfg.max_len:
            raise ConfigurationError(f"subtitle length {S} exceeds max_len={cfg.max_len}")
        self.spans = segment_subtitles(self.S, cfg.M)
        seg_len = self.spans[0][1]
        self.index = np.array([np.arange(s, s + length) for s, length in self.spans])
        d = cfg.d
        if cfg.preselect:
            self.pre_segment = Preselect(init, "textual.pre_segment", d, dual)
            self.pre_passage = Preselect(init, "textual.pre_passage", d, dual)
        else:
            self.pre_segment = self.pre_passage = None
        k_max = resolve_k_max(cfg.k_max, cfg.M)
        self.crn = CRN(
            init,
            "textual.crn",
            cfg.M,
            d,
            CRNConfig(k_max=k_max, t=cfg.t, g_form=cfg.g_form, h_form=cfg.h_form),
        )
        self.seg_len = seg_len

    def segments(self, H):
        """Cut token features (..., S, d) into (..., M, seg_len, d)."""
        return H[(Ellipsis, self.index, slice(None))]

    def __call__(self, H, q, a=None, seed=0):
        """Token features (..., S, d) -> textual summary (..., d)."""
        if H.shape[-2] != self.S:
            raise ConfigurationError(f"expected {self.S} subtitle tokens, got {H.shape[-2]}")
        U = self.segments(H)
        if self.pre_segment is not None:
            U = self.pre_segment(U, q, a)
            Hs = self.pre_passage(H, q, a)
        else:
            Hs = H
        c = Hs.max(axis=-2)
        if self.cfg.h_form.startswith("dual-"):
            ctx = ConditioningContext(c, q)
        else:
            ctx = ConditioningContext(c)
        out = F.stack(self.crn(U, ctx, seed=seed), axis=-3)
        # max over result objects and their rows
        flat = out.reshape(out.shape[:-3] + (out.shape[-3] * out.shape[-2], out.shape[-1]))
        return flat.max(axis=-2)


def textual_stream_forward(stream, H, q, a=None, seed=0):
    return stream(H, q, a, seed)
