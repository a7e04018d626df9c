"""Full question-answering model: streams, shared language projection, decoder."""
from dataclasses import fields, replace

import numpy as np

from ..diffcore.nn import Initializer, Linear, Module
from ..diffcore.tensor import Tensor
from ..data.segmentation import truncate_or_pad
from ..errors import ConfigurationError, DimensionError
from .config import ModelConfig, TextualStreamConfig, VisualStreamConfig
from .decoders import build_decoder
from .textual import TextualStream
from .visual import VisualStream

_VISUAL_KEYS = {f.name for f in fields(VisualStreamConfig)}
_TEXTUAL_KEYS = {f.name for f in fields(TextualStreamConfig)}


class HCRN(Module):
    """Visual and/or textual streams feeding one answer decoder.

    Batches are mappings of numpy arrays:

    * ``question`` (B, d_lang)
    * ``appearance`` (B, N, T, d_app) when a visual stream exists
    * ``motion`` (B, N, d_motion), read only if some unit is motion-conditioned
    * ``subtitle`` (B, S, d_lang) when a textual stream exists
    * ``choices`` (B, A, d_lang) for multi-choice tasks
    * ``labels`` (B,) for :meth:`loss`

    Multi-choice inputs are evaluated once per candidate: every stream runs
    over an extra candidate axis and the answer feature conditions alongside
    the question. A model with neither stream is the question-only baseline.
    """

    def __init__(self, cfg, d_app=None, d_motion=None):
        if isinstance(cfg, dict):
            cfg = ModelConfig(**cfg)
        self.cfg = cfg
        d = cfg.d
        self.dtype = np.dtype(cfg.dtype)
        init = Initializer(cfg.seed, self.dtype)
        self.dual = cfg.task.kind == "multi-choice"
        self.lang = Linear(init, "lang.proj", cfg.d_lang or d, d, bias=False)
        self.visual = (
            VisualStream(init, cfg.visual, self.dual, d_app, d_motion) if cfg.visual is not None else None
        )
        self.textual = (
            TextualStream(init, cfg.textual, cfg.textual.max_len, self.dual)
            if cfg.textual is not None
            else None
        )
        streams = (self.visual is not None) + (self.textual is not None)
        self.decoder = build_decoder(init, cfg.task, d, streams, cfg.long_form)
        self._dims = (d_app, d_motion)

    @property
    def plan(self):
        return self.visual.plan if self.visual is not None else None

    def _raw(self, batch, key):
        if key not in batch:
            raise ConfigurationError(f"batch is missing {key!r}")
        return np.asarray(batch[key], dtype=self.dtype)

    def _input(self, batch, key):
        return Tensor(self._raw(batch, key))

    def forward(self, batch, seed=0):
        """Decoder output: probabilities (open-ended), scores (multi-choice) or counts."""
        q = self.lang(self._input(batch, "question"))
        a = None
        if self.dual:
            a = self.lang(self._input(batch, "choices"))
            if a.ndim != q.ndim + 1:
                raise DimensionError(f"choices must be (B, A, d), got {a.shape}")
            A = a.shape[-2]
            q_rows = q.reshape(q.shape[:-1] + (1, q.shape[-1])).broadcast_to(a.shape)
        else:
            A = None
            q_rows = q

        def per_choice(x, trailing):
            if A is None:
                return x
            lead = x.shape[: x.ndim - trailing]
            x = x.reshape(lead + (1,) + x.shape[x.ndim - trailing :])
            return x.broadcast_to(lead + (A,) + x.shape[x.ndim - trailing :])

        o_v = o_t = None
        if self.visual is not None:
            app = per_choice(self._input(batch, "appearance"), 3)
            mot = None
            if self.visual.cfg.uses_motion:
                mot = per_choice(self._input(batch, "motion"), 2)
            o_v = self.visual(app, mot, q_rows, a, seed)
        if self.textual is not None:
            raw = self._raw(batch, "subtitle")
            H = self.lang(Tensor(np.stack([truncate_or_pad(s, self.textual.S) for s in raw])))
            o_t = self.textual(per_choice(H, 2), q_rows, a, seed)
        return self.decoder([o_v, o_t], q_rows if self.dual else q, a)

    __call__ = forward

    def loss(self, batch, seed=0):
        return self.decoder.loss(self.forward(batch, seed), batch["labels"])

    def predict(self, batch, seed=0, out=None):
        out = self.forward(batch, seed) if out is None else out
        return self.decoder.predict(out)

    def ablate(self, **toggles):
        """A new model with some configuration switched, sharing every common parameter.

        Keys name fields of the visual or textual stream config (applied to
        whichever stream has them), or ``visual=None`` / ``textual=None`` to
        drop a stream.
        """
        cfg = self.cfg
        visual, textual = cfg.visual, cfg.textual
        v_changes, t_changes = {}, {}
        for key, value in toggles.items():
            if key in ("visual", "textual"):
                if value is not None:
                    raise ConfigurationError(f"{key}= accepts only None (drop the stream)")
                if key == "visual":
                    visual = None
                else:
                    textual = None
                continue
            hit = False
            if key in _VISUAL_KEYS and visual is not None:
                v_changes[key] = value
                hit = True
            if key in _TEXTUAL_KEYS and textual is not None:
                t_changes[key] = value
                hit = True
            if not hit:
                raise ConfigurationError(f"unknown ablation toggle {key!r}")
        if visual is not None and v_changes:
            visual = replace(visual, **v_changes)
        if textual is not None and t_changes:
            textual = replace(textual, **t_changes)
        new_cfg = replace(cfg, visual=visual, textual=textual)
        model = HCRN(new_cfg, *self._dims)
        mine = dict(self.named_parameters())
        for name, p in model.named_parameters():
            if name in mine and mine[name].shape == p.shape:
                p.data[...] = mine[name].data
        return model
