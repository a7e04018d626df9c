"""Visual stream: clip-, (sub-video-) and video-level CRN stacks plus readout."""
import numpy as np

from ..crn import CRN, ConditioningContext, CRNConfig
from ..diffcore import functional as F
from ..diffcore.nn import LSTM, Linear, Module
from ..errors import ConfigurationError, DimensionError
from .config import visual_plan
from .readout import AttentionReadout


def _ctx(role, motion, q, a):
    if role == "motion":
        return ConditioningContext(motion)
    return ConditioningContext(q, a)


def _apply_stack(units, X, motion, q, a, seed):
    """Run ``units`` (list of (Stage, CRN)) on objects ``X`` of shape (..., n, K, F)."""
    for stage, crn in units:
        out = crn(X, _ctx(stage.role, motion, q, a), seed=seed)
        X = F.stack(out, axis=-3)
    return X


def _expand(v, lead_ndim):
    """Reshape a (..., d) context so it prefixes ``lead_ndim`` leading axes."""
    pad = lead_ndim - (v.ndim - 1)
    return v.reshape(v.shape[:-1] + (1,) * pad + (v.shape[-1],)) if pad > 0 else v


class VisualStream(Module):
    """Builds every CRN named by :func:`visual_plan` and runs them in order.

    Clip-level units are shared by all clips and sub-video units by all
    sub-videos: a single parameter set, applied along extra leading axes.
    """

    def __init__(self, init, cfg, dual=False, d_app=None, d_motion=None):
        self.cfg = cfg
        self.dual = dual
        d = cfg.d
        self.plan = visual_plan(cfg, dual=dual)
        d_app = d_app or cfg.d_app or d
        self.proj_app = Linear(init, "visual.proj_app", d_app, d, bias=False)
        if cfg.uses_motion:
            d_motion = d_motion or cfg.d_motion or d
            self.proj_motion = Linear(init, "visual.proj_motion", d_motion, d, bias=False)
        else:
            self.proj_motion = None
        roles = {(s.level, s.role) for s in self.plan.stages}
        needs_video_motion = ("video", "motion") in roles or ("top", "motion") in roles
        self.video_motion_lstm = (
            LSTM(init, "visual.video_motion_lstm", d, d) if needs_video_motion else None
        )
        self.subvideo_motion_lstm = (
            LSTM(init, "visual.subvideo_motion_lstm", d, d)
            if ("subvideo", "motion") in roles
            else None
        )
        self.units = []
        for stage in self.plan.stages:
            crn_cfg = CRNConfig(k_max=stage.k_max, t=stage.t, g_form=cfg.g_form, h_form=stage.h_form)
            self.units.append((stage, CRN(init, stage.name, stage.n, d, crn_cfg)))
        self.readout = AttentionReadout(init, "visual.readout", d, dual=dual)

    def _level(self, level):
        return [(s, c) for s, c in self.units if s.level == level]

    # -- pieces ------------------------------------------------------------
    def project(self, appearance, motion=None):
        V = self.proj_app(appearance)
        f = self.proj_motion(motion) if (self.proj_motion is not None and motion is not None) else None
        return V, f

    def clip_encode(self, frames, clip_motion, q, a=None, seed=0):
        """Frames (..., N, T, d) -> clip objects (..., N, T', d)."""
        X = frames.reshape(frames.shape[:-1] + (1, frames.shape[-1]))
        lead = X.ndim - 3
        m = clip_motion
        qq = _expand(q, lead)
        aa = _expand(a, lead) if a is not None else None
        X = _apply_stack(self._level("clip"), X, m, qq, aa, seed)
        return X.reshape(X.shape[:-2] + (X.shape[-1],))

    def video_motion_summary(self, clip_motions, lstm=None):
        lstm = lstm or self.video_motion_lstm
        if lstm is None:
            raise ConfigurationError("no motion-conditioned unit uses a video motion summary")
        return lstm.final_state(clip_motions)

    def video_encode(self, clips, video_motion, q, a=None, seed=0, level="video"):
        """Clip objects (..., n, K, d) -> video-level objects (..., n', K, d)."""
        lead = clips.ndim - 3
        qq = _expand(q, lead)
        aa = _expand(a, lead) if a is not None else None
        mm = _expand(video_motion, lead) if video_motion is not None else None
        return _apply_stack(self._level(level), clips, mm, qq, aa, seed)

    def hyperclip_encode(self, clips, motions, q, a=None, seed=0):
        """Group N clips into P sub-videos of Q clips and run the sub-video and top stacks."""
        cfg = self.cfg
        P, Q = cfg.P, cfg.Q
        lead = clips.shape[:-3]
        N, K, d = clips.shape[-3:]
        if N != P * Q:
            raise ConfigurationError(f"N={N} clips cannot be split into P={P} x Q={Q}")
        sub = clips.reshape(lead + (P, Q, K, d))
        sub_motion = None
        if self.subvideo_motion_lstm is not None:
            sub_motion = self.subvideo_motion_lstm.final_state(motions.reshape(lead + (P, Q, d)))
        sub = self.video_encode(sub, sub_motion, q, a, seed, level="subvideo")
        Qp = sub.shape[-3]
        top = sub.reshape(lead + (P, Qp * K, d))
        top_motion = None
        if self.video_motion_lstm is not None:
            top_motion = self.video_motion_lstm.final_state(motions)
        return self.video_encode(top, top_motion, q, a, seed, level="top")

    def attention_readout(self, O, q, a=None):
        return self.readout(O, q, a)

    # -- whole stream ------------------------------------------------------
    def __call__(self, appearance, motion, q, a=None, seed=0):
        """Return the question-guided visual summary ``(..., d)``.

        ``appearance`` is raw (..., N, T, d_app); ``motion`` raw (..., N, d_motion)
        or ``None`` when no motion unit is active.
        """
        cfg = self.cfg
        if appearance.shape[-3:-1] != (cfg.N, cfg.T):
            raise DimensionError(
                f"appearance grid {appearance.shape[-3:-1]} does not match N={cfg.N}, T={cfg.T}"
            )
        if cfg.uses_motion and motion is None:
            raise ConfigurationError("this visual stream needs clip motion features")
        V, f = self.project(appearance, motion if cfg.uses_motion else None)
        if cfg.levels == 1:
            key = V[..., cfg.T // 2, :]
            X = key.reshape(key.shape[:-1] + (1, key.shape[-1]))
            vm = self.video_motion_summary(f) if self.video_motion_lstm is not None else None
            O = self.video_encode(X, vm, q, a, seed)
            return self.readout(O, q, a)
        clips = self.clip_encode(V, f, q, a, seed)
        if cfg.levels == 1.5:
            return self.readout(clips.mean(axis=-3), q, a)
        if cfg.levels == 3:
            O = self.hyperclip_encode(clips, f, q, a, seed)
            return self.readout(O, q, a)
        vm = self.video_motion_summary(f) if self.video_motion_lstm is not None else None
        O = self.video_encode(clips, vm, q, a, seed)
        return self.readout(O, q, a)


def longform_visual_forward(stream, appearance, q, a=None, seed=0, motion=None):
    """Long-form visual path: question-conditioned CRNs only, motion ignored."""
    if not stream.cfg.long_form:
        raise ConfigurationError("stream was not built with long_form=True")
    if motion is not None:
        import warnings

        warnings.warn("long-form visual stream ignores motion features", stacklevel=2)
    return stream(appearance, None, q, a, seed)


def readout_slots(O):
    """Number of attention slots of a final object array (..., n, H, d)."""
    return int(np.prod(O.shape[-3:-1]))
