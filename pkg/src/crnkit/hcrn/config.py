"""Configuration objects and the CRN stage plan shared by model and cost model."""
from dataclasses import asdict, dataclass, field, fields
from math import comb
from typing import List, Optional, Union

from ..crn import G_FORMS, H_FORMS
from ..errors import ConfigurationError

LEVELS = (1, 1.5, 2, 3)
TASK_KINDS = ("open-ended", "multi-choice", "count")


@dataclass
class VisualStreamConfig:
    levels: float = 2
    N: int = 8
    T: int = 16
    P: Optional[int] = None
    Q: Optional[int] = None
    d: int = 512
    clip_motion: bool = True
    clip_question: bool = True
    video_motion: bool = True
    video_question: bool = True
    long_form: bool = False
    k_max: Union[str, int] = "n-1"
    t: int = 2
    g_form: str = "average-pool"
    motion_form: str = "additive"
    question_form: str = "multiplicative"
    d_app: Optional[int] = None
    d_motion: Optional[int] = None

    def __post_init__(self):
        if self.levels not in LEVELS:
            raise ConfigurationError(f"levels must be one of {LEVELS}, got {self.levels}")
        if self.d % 2:
            raise ConfigurationError(f"model width d must be even, got {self.d}")
        if self.N < 1 or self.T < 1:
            raise ConfigurationError(f"N and T must be positive, got N={self.N}, T={self.T}")
        if self.levels == 3:
            if self.P is None or self.Q is None or self.P * self.Q != self.N:
                raise ConfigurationError(
                    f"3-level hierarchy needs N = P*Q, got N={self.N}, P={self.P}, Q={self.Q}"
                )
        if self.long_form and self.levels != 2:
            raise ConfigurationError("long-form visual stream is defined for levels=2 only")
        if self.g_form not in G_FORMS:
            raise ConfigurationError(f"unknown g form {self.g_form!r}")
        for f in (self.motion_form, self.question_form):
            if f not in H_FORMS or f.startswith("dual-"):
                raise ConfigurationError(
                    f"stream forms take single-context names (dual is derived), got {f!r}"
                )
        _check_policy(self.k_max)
        if self.t < 1:
            raise ConfigurationError(f"t must be >= 1, got {self.t}")

    @property
    def uses_motion(self):
        if self.long_form:
            return False
        if self.levels == 1.5:
            return self.clip_motion
        if self.levels == 1:
            return self.video_motion
        return self.clip_motion or self.video_motion


@dataclass
class TextualStreamConfig:
    M: int = 6
    max_len: int = 256
    d: int = 512
    preselect: bool = True
    h_form: str = "multiplicative"
    k_max: Union[str, int] = "n-1"
    t: int = 2
    g_form: str = "average-pool"

    def __post_init__(self):
        if self.M < 3:
            raise ConfigurationError(f"textual stream needs M >= 3 segments, got {self.M}")
        if self.max_len <= 0:
            raise ConfigurationError(f"max_len must be positive, got {self.max_len}")
        if self.h_form not in H_FORMS:
            raise ConfigurationError(f"unknown h form {self.h_form!r}")
        if self.g_form not in G_FORMS:
            raise ConfigurationError(f"unknown g form {self.g_form!r}")
        _check_policy(self.k_max)


@dataclass
class AnswerTask:
    kind: str = "open-ended"
    num_answers: int = 2
    num_choices: Optional[int] = None
    loss: Optional[str] = None

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigurationError(f"unknown task kind {self.kind!r}; expected {TASK_KINDS}")
        if self.kind == "open-ended" and self.num_answers < 2:
            raise ConfigurationError("open-ended task needs at least 2 answers")
        if self.kind == "multi-choice" and self.num_choices is not None and self.num_choices < 2:
            raise ConfigurationError("multi-choice task needs A >= 2 choices")
        if self.loss not in (None, "hinge", "cross-entropy", "mse"):
            raise ConfigurationError(f"unknown loss {self.loss!r}")


@dataclass
class ModelConfig:
    task: AnswerTask = field(default_factory=AnswerTask)
    visual: Optional[VisualStreamConfig] = None
    textual: Optional[TextualStreamConfig] = None
    d: int = 512
    d_lang: Optional[int] = None
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if isinstance(self.task, dict):
            self.task = from_dict(AnswerTask, self.task)
        if isinstance(self.visual, dict):
            self.visual = from_dict(VisualStreamConfig, self.visual)
        if isinstance(self.textual, dict):
            self.textual = from_dict(TextualStreamConfig, self.textual)
        for sub in (self.visual, self.textual):
            if sub is not None and sub.d != self.d:
                raise ConfigurationError(f"stream width {sub.d} differs from model width {self.d}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigurationError(f"dtype must be float64 or float32, got {self.dtype!r}")

    @property
    def long_form(self):
        return self.textual is not None or (self.visual is not None and self.visual.long_form)

    def to_dict(self):
        return asdict(self)


def _check_policy(policy):
    if isinstance(policy, bool) or not (policy == "n-1" or isinstance(policy, int)):
        raise ConfigurationError(f"k_max policy must be 'n-1' or an int, got {policy!r}")
    if isinstance(policy, int) and policy < 1:
        raise ConfigurationError(f"k_max must be >= 1, got {policy}")


def from_dict(cls, data):
    """Build dataclass ``cls`` from ``data``, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"{cls.__name__} expects an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    return cls(**data)


# -- stage plan -----------------------------------------------------------------


def resolve_k_max(policy, n):
    """Concrete k_max for an input of ``n`` objects, or ``None`` to skip the unit."""
    if policy == 1:
        return 1
    if n < 2:
        return None
    if n == 2:
        return 1
    if policy == "n-1":
        return n - 1
    return max(2, min(int(policy), n - 1))


def crn_out_len(n, k_max):
    if k_max is None:
        return n
    if k_max == 1:
        return 1
    return k_max - 1


@dataclass
class Stage:
    """One CRN unit in a stream, with the geometry it will see."""

    name: str
    level: str
    role: str  # "motion" or "question"
    n: int
    K: int
    k_max: int
    t: int
    h_form: str
    rows: int  # unit applications per sample (e.g. N for clip level)

    @property
    def out_len(self):
        return crn_out_len(self.n, self.k_max)

    @property
    def mode(self):
        if self.n == 2 and self.k_max in (1, 2):
            return "pair"
        if self.k_max == 1:
            return "singleton"
        return "relations"

    @property
    def t_eff(self):
        return 1 if self.mode == "pair" else self.t


@dataclass
class VisualPlan:
    stages: List[Stage]
    readout_slots: int
    final_K: int
    final_n: int


def _stack(cfg, level, roles, n, K, rows, strict, dual):
    """Append a stack of CRN units (in order) for one hierarchy level."""
    stages = []
    if strict and cfg.k_max == "n-1":
        need = 1 + 2 * len(roles)
        if len(roles) and n < need:
            raise ConfigurationError(
                f"{level} level: {len(roles)} stacked CRN(s) shrink the array by "
                f"{2 * len(roles)}, so it needs at least {need} objects, got {n}"
            )
    for role in roles:
        k_max = resolve_k_max(cfg.k_max, n)
        if k_max is None:
            continue
        form = cfg.motion_form if role == "motion" else cfg.question_form
        if role == "question" and dual:
            form = "dual-" + form
        stage = Stage(f"visual.{level}.{role}", level, role, n, K, k_max, cfg.t, form, rows)
        if strict and stage.mode == "relations":
            for k in range(2, k_max + 1):
                if cfg.t >= comb(n, k):
                    raise ConfigurationError(
                        f"{stage.name}: t={cfg.t} must be < C({n},{k})={comb(n, k)}"
                    )
        stages.append(stage)
        n = stage.out_len
    return stages, n


def visual_plan(cfg, dual=False, strict=True):
    """Lay out every CRN of the visual stream with its input geometry.

    ``dual`` switches question-conditioned units to the dual form (multi-choice
    answers condition alongside the question).
    """
    N, T = cfg.N, cfg.T
    stages = []
    if cfg.long_form:
        clip_roles = ["question"] if cfg.clip_question else []
        video_roles = ["question"] if cfg.video_question else []
        if strict:
            for lvl, n, roles in (("clip", T, clip_roles), ("video", N, video_roles)):
                if roles and cfg.k_max == "n-1" and n < 3:
                    raise ConfigurationError(f"long-form {lvl} level needs at least 3 objects, got {n}")
        s, Tp = _stack(cfg, "clip", clip_roles, T, 1, N, False, dual)
        stages += s
        s, Np = _stack(cfg, "video", video_roles, N, Tp, 1, False, dual)
        stages += s
        return VisualPlan(stages, Np * Tp, Tp, Np)

    clip_roles = [r for r, on in (("motion", cfg.clip_motion), ("question", cfg.clip_question)) if on]
    video_roles = [r for r, on in (("motion", cfg.video_motion), ("question", cfg.video_question)) if on]

    if cfg.levels == 1:
        s, Np = _stack(cfg, "video", video_roles, N, 1, 1, strict, dual)
        return VisualPlan(s, Np, 1, Np)

    s, Tp = _stack(cfg, "clip", clip_roles, T, 1, N, strict, dual)
    stages += s
    if cfg.levels == 1.5:
        return VisualPlan(stages, Tp, Tp, 1)
    if cfg.levels == 2:
        s, Np = _stack(cfg, "video", video_roles, N, Tp, 1, strict, dual)
        stages += s
        return VisualPlan(stages, Np * Tp, Tp, Np)

    P, Q = cfg.P, cfg.Q
    s, Qp = _stack(cfg, "subvideo", video_roles, Q, Tp, P, strict, dual)
    stages += s
    K_top = Qp * Tp
    if P >= 5:
        top_roles = video_roles
    else:
        top_roles = ["question"] if cfg.video_question else []
    s, Pp = _stack(cfg, "top", top_roles, P, K_top, 1, strict and P >= 5, dual)
    stages += s
    return VisualPlan(stages, Pp * K_top, K_top, Pp)
