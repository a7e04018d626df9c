"""Run configuration: strict JSON in, identical JSON out."""
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Union

from .data.synthetic import SyntheticTaskSpec
from .errors import ConfigurationError, GenerationError
from .hcrn.config import ModelConfig, from_dict

SEED_ENV = "CRNKIT_SEED"


@dataclass
class OptimConfig:
    """Adam with step decay; ``decay_every=None`` picks 5 epochs for count, 10 otherwise."""

    lr: float = 1e-4
    batch: int = 32
    epochs: int = 25
    decay_every: Optional[int] = None
    decay_factor: float = 0.5

    def __post_init__(self):
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigurationError(f"epochs must be an int >= 1, got {self.epochs!r}")
        if self.batch < 1:
            raise ConfigurationError(f"batch must be >= 1, got {self.batch}")
        if not self.lr > 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.decay_every is not None and self.decay_every < 1:
            raise ConfigurationError(f"decay_every must be >= 1, got {self.decay_every}")

    def decay_period(self, task_kind):
        if self.decay_every is not None:
            return self.decay_every
        return 5 if task_kind == "count" else 10


@dataclass
class CRNDefaults:
    """Relation settings written into each stream that does not set its own."""

    k_max: Union[str, int] = "n-1"
    t: int = 2


@dataclass
class DataConfig:
    """Where examples come from: bundle files, or a synthetic recipe.

    With ``synthetic`` set, the training split is generated with the recipe's
    ``seed`` and the evaluation split with ``eval_seed`` (same ``task_seed``,
    ``eval_samples`` examples).
    """

    train: Optional[str] = None
    eval: Optional[str] = None
    synthetic: Optional[dict] = None
    eval_samples: int = 500
    eval_seed: int = 1

    def __post_init__(self):
        if self.synthetic is not None:
            try:
                spec = SyntheticTaskSpec(**self.synthetic)
            except TypeError as exc:
                raise ConfigurationError(f"bad synthetic recipe: {exc}") from exc
            except GenerationError as exc:
                raise ConfigurationError(str(exc)) from exc
            self.synthetic = spec.to_dict()
        elif self.train is None:
            raise ConfigurationError("data needs a train bundle path or a synthetic recipe")

    def specs(self):
        spec = SyntheticTaskSpec(**self.synthetic)
        eval_spec = SyntheticTaskSpec(**{**spec.to_dict(), "seed": self.eval_seed, "samples": self.eval_samples})
        return spec, eval_spec


@dataclass
class RunConfig:
    model: ModelConfig
    data: DataConfig
    optim: OptimConfig = field(default_factory=OptimConfig)
    crn: CRNDefaults = field(default_factory=CRNDefaults)
    seed: int = 0
    out_dir: str = "runs/default"

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "data": asdict(self.data),
            "optim": asdict(self.optim),
            "crn": asdict(self.crn),
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _stream_with_defaults(stream, crn):
    if stream is None:
        return None
    if not isinstance(stream, dict):
        raise ConfigurationError("stream configs must be JSON objects")
    return {"k_max": crn.k_max, "t": crn.t, **stream}


def parse_run_config(data):
    """Build a :class:`RunConfig` from a parsed JSON object; unknown keys are errors."""
    if not isinstance(data, dict):
        raise ConfigurationError("run config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown keys for RunConfig: {sorted(unknown)}")
    for key in ("model", "data"):
        if key not in data:
            raise ConfigurationError(f"run config needs a {key!r} section")
    crn = from_dict(CRNDefaults, data.get("crn", {}))
    model = dict(data["model"]) if isinstance(data["model"], dict) else data["model"]
    if not isinstance(model, dict):
        raise ConfigurationError("model section must be a JSON object")
    model_known = {f.name for f in fields(ModelConfig)}
    bad = set(model) - model_known
    if bad:
        raise ConfigurationError(f"unknown keys for ModelConfig: {sorted(bad)}")
    for key in ("visual", "textual"):
        model[key] = _stream_with_defaults(model.get(key), crn)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigurationError(f"seed must be an int, got {seed!r}")
    model.setdefault("seed", seed)
    return RunConfig(
        model=ModelConfig(**model),
        data=from_dict(DataConfig, data["data"]),
        optim=from_dict(OptimConfig, data.get("optim", {})),
        crn=crn,
        seed=seed,
        out_dir=data.get("out_dir", "runs/default"),
    )


def load_run_config(path, env=None):
    """Read a run config file and apply the seed override from the environment."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    cfg = parse_run_config(data)
    return apply_seed_override(cfg, env)


def apply_seed_override(cfg, env=None):
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV)
    if raw is None or raw == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc
    cfg.seed = seed
    cfg.model.seed = seed
    return cfg
