"""Training and evaluation loops over feature bundles."""
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List

import numpy as np

from .data.bundle import load_feature_bundle
from .data.synthetic import generate
from .diffcore.optim import Adam, step_decay
from .diffcore.tensor import no_grad
from .errors import ConfigurationError
from .hcrn.model import HCRN

BATCH_KEYS = ("question", "appearance", "motion", "subtitle", "choices", "labels")
TASK_OF_BUNDLE = {"count": "count", "transition": "open-ended", "longform-choice": "multi-choice"}


def step_seed(*parts):
    """Deterministic 32-bit seed for one (run, epoch, step) triple."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def batch_of(bundle, idx):
    return {k: bundle.tensors[k][idx] for k in BATCH_KEYS if k in bundle.tensors}


def build_model(model_cfg, bundle):
    """Instantiate :class:`HCRN`, taking raw feature widths from ``bundle``."""
    expected = TASK_OF_BUNDLE.get(bundle.task)
    if expected is not None and expected != model_cfg.task.kind:
        raise ConfigurationError(
            f"bundle task {bundle.task!r} needs a {expected!r} decoder, config asks for {model_cfg.task.kind!r}"
        )
    t = bundle.tensors
    if model_cfg.d_lang is None and "question" in t:
        model_cfg = replace(model_cfg, d_lang=int(t["question"].shape[-1]))
    d_app = int(t["appearance"].shape[-1]) if "appearance" in t else None
    d_motion = int(t["motion"].shape[-1]) if "motion" in t else None
    return HCRN(model_cfg, d_app=d_app, d_motion=d_motion)


def evaluate(model, bundle, batch=32, seed=0):
    """Task metric on a whole bundle.

    Count tasks report ``mse`` of the rounded predictions (and ``mse_raw``
    of the regression scores); the others report ``accuracy``.
    """
    n = len(bundle)
    preds, raw = [], []
    with no_grad():
        for b, start in enumerate(range(0, n, batch)):
            idx = np.arange(start, min(n, start + batch))
            out = model.forward(batch_of(bundle, idx), seed=step_seed(seed, 7919, b))
            raw.append(np.asarray(out.data))
            preds.append(model.decoder.predict(out))
    labels = np.asarray(bundle.labels)
    pred = np.concatenate(preds)
    if model.cfg.task.kind == "count":
        scores = np.concatenate(raw)
        return {
            "mse": float(np.mean((pred - labels) ** 2)),
            "mse_raw": float(np.mean((scores - labels) ** 2)),
        }
    return {"accuracy": float(np.mean(pred == labels.astype(np.int64)))}


@dataclass
class TrainResult:
    model: HCRN
    history: List[dict] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)


def train(run_cfg, train_bundle, eval_bundle=None, log=None, checkpoint=None):
    """Fit an :class:`HCRN` with Adam and step decay.

    Everything random (example order, subset draws) derives from
    ``run_cfg.seed``, so a rerun reproduces the loss trajectory bit for bit.

    Args:
        log: optional text stream receiving one JSON object per epoch.
        checkpoint: optional path for the final ``.npz`` parameter file.
    """
    opt_cfg = run_cfg.optim
    model = build_model(run_cfg.model, train_bundle)
    opt = Adam(model.parameters(), lr=opt_cfg.lr)
    period = opt_cfg.decay_period(model.cfg.task.kind)
    order_rng = np.random.default_rng([run_cfg.seed, 101])
    n = len(train_bundle)
    result = TrainResult(model)
    for epoch in range(opt_cfg.epochs):
        opt.lr = step_decay(opt_cfg.lr, epoch, period, opt_cfg.decay_factor)
        perm = order_rng.permutation(n)
        total, count = 0.0, 0
        for step, start in enumerate(range(0, n, opt_cfg.batch)):
            idx = perm[start : start + opt_cfg.batch]
            batch = batch_of(train_bundle, idx)
            opt.zero_grad()
            loss = model.loss(batch, seed=step_seed(run_cfg.seed, epoch, step))
            loss.backward()
            opt.step()
            value = float(loss.item())
            result.losses.append(value)
            total += value * len(idx)
            count += len(idx)
        record = {"epoch": epoch + 1, "lr": opt.lr, "train_loss": total / count}
        if eval_bundle is not None:
            metrics = evaluate(model, eval_bundle, opt_cfg.batch, seed=run_cfg.seed)
            record.update({f"eval_{k}": v for k, v in metrics.items()})
        result.history.append(record)
        if log is not None:
            log.write(json.dumps(record, sort_keys=True) + "\n")
            log.flush()
    if checkpoint is not None:
        save_checkpoint(model, checkpoint)
    return result


def save_checkpoint(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()
    with open(path, "wb") as fh:
        np.savez(fh, **state)


def load_checkpoint(model, path):
    with np.load(path) as data:
        model.load_state_dict({k: data[k] for k in data.files})
    return model


def header_line(command, **extra):
    """The only line of a metrics file that carries wall-clock time."""
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    return json.dumps({"header": command, "timestamp": stamp, **extra}, sort_keys=True)


def resolve_bundles(run_cfg):
    """Load or generate the train/eval bundles named by ``run_cfg.data``.

    Raises:
        FileNotFoundError: a named bundle file is missing.
    """
    data = run_cfg.data
    if data.train is not None:
        train_b = load_feature_bundle(data.train)
        eval_b = load_feature_bundle(data.eval) if data.eval else None
        return train_b, eval_b
    spec, eval_spec = data.specs()
    return generate(spec), generate(eval_spec)

