"""Synthetic tasks with answers planted in the features.

Every generator keeps the signal exactly recoverable: background noise is
projected off the motif directions, so an oracle reading dot products with
the motifs reproduces the label for any noise scale.

* ``count``: a unit motif is added to ``c`` distinct frames; label ``c``.
* ``transition``: two orthogonal motifs land at frames ``i < j`` in order
  (label 1) or swapped (label 0).
* ``longform-choice``: each sample gets its own orthonormal question and
  ``A`` candidate answers; the token carrying ``question + answer_c`` marks
  the correct candidate while every other candidate appears alone at some
  other token. Label ``c``.
"""
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from ..errors import GenerationError
from .bundle import FeatureBundle

KINDS = ("count", "transition", "longform-choice")
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class SyntheticTaskSpec:
    """Recipe for a synthetic bundle.

    ``task_seed`` fixes what is shared by all samples of a task (motifs and
    the question vector) so that train and eval splits drawn with different
    ``seed`` values pose the same problem.
    """

    kind: str = "count"
    samples: int = 256
    N: int = 8
    T: int = 8
    d: int = 32
    motif_range: Tuple[int, int] = (0, 8)
    noise: float = 1.0
    seed: int = 0
    task_seed: int = 0
    A: int = 5
    S: int = 48
    appearance: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GenerationError(f"unknown task kind {self.kind!r}; expected one of {KINDS}")
        if self.samples < 1 or self.N < 1 or self.T < 1 or self.d < 2:
            raise GenerationError("samples, N, T must be positive and d >= 2")
        if self.noise < 0:
            raise GenerationError(f"noise scale must be >= 0, got {self.noise}")
        object.__setattr__(self, "motif_range", tuple(int(v) for v in self.motif_range))

    def to_dict(self):
        out = asdict(self)
        out["motif_range"] = list(self.motif_range)
        return out


def _orthonormal(rng, d, k):
    if k > d:
        raise GenerationError(f"cannot draw {k} orthonormal vectors in {d} dimensions")
    q, r = np.linalg.qr(rng.normal(size=(d, k)))
    # fix the sign ambiguity of QR so the draw is a deterministic function of rng
    return (q * np.sign(np.diag(r))).T


def _noise_off(rng, shape, basis, scale):
    """Gaussian noise of ``shape`` (..., d) with the span of ``basis`` (k, d) removed."""
    x = rng.normal(scale=scale, size=shape) if scale > 0 else np.zeros(shape)
    return x - (x @ basis.T) @ basis


def task_motifs(spec):
    """Motif directions shared by every sample of a count or transition task."""
    rng = np.random.default_rng([spec.task_seed, _KIND_CODE[spec.kind], 7])
    k = 1 if spec.kind == "count" else 2
    return _orthonormal(rng, spec.d, k + 1)


def _sample_rng(spec):
    return np.random.default_rng([spec.seed, _KIND_CODE[spec.kind], 11])


def gen_count_task(spec):
    lo, hi = spec.motif_range
    slots = spec.N * spec.T
    if lo < 0 or hi < lo:
        raise GenerationError(f"motif range {spec.motif_range} is not a valid interval")
    if hi > slots:
        raise GenerationError(f"cannot plant up to {hi} motifs in N*T={slots} frames")
    basis = task_motifs(spec)
    motif, question = basis[0], basis[1]
    rng = _sample_rng(spec)
    n, N, T, d = spec.samples, spec.N, spec.T, spec.d
    frames = _noise_off(rng, (n, N * T, d), motif[None], spec.noise)
    labels = rng.integers(lo, hi + 1, size=n)
    for i, c in enumerate(labels):
        where = rng.choice(slots, size=c, replace=False)
        frames[i, where] += motif
    motion = rng.normal(scale=spec.noise, size=(n, N, d))
    tensors = {
        "appearance": frames.reshape(n, N, T, d),
        "motion": motion,
        "question": np.broadcast_to(question, (n, d)),
        "motifs": motif[None],
        "labels": labels,
    }
    return _bundle("count", spec, tensors)


def gen_transition_task(spec):
    slots = spec.N * spec.T
    if slots < 2:
        raise GenerationError("transition task needs at least two frames")
    basis = task_motifs(spec)
    motifs, question = basis[:2], basis[2]
    rng = _sample_rng(spec)
    n, N, T, d = spec.samples, spec.N, spec.T, spec.d
    frames = _noise_off(rng, (n, slots, d), motifs, spec.noise)
    labels = rng.integers(0, 2, size=n)
    for s in range(n):
        i, j = np.sort(rng.choice(slots, size=2, replace=False))
        first, second = (0, 1) if labels[s] == 1 else (1, 0)
        frames[s, i] += motifs[first]
        frames[s, j] += motifs[second]
    tensors = {
        "appearance": frames.reshape(n, N, T, d),
        "motion": rng.normal(scale=spec.noise, size=(n, N, d)),
        "question": np.broadcast_to(question, (n, d)),
        "motifs": motifs,
        "labels": labels,
    }
    return _bundle("transition", spec, tensors)


def gen_longform_task(spec):
    A, S, d, n = spec.A, spec.S, spec.d, spec.samples
    if A < 2:
        raise GenerationError(f"need at least 2 candidates, got A={A}")
    if S < A:
        raise GenerationError(f"{A} candidates need at least {A} subtitle tokens, got S={S}")
    if d < A + 1:
        raise GenerationError(f"width d={d} cannot hold {A + 1} orthonormal vectors")
    rng = _sample_rng(spec)
    question = np.empty((n, d))
    choices = np.empty((n, A, d))
    subtitle = np.empty((n, S, d))
    labels = rng.integers(0, A, size=n)
    for s in range(n):
        basis = _orthonormal(rng, d, A + 1)
        q, a = basis[0], basis[1:]
        tokens = _noise_off(rng, (S, d), basis, spec.noise)
        where = rng.choice(S, size=A, replace=False)
        for j in range(A):
            tokens[where[j]] += a[j]
        tokens[where[labels[s]]] += q
        question[s], choices[s], subtitle[s] = q, a, tokens
    tensors = {"question": question, "choices": choices, "subtitle": subtitle}
    if spec.appearance:
        tensors["appearance"] = rng.normal(scale=max(spec.noise, 1.0), size=(n, spec.N, spec.T, d))
    tensors["labels"] = labels
    return _bundle("longform-choice", spec, tensors)


def _bundle(kind, spec, tensors):
    tensors = {k: np.ascontiguousarray(v, dtype=np.float32) for k, v in tensors.items()}
    meta = {"seed": str(spec.seed), "task_seed": str(spec.task_seed), "noise": repr(float(spec.noise))}
    return FeatureBundle(tensors=tensors, task=kind, meta=meta)


GENERATORS = {
    "count": gen_count_task,
    "transition": gen_transition_task,
    "longform-choice": gen_longform_task,
}


def generate(spec):
    return GENERATORS[spec.kind](spec)


def oracle_labels(bundle):
    """Recompute every label from the stored features alone."""
    kind = bundle.task
    if kind == "count":
        u = bundle["motifs"][0].astype(np.float64)
        proj = bundle["appearance"].astype(np.float64) @ u
        return (np.abs(proj - 1.0) < 0.5).sum(axis=(1, 2))
    if kind == "transition":
        m = bundle["motifs"].astype(np.float64)
        app = bundle["appearance"].astype(np.float64)
        flat = app.reshape(app.shape[0], -1, app.shape[-1])
        first = np.argmax(flat @ m[0], axis=1)
        second = np.argmax(flat @ m[1], axis=1)
        return (first < second).astype(np.int64)
    if kind == "longform-choice":
        q = bundle["question"].astype(np.float64)
        a = bundle["choices"].astype(np.float64)
        tok = bundle["subtitle"].astype(np.float64)
        on_q = np.einsum("nsd,nd->ns", tok, q) > 0.5
        on_a = np.einsum("nsd,nad->nsa", tok, a) > 0.5
        both = on_a & on_q[:, :, None]
        return np.argmax(both.any(axis=1), axis=1)
    raise GenerationError(f"no oracle for task {kind!r}")
