"""Finite-difference gradient suites shared by the CLI and the test-suite.

Each suite builds a small float64 component, a deterministic scalar loss
(inputs are contracted with fixed random weights so no symmetry hides a
wrong gradient) and returns the max relative error per tensor group.
"""
import numpy as np

from .crn import CRN, H_FORMS, ConditioningContext, CRNConfig
from .diffcore.gradcheck import check_gradients
from .diffcore.nn import BiLSTM, Initializer
from .diffcore.tensor import Tensor
from .errors import ConfigurationError
from .hcrn.config import AnswerTask, ModelConfig
from .hcrn.decoders import build_decoder
from .hcrn.model import HCRN
from .hcrn.readout import AttentionReadout

TOLERANCE = 1e-4
COMPONENTS = ("readout", "bilstm", "open-ended", "multi-choice", "count", "hcrn")
SUITES = H_FORMS + COMPONENTS


def _leaf(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _contract(out, rng):
    w = Tensor(rng.normal(size=out.shape))
    return (out * w).sum()


def _grouped(report, groups):
    """Collapse per-tensor errors to per-group maxima."""
    out = {}
    for name, err in report.items():
        group = groups.get(name, name)
        out[group] = max(out.get(group, 0.0), err)
    return out


def _crn_suite(form, dims, eps, rng, corrupt):
    n, K, F = dims
    k_max = max(1, n - 1)
    crn = CRN(Initializer(int(rng.integers(1 << 31))), "check", n, F, CRNConfig(k_max=k_max, t=2, h_form=form))
    x = _leaf(rng, 2, n, K, F)
    c1 = _leaf(rng, 2, F)
    c2 = _leaf(rng, 2, F) if form.startswith("dual-") else None
    subsets = crn.draw_subsets(np.random.default_rng(0))

    def fn(r):
        out = crn(x, ConditioningContext(c1, c2), subsets=subsets)
        return sum((_contract(o, r) for o in out), Tensor(0.0))

    loss = _fixed_weights(rng, fn)

    tensors = {"objects": x, "context": c1}
    groups = {}
    if c2 is not None:
        tensors["context2"] = c2
        groups["context2"] = "context"
    for name, p in crn.named_parameters():
        tensors[name] = p
        groups[name] = f"h[{form}]"
    return _grouped(check_gradients(loss, tensors, eps=eps, corrupt=corrupt), groups)


def _fixed_weights(rng, fn):
    """Make ``fn(rng)`` see the same random stream on every call."""
    state = rng.bit_generator.state

    def loss():
        rng.bit_generator.state = state
        return fn(rng)

    return loss


def _readout_suite(dims, eps, rng, corrupt):
    n, K, F = dims
    readout = AttentionReadout(Initializer(1), "readout", F, dual=True)
    O = _leaf(rng, 2, n, K, F)
    q = _leaf(rng, 2, F)
    a = _leaf(rng, 2, F)
    loss = _fixed_weights(rng, lambda r: _contract(readout(O, q, a), r))
    tensors = {"objects": O, "question": q, "answer": a}
    groups = {}
    for name, p in readout.named_parameters():
        tensors[name] = p
        groups[name] = "readout"
    return _grouped(check_gradients(loss, tensors, eps=eps, corrupt=corrupt), groups)


def _bilstm_suite(dims, eps, rng, corrupt):
    n, K, F = dims
    width = F + (F % 2)
    lstm = BiLSTM(Initializer(2), "bilstm", F, width)
    seq = _leaf(rng, 2, n, F)

    def fn(r):
        hiddens, final = lstm(seq)
        return _contract(hiddens, r) + _contract(final, r)

    tensors = {"sequence": seq}
    groups = {}
    for name, p in lstm.named_parameters():
        tensors[name] = p
        groups[name] = "bilstm"
    return _grouped(check_gradients(_fixed_weights(rng, fn), tensors, eps=eps, corrupt=corrupt), groups)


def _decoder_suite(kind, dims, eps, rng, corrupt):
    n, K, F = dims
    B, A, classes = 3, 4, 5
    task = AnswerTask(kind=kind, num_answers=classes)
    results = {}
    losses = ["hinge", "cross-entropy"] if kind == "multi-choice" else [None]
    for loss_kind in losses:
        task.loss = loss_kind
        dec = build_decoder(Initializer(3), task, F, streams=2, long_form=loss_kind == "cross-entropy")
        q = _leaf(rng, B, F)
        if kind == "multi-choice":
            o_v, o_t, a = _leaf(rng, B, A, F), _leaf(rng, B, A, F), _leaf(rng, B, A, F)
            labels = rng.integers(0, A, size=B)
        else:
            o_v, o_t, a = _leaf(rng, B, F), _leaf(rng, B, F), None
            labels = rng.integers(0, classes, size=B) if kind == "open-ended" else rng.normal(size=B) * 3

        def loss():
            q_rows = q.reshape(B, 1, F).broadcast_to((B, A, F)) if a is not None else q
            return dec.loss(dec([o_v, o_t], q_rows, a), labels)

        tensors = {"visual": o_v, "textual": o_t, "question": q}
        if a is not None:
            tensors["answer"] = a
        group = f"decoder[{kind}" + (f",{loss_kind}]" if loss_kind else "]")
        groups = {}
        for name, p in dec.named_parameters():
            tensors[name] = p
            groups[name] = group
        rep = _grouped(check_gradients(loss, tensors, eps=eps, corrupt=corrupt), groups)
        for k, v in rep.items():
            results[k] = max(results.get(k, 0.0), v)
    return results


def hcrn_gradcheck(eps=1e-5, seed=0, corrupt=0.0, d=8, N=5, T=5, probes=5):
    """Full 2-level model, every parameter group probed at ``probes`` random entries."""
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(
        task=AnswerTask(kind="open-ended", num_answers=4),
        visual={"levels": 2, "N": N, "T": T, "d": d},
        d=d,
        seed=seed,
    )
    model = HCRN(cfg)
    B = 2
    batch = {
        "question": rng.normal(size=(B, d)),
        "appearance": rng.normal(size=(B, N, T, d)),
        "motion": rng.normal(size=(B, N, d)),
        "labels": rng.integers(0, 4, size=B),
    }
    tensors = dict(model.named_parameters())
    groups = {}
    for name in tensors:
        if ".clip.motion" in name or ".video.motion" in name or "motion_lstm" in name or "proj_motion" in name:
            groups[name] = "motion units"
        elif ".clip.question" in name or ".video.question" in name:
            groups[name] = "question units"
        elif "readout" in name:
            groups[name] = "readout"
        elif name.startswith("decoder"):
            groups[name] = "decoder"
        else:
            groups[name] = "projections"
    rep = check_gradients(
        lambda: model.loss(batch, seed=seed),
        tensors,
        eps=eps,
        probes=probes,
        rng=np.random.default_rng(seed + 1),
        corrupt=corrupt,
    )
    return _grouped(rep, groups)


def run_suite(form, dims=(5, 2, 4), eps=1e-5, seed=0, corrupt=0.0):
    """Max relative error per group for one suite name (see :data:`SUITES`)."""
    if form not in SUITES:
        raise ConfigurationError(f"unknown gradcheck form {form!r}; expected one of {SUITES}")
    if eps <= 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    dims = tuple(int(v) for v in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ConfigurationError(f"dims must be three positive ints n,K,F; got {dims}")
    rng = np.random.default_rng(seed)
    if form in H_FORMS:
        if dims[2] % 2 and form.endswith("sequential"):
            raise ConfigurationError("sequential forms need an even width F")
        return _crn_suite(form, dims, eps, rng, corrupt)
    if form == "readout":
        return _readout_suite(dims, eps, rng, corrupt)
    if form == "bilstm":
        return _bilstm_suite(dims, eps, rng, corrupt)
    if form == "hcrn":
        return hcrn_gradcheck(eps=eps, seed=seed, corrupt=corrupt)
    return _decoder_suite(form, dims, eps, rng, corrupt)
