"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import time

import numpy as np
import pytest

from crnkit.bench import cost_crn, measure, table_config
from crnkit.checks import SUITES, TOLERANCE, run_suite
from crnkit.config import parse_run_config
from crnkit.crn import CRN, ConditioningContext, CRNConfig
from crnkit.diffcore import Initializer, Tensor
from crnkit.diffcore.tensor import count_macs, no_grad
from crnkit.hcrn import VisualStream, VisualStreamConfig
from crnkit.training import resolve_bundles, train


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")

    return emit


def test_1_shape_contracts(report):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    failures = []
    for n in (2, 3, 5, 8, 16):
        crn = CRN(Initializer(0), "c", n, 4, CRNConfig(k_max=max(1, n - 1), t=2))
        out = crn(Tensor(rng.normal(size=(1, n, 1, 4))), ConditioningContext(Tensor(rng.normal(size=(1, 4)))), rng=rng)
        if len(out) != max(1, n - 2):
            failures.append(f"crn n={n}: {len(out)} outputs")
    for T in range(5, 13):
        s = VisualStream(Initializer(0), VisualStreamConfig(N=5, T=T, d=2))
        clips = s.clip_encode(Tensor(rng.normal(size=(1, 5, T, 2))), Tensor(rng.normal(size=(1, 5, 2))), Tensor(rng.normal(size=(1, 2))))
        if clips.shape[2] != T - 4:
            failures.append(f"clip T={T}: {clips.shape[2]}")
    for N in range(5, 11):
        for T in range(5, 11):
            s = VisualStream(Initializer(0), VisualStreamConfig(N=N, T=T, d=2))
            V, f, q = (Tensor(rng.normal(size=sh)) for sh in ((1, N, T, 2), (1, N, 2), (1, 2)))
            O = s.video_encode(s.clip_encode(V, f, q), s.video_motion_summary(s.proj_motion(f)), q)
            if O.shape[1] * O.shape[2] != (N - 4) * (T - 4) or s.plan.readout_slots != (N - 4) * (T - 4):
                failures.append(f"H' N={N} T={T}: {O.shape}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 10
    report(1, ok, f"{len(failures)} shape mismatches, {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 10


def test_2_gradient_suite(report):
    start = time.perf_counter()
    worst = {}
    for form in SUITES:
        dims = (5, 2, 4)
        worst[form] = max(run_suite(form, dims, eps=1e-5, seed=0).values())
    elapsed = time.perf_counter() - start
    bad = {k: v for k, v in worst.items() if not v < TOLERANCE}
    ok = not bad and elapsed < 120
    report(2, ok, f"max rel err {max(worst.values()):.2e} over {len(worst)} suites, {elapsed:.1f}s")
    assert not bad, bad
    assert elapsed < 120


def test_3_cost_model_fidelity(report):
    start = time.perf_counter()
    rel = {}
    for F in (32, 64):
        for k_max in (3, 7, 15):
            n = k_max + 1
            crn = CRN(Initializer(0), "c", n, F, CRNConfig(k_max=k_max, t=2, h_form="dual-multiplicative"))
            x = Tensor(np.random.default_rng(0).normal(size=(1, n, 1, F)))
            ctx = ConditioningContext(Tensor(np.ones((1, F))), Tensor(np.ones((1, F))))
            with no_grad(), count_macs() as counter:
                crn(x, ctx, rng=np.random.default_rng(0))
            g, h = cost_crn(2, k_max, 1, F)
            rel[(F, k_max)] = counter.total / (g + h) - 1
    elapsed = time.perf_counter() - start
    worst = max(abs(v) for v in rel.values())
    ok = worst <= 0.2 and elapsed < 60
    report(3, ok, f"worst MAC deviation {worst:+.1%} over {len(rel)} settings, {elapsed:.1f}s")
    assert worst <= 0.2, rel
    assert elapsed < 60


def test_4_depth_saves_work(report):
    start = time.perf_counter()
    shallow = measure(table_config(2, F=32), repeats=15, seed=0, warmup=3)
    deep = measure(table_config(3, F=32), repeats=15, seed=0, warmup=3)
    elapsed = time.perf_counter() - start
    wall = shallow.wall_ms_median / deep.wall_ms_median
    ok = deep.macs < shallow.macs and wall >= 1.3 and elapsed < 300
    report(4, ok, f"MACs {shallow.macs} -> {deep.macs}, wall-clock ratio {wall:.2f}x, {elapsed:.1f}s")
    assert deep.macs < shallow.macs
    assert wall >= 1.3
    assert elapsed < 300


def _count_run(k_max, t, seed):
    cfg = parse_run_config(
        {
            "model": {"task": {"kind": "count"}, "visual": {"N": 8, "T": 8, "d": 32}, "d": 32},
            "data": {
                "synthetic": {"kind": "count", "samples": 2000, "N": 8, "T": 8, "d": 32, "motif_range": [0, 16], "noise": 0.2},
                "eval_samples": 500,
                "eval_seed": 1,
            },
            "optim": {"lr": 1e-3, "epochs": 25},
            "crn": {"k_max": k_max, "t": t},
            "seed": seed,
        }
    )
    tr, ev = resolve_bundles(cfg)
    return train(cfg, tr, ev).history[-1]["eval_mse"]


@pytest.mark.slow
def test_5_relations_help(report):
    start = time.perf_counter()
    seeds = (0, 1, 2)
    with_rel = [_count_run("n-1", 2, s) for s in seeds]
    without = [_count_run(1, 1, s) for s in seeds]
    elapsed = time.perf_counter() - start
    a, b = float(np.mean(with_rel)), float(np.mean(without))
    gain = 1 - a / b
    ok = gain >= 0.1 and elapsed < 1800
    report(5, ok, f"eval MSE {a:.2f} (relations) vs {b:.2f} (none), {gain:.0%} lower, {elapsed:.0f}s")
    assert gain >= 0.1
    assert elapsed < 1800


def _choice_run(textual):
    model = {"task": {"kind": "multi-choice", "num_choices": 5, "loss": "cross-entropy"}, "d": 32}
    if textual:
        model["textual"] = {"M": 6, "max_len": 48, "d": 32}
    cfg = parse_run_config(
        {
            "model": model,
            "data": {
                "synthetic": {"kind": "longform-choice", "samples": 2000, "d": 32, "A": 5, "S": 48, "noise": 0.2},
                "eval_samples": 1000,
                "eval_seed": 1,
            },
            "optim": {"lr": 3e-3, "epochs": 25},
            "seed": 0,
        }
    )
    tr, ev = resolve_bundles(cfg)
    return train(cfg, tr, ev).history[-1]["eval_accuracy"]


@pytest.mark.slow
def test_6_textual_preselection_helps(report):
    start = time.perf_counter()
    full = _choice_run(textual=True)
    baseline = _choice_run(textual=False)
    elapsed = time.perf_counter() - start
    chance = 1 / 5
    ok = full >= 0.9 and abs(baseline - chance) <= 0.05 and elapsed < 1200
    report(6, ok, f"accuracy {full:.3f} (textual stream) vs {baseline:.3f} (question only, chance {chance:.2f}), {elapsed:.0f}s")
    assert full >= 0.9
    assert abs(baseline - chance) <= 0.05
    assert elapsed < 1200


def test_7_determinism(report):
    crn = CRN(Initializer(0), "c", 9, 4, CRNConfig(k_max=8, t=3))
    subsets_equal = all(
        np.array_equal(a, b)
        for a, b in zip(crn.draw_subsets(np.random.default_rng(5)), crn.draw_subsets(np.random.default_rng(5)))
    )
    raw = {
        "model": {"task": {"kind": "open-ended", "num_answers": 2}, "visual": {"N": 5, "T": 6, "d": 8}, "d": 8},
        "data": {"synthetic": {"kind": "transition", "samples": 24, "N": 5, "T": 6, "d": 8}, "eval_samples": 8},
        "optim": {"lr": 1e-3, "batch": 8, "epochs": 2},
        "seed": 3,
    }
    runs = []
    for _ in range(2):
        cfg = parse_run_config(raw)
        tr, ev = resolve_bundles(cfg)
        runs.append(train(cfg, tr, ev).losses)
    losses_equal = runs[0] == runs[1]
    cfg = table_config(2, N=6, T=6, F=8)
    macs_equal = measure(cfg, repeats=3, seed=1).macs == measure(cfg, repeats=3, seed=1).macs
    ok = subsets_equal and losses_equal and macs_equal
    report(7, ok, f"subsets {subsets_equal}, losses {losses_equal} ({len(runs[0])} steps), MACs {macs_equal}")
    assert ok
