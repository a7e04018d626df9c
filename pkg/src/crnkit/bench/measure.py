"""Instrumented forward passes: MAC counts plus wall-clock spread."""
import csv
import time
from dataclasses import asdict, dataclass, field
from typing import Dict

import numpy as np

from ..diffcore.nn import Initializer
from ..diffcore.tensor import Tensor, count_macs, no_grad
from ..errors import ContractError
from ..hcrn.visual import VisualStream
from .cost import cost_hcrn

CSV_COLUMNS = (
    "config_id",
    "levels",
    "N",
    "T",
    "P",
    "Q",
    "F",
    "analytic_g",
    "analytic_h",
    "macs",
    "wall_ms_median",
    "wall_ms_iqr",
)


@dataclass
class CostReport:
    config_id: str
    levels: float
    N: int
    T: int
    P: int
    Q: int
    F: int
    analytic_g: float
    analytic_h: float
    macs: int
    wall_ms_median: float
    wall_ms_iqr: float
    macs_by_op: Dict[str, int] = field(default_factory=dict)
    wall_ms: tuple = ()

    def row(self):
        d = asdict(self)
        return {k: d[k] for k in CSV_COLUMNS}


def config_id(cfg):
    if cfg.levels == 3:
        return f"L3-N{cfg.N}-T{cfg.T}-P{cfg.P}-Q{cfg.Q}-F{cfg.d}"
    return f"L{cfg.levels:g}-N{cfg.N}-T{cfg.T}-F{cfg.d}"


def _inputs(cfg, batch, seed):
    rng = np.random.default_rng([seed, 3])
    d = cfg.d
    app = Tensor(rng.normal(size=(batch, cfg.N, cfg.T, d)))
    mot = Tensor(rng.normal(size=(batch, cfg.N, d))) if cfg.uses_motion else None
    q = Tensor(rng.normal(size=(batch, d)))
    return app, mot, q


def measure(cfg, repeats=5, seed=0, batch=1, warmup=1):
    """Run the visual stream of ``cfg`` forward and report its cost.

    The MAC count comes from a single instrumented pass (it does not depend
    on ``repeats``); wall-clock is the median and interquartile range of
    ``repeats`` timed passes after ``warmup`` untimed ones.
    """
    if repeats < 3:
        raise ContractError(f"measure needs repeats >= 3, got {repeats}")
    stream = VisualStream(Initializer(seed), cfg)
    app, mot, q = _inputs(cfg, batch, seed)
    with no_grad():
        with count_macs() as counter:
            stream(app, mot, q, seed=seed)
        for _ in range(warmup):
            stream(app, mot, q, seed=seed)
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            stream(app, mot, q, seed=seed)
            times.append((time.perf_counter() - start) * 1e3)
    analytic = cost_hcrn(cfg)
    q1, med, q3 = np.percentile(times, [25, 50, 75])
    return CostReport(
        config_id=config_id(cfg),
        levels=cfg.levels,
        N=cfg.N,
        T=cfg.T,
        P=cfg.P or 0,
        Q=cfg.Q or 0,
        F=cfg.d,
        analytic_g=analytic.g,
        analytic_h=analytic.h,
        macs=counter.total,
        wall_ms_median=float(med),
        wall_ms_iqr=float(q3 - q1),
        macs_by_op=dict(counter.by_op),
        wall_ms=tuple(times),
    )


def write_csv(reports, fh):
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerow(r.row())


def compare(shallow, deep):
    """One-line summary of a depth pair."""
    mac_ratio = shallow.macs / deep.macs if deep.macs else float("inf")
    wall_ratio = shallow.wall_ms_median / deep.wall_ms_median if deep.wall_ms_median else float("inf")
    return (
        f"{shallow.config_id} vs {deep.config_id}: macs {shallow.macs} -> {deep.macs} "
        f"({mac_ratio:.2f}x), wall median {shallow.wall_ms_median:.1f} ms -> "
        f"{deep.wall_ms_median:.1f} ms ({wall_ratio:.2f}x)"
    )
