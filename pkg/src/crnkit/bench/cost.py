"""Analytic inference cost of CRN units and hierarchies.

Constants are kept exactly as in the closed forms so that exact-evaluation
checks are well defined:

* one unit: ``g = (t/2) k_max (k_max-1) K F`` and ``h = (4t+2)(k_max-1) K F^2``
* two levels, leading order: ``2(T+N) L F`` and ``20 L F^2`` with ``L = N T``
* three levels, leading order: ``2(T + N/P + P) L F`` and ``30 L F^2``
"""
from dataclasses import dataclass, field
from typing import List

from ..hcrn.config import VisualStreamConfig, visual_plan


def cost_crn(t, k_max, K, F):
    """Return ``(cost_g, cost_h)`` of one CRN unit."""
    if t < 1 or k_max < 2 or K < 1 or F < 1:
        raise ValueError(f"cost_crn needs t>=1, k_max>=2, K,F>=1; got {(t, k_max, K, F)}")
    g = t / 2 * k_max * (k_max - 1) * K * F
    h = (4 * t + 2) * (k_max - 1) * K * F * F
    return g, h


@dataclass
class LevelCost:
    level: str
    g: float = 0.0
    h: float = 0.0


@dataclass
class HCRNCost:
    levels: List[LevelCost] = field(default_factory=list)

    @property
    def g(self):
        return sum(lv.g for lv in self.levels)

    @property
    def h(self):
        return sum(lv.h for lv in self.levels)

    @property
    def total(self):
        return self.g + self.h


def stage_cost(stage, F):
    """Cost of one planned unit over all its applications (``stage.rows``)."""
    if stage.mode == "relations":
        g, h = cost_crn(stage.t, stage.k_max, stage.K, F)
    elif stage.mode == "pair":
        g, h = cost_crn(1, 2, stage.K, F)
    else:
        # singleton: no aggregation, one fused tuple size
        g, h = 0.0, (4 * stage.t + 2) * stage.K * F * F
    return stage.rows * g, stage.rows * h


def cost_hcrn(config, F=None):
    """Exact level-wise sum of :func:`cost_crn` over every unit the visual stream runs.

    ``F`` defaults to the model width ``config.d``.
    """
    F = F or config.d
    plan = visual_plan(config, strict=False)
    out = HCRNCost()
    by_level = {}
    for stage in plan.stages:
        lv = by_level.get(stage.level)
        if lv is None:
            lv = by_level[stage.level] = LevelCost(stage.level)
            out.levels.append(lv)
        g, h = stage_cost(stage, F)
        lv.g += g
        lv.h += h
    return out


def leading_cost(levels, N, T, F, P=None):
    """Leading-order ``(g, h)`` of the 2- or 3-level hierarchy."""
    L = N * T
    if levels == 2:
        return 2 * (T + N) * L * F, 20 * L * F * F
    if levels == 3:
        if not P:
            raise ValueError("3-level leading cost needs P")
        return 2 * (T + N / P + P) * L * F, 30 * L * F * F
    raise ValueError(f"leading-order cost defined for levels 2 and 3, got {levels}")


def depth_g_saving(N, T, F, P):
    """Drop in the leading g term from 2 to 3 levels: ``2(N - N/P - P) L F``."""
    return 2 * (N - N / P - P) * N * T * F


def crossover_width(N, P):
    """Width above which the leading-order 3-level cost exceeds the 2-level one.

    Solves ``2(N - N/P - P) L F = 10 L F^2``; a non-positive value means the
    deeper hierarchy never wins at leading order.
    """
    return (N - N / P - P) / 5


def table_config(levels, N=24, T=16, P=4, Q=6, F=64, **kw):
    """Visual stream config for the depth comparison grid."""
    if levels == 3:
        return VisualStreamConfig(levels=3, N=N, T=T, P=P, Q=Q, d=F, **kw)
    return VisualStreamConfig(levels=levels, N=N, T=T, d=F, **kw)
