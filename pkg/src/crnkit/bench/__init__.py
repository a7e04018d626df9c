"""Analytic cost model and instrumented measurement harness."""
from .cost import (
    HCRNCost,
    LevelCost,
    cost_crn,
    cost_hcrn,
    crossover_width,
    depth_g_saving,
    leading_cost,
    stage_cost,
    table_config,
)
from .measure import CSV_COLUMNS, CostReport, compare, config_id, measure, write_csv
