"""
Обработчик witness: план уровней и выборочная проверка f*_J
"""
from config import WitnessConfig
from handlers.common import emit, sequence_source
from services.orlicz import PiecewiseConvex
from services.witness import plan_levels, sample_witness


WITNESS_COLUMNS = ("x_bits", "level", "cut_tag", "value", "threshold", "pass")


def handle(cfg: WitnessConfig) -> bool:
    seq = sequence_source(cfg)
    plan = plan_levels(seq, PiecewiseConvex.linear(cfg.phi_slope), cfg.horizon, cfg.grid_cap_log2)
    report = sample_witness(plan, cfg.samples, cfg.seed)

    rows = [tuple(row[c] for c in WITNESS_COLUMNS) for row in report.rows]
    payload = {"plan": plan.to_dict(), "report": report.to_dict(), "rows": [dict(row) for row in report.rows]}
    emit(cfg, payload, WITNESS_COLUMNS, rows)
    return report.passed
