"""
Обработчик relocate: перенос случайных многочленов в зазоры плана
"""
from config import RelocateConfig
from handlers.common import emit, sequence_source
from services.orlicz import PiecewiseConvex
from services.witness import plan_levels, relocate_batch


def handle(cfg: RelocateConfig) -> bool:
    seq = sequence_source(cfg)
    plan = plan_levels(seq, PiecewiseConvex.linear(), cfg.horizon, cfg.grid_cap_log2)
    results = relocate_batch(plan, cfg.count, cfg.seed)

    rows = []
    for item in results:
        d = item.to_dict()
        rows.append((d["r"], d["level"], d["degree"], ";".join(str(e) for e in d["delta_exponents"]),
                     d["support_min"], d["support_max"], item.passed))
    payload = {"plan": plan.to_dict(), "relocations": [item.to_dict() for item in results]}
    emit(cfg, payload, ("r", "level", "degree", "delta_exponents", "support_min", "support_max", "pass"), rows)
    return all(item.passed for item in results)
