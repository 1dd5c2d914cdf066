"""
Обработчик kernel: таблица ‖D_n‖₁ против V(n)
"""
from config import KernelConfig
from handlers.common import emit
from services.metrics import track_check
from services.walsh import kernel_table


def handle(cfg: KernelConfig) -> bool:
    rows = kernel_table(cfg.n_max, cfg.resolution)
    ok = all(r.lower_ok and r.upper_ok for r in rows)
    bad = [r.n for r in rows if not (r.lower_ok and r.upper_ok)]
    track_check("kernel_sandwich", ok, len(rows), "" if ok else f"fails at n={bad[:5]}")

    table = [(r.n, r.variation, r.norm.numerator, r.norm.denominator, r.lower_ok, r.upper_ok) for r in rows]
    payload = {
        "n_max": cfg.n_max,
        "rows": [{"n": n, "variation": v, "norm": r.norm, "lower_ok": lo, "upper_ok": up}
                 for (n, v, _, _, lo, up), r in zip(table, rows)],
    }
    emit(cfg, payload, ("n", "V", "norm_num", "norm_den", "lower_ok", "upper_ok"), table)
    return ok
