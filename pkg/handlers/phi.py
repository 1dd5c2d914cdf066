"""
Обработчик phi: свойства φ_(n_k) по первым узлам
"""
import logging
from fractions import Fraction

from config import PhiConfig
from handlers.common import emit, sequence_source
from services.metrics import track_check
from services.phi import build_phi, check_phi_properties, spacing_rows


logger = logging.getLogger(__name__)


def handle(cfg: PhiConfig) -> bool:
    seq = sequence_source(cfg)
    knots = cfg.knots
    if seq.is_explicit:
        knots = min(knots, seq.available)
    phi = build_phi(seq.prefix(knots))
    report = check_phi_properties(phi, Fraction(cfg.delta2_bound))

    track_check("convex", report.convex)
    track_check("superlinear", report.superlinear_evidence)
    track_check("delta2", report.delta2, str(report.delta2_constant))
    if report.spacing is not None:
        track_check("spacing", report.spacing)

    rows = [(r.nu, r.delta, r.gap, r.gap_ok, r.bound_ok) for r in spacing_rows(phi)]
    payload = {
        "knots": phi.knot_count,
        "exponents": list(phi.exponents),
        "variations": list(phi.variations),
        "report": report.to_dict(),
    }
    emit(cfg, payload, ("nu", "delta", "gap", "gap_ok", "bound_ok"), rows)
    return report.convex and report.delta2 and report.spacing is not False
