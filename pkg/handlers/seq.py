"""
Обработчики seq gen / seq classify
"""
import logging

from config import SeqClassifyConfig, SeqGenConfig
from handlers.common import emit
from services.dyadic import classify_sequence, generate_sequence, variation
from services.metrics import track_check


logger = logging.getLogger(__name__)


def handle_gen(cfg: SeqGenConfig) -> bool:
    terms = generate_sequence(cfg.kind, cfg.count)
    rows = [(k, t.value, variation(t), ";".join(str(e) for e in t.bits)) for k, t in enumerate(terms, start=1)]
    payload = {
        "kind": cfg.kind,
        "terms": [{"k": k, "value": v, "variation": var, "exponents": list(t.bits)}
                  for (k, v, var, _), t in zip(rows, terms)],
    }
    emit(cfg, payload, ("k", "value", "variation", "exponents"), rows)
    return True


def handle_classify(cfg: SeqClassifyConfig) -> bool:
    """Классификация явного префикса; nested/separated — информационные вердикты"""
    report = classify_sequence(cfg.terms, cfg.compare)
    track_check("nested", True, report.nested)
    track_check("separated", True, report.separated)
    logger.info(f"Classified {len(cfg.terms)} terms: nested={report.nested}, separated={report.separated}")
    emit(cfg, {"terms": cfg.terms, "report": report.to_dict()})
    return True
