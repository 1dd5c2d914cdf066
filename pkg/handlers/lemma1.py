"""
Обработчик lemma1: построение P_ν, множество E_ν и оценка Орлича
"""
import logging

from config import Lemma1Config
from handlers.common import emit, sequence_source
from services.errors import PreconditionError
from services.lemma1 import construct_lemma1, extract_E
from services.metrics import metrics
from services.orlicz import PiecewiseConvex
from services.phi import build_phi
from services.witness import orlicz_bound_check


logger = logging.getLogger(__name__)


def handle(cfg: Lemma1Config) -> bool:
    seq = sequence_source(cfg)
    artifact = construct_lemma1(seq, cfg.nu, cfg.grid_cap_log2)
    report = extract_E(artifact, seq, cfg.samples, cfg.seed)

    orlicz = {}
    if artifact.is_dense:
        lhs, rhs = orlicz_bound_check(artifact, PiecewiseConvex.linear())
        orlicz["linear"] = {"lhs": lhs, "rhs": rhs}
        try:
            phi = build_phi(seq.prefix(cfg.nu + 1))
            lhs, rhs = orlicz_bound_check(artifact, phi)
            orlicz["phi_seq"] = {"lhs": lhs, "rhs": rhs}
        except PreconditionError as e:
            logger.info(f"Orlicz bound for φ_(n_k) skipped: {e}")

    payload = artifact.to_dict()
    payload["E"] = report.to_dict()
    payload["orlicz_bound"] = orlicz
    payload["checks"] = {tag: status for tag, status, _ in metrics.summary_rows()}

    rows = [
        (b["j"], b["branch"], b["source_k"], ";".join(str(e) for e in b["delta_exponents"]),
         b["lower_cut"], b["upper_cut"], b["measure16"], b["measure17"], report.cell_measures[b["j"] - 1])
        for b in payload["branches"]
    ]
    header = ("j", "branch", "source_k", "delta_exponents", "lower_cut", "upper_cut", "measure16", "measure17", "E_measure")
    emit(cfg, payload, header, rows)
    return report.passed
