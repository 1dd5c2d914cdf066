"""
Общие функции обработчиков (источник последовательности, вывод)
"""
import logging
from typing import Any, List, Optional, Sequence

from config import RunConfig
from services.dyadic import SequenceSource
from utils.helpers import render_csv, render_json, write_output


logger = logging.getLogger(__name__)


def sequence_source(cfg: RunConfig) -> SequenceSource:
    """SequenceSource по полям seq/terms конфигурации"""
    if getattr(cfg, "terms", None) is not None:
        return SequenceSource.from_terms(cfg.terms)
    return SequenceSource.from_kind(cfg.seq)


def emit(
    cfg: RunConfig,
    payload: dict,
    header: Optional[Sequence[str]] = None,
    rows: Optional[List[Sequence[Any]]] = None,
):
    """
    Записать результат в выбранном формате

    CSV доступен только для команд с табличным выводом; иначе пишется JSON.
    """
    if cfg.output_format == "csv" and header is not None:
        content = render_csv(header, rows or [])
    else:
        if cfg.output_format == "csv":
            logger.warning(f"⚠️ {cfg.command} has no tabular output, writing JSON")
        content = render_json(payload)
    write_output(content, cfg.out)
