"""
Вспомогательные функции вывода
"""
import csv
import io
import json
import logging
import os
import tempfile
from fractions import Fraction
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

import config

logger = logging.getLogger(__name__)


def format_number(value: Any) -> Any:
    """
    Привести число к сериализуемому виду

    Целые остаются целыми, Fraction с единичным знаменателем — целым,
    иначе строка "p/q"; float — кратчайшая запись repr.
    """
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def to_serializable(obj: Any) -> Any:
    """Рекурсивно применить format_number к словарям и спискам"""
    if isinstance(obj, dict):
        return {str(k): to_serializable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_serializable(v) for v in obj]
    return format_number(obj)


def atomic_write(path: str, content: str):
    """
    Записать файл атомарно: временный файл в том же каталоге и os.replace

    Args:
        path: Путь назначения
        content: Текст файла
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        os.replace(tmp_path, path)
    except Exception as e:
        logger.error(f"Failed to write {path}: {e}")
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.info(f"💾 Wrote {path}")


def render_json(payload: dict) -> str:
    """JSON с версией схемы и отсортированными ключами"""
    document = {"schema_version": config.SCHEMA_VERSION}
    document.update(to_serializable(payload))
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV с заголовком; числа через format_number"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["true" if v is True else "false" if v is False else format_number(v) for v in row])
    return buffer.getvalue()


def write_output(content: str, path: Optional[str]):
    """Записать в файл атомарно либо в stdout"""
    if path:
        atomic_write(path, content)
    else:
        print(content, end="")


def format_summary(rows: List[tuple]) -> str:
    """
    Таблица вердиктов проверок

    Returns:
        Строки вида "tag      pass   value"
    """
    if not rows:
        return "no checks recorded\n"
    width = max(len(str(tag)) for tag, _, _ in rows)
    lines = [f"{'check'.ljust(width)}  status  value"]
    for tag, status, value in rows:
        shown = format_number(value) if value is not None else ""
        lines.append(f"{str(tag).ljust(width)}  {status.ljust(6)}  {shown}")
    return "\n".join(lines) + "\n"
