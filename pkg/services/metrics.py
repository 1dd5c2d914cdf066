"""
Метрики и журнал проверок

Каждое проверяемое соотношение конструкции фиксируется как вердикт
(тег → pass/fail/значение); сводка печатается CLI в конце запуска.
"""
import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional


logger = logging.getLogger(__name__)


@dataclass
class CheckVerdict:
    """Итог одной проверки"""
    tag: str
    passed: bool
    value: Any = None
    detail: str = ""

    @property
    def status(self) -> str:
        return "pass" if self.passed else "FAIL"


class MetricsCollector:
    """
    Сборщик метрик запуска

    Метрики:
    - checks_passed / checks_failed: Число вердиктов по исходу
    - points_sampled: Число обработанных точек выборки
    - grid_cells: Размеры материализованных сеток (histogram)
    - *_seconds: Длительности этапов (histogram)
    """

    def __init__(self):
        self.counters: Dict[str, int] = defaultdict(int)
        self.samples: Dict[str, List[float]] = defaultdict(list)
        self.checks: Dict[str, CheckVerdict] = {}

    # ==================== COUNTERS ====================

    def inc_counter(self, name: str, value: int = 1, labels: Optional[Dict] = None):
        """
        Увеличить счетчик

        Args:
            name: Имя метрики
            value: Приращение
            labels: Метки (например, {"level": "1"})
        """
        key = _labelled(name, labels)
        self.counters[key] += value

    def get_counter(self, name: str, labels: Optional[Dict] = None) -> int:
        return self.counters.get(_labelled(name, labels), 0)

    # ==================== HISTOGRAMS ====================

    def observe(self, name: str, value: float, labels: Optional[Dict] = None):
        self.samples[_labelled(name, labels)].append(value)

    def get_histogram_stats(self, name: str, labels: Optional[Dict] = None) -> Dict:
        """
        Статистика наблюдений

        Returns:
            {"count": int, "total": float, "min": float, "max": float}
        """
        values = self.samples.get(_labelled(name, labels), [])
        if not values:
            return {"count": 0, "total": 0, "min": 0, "max": 0}
        return {"count": len(values), "total": sum(values), "min": min(values), "max": max(values)}

    @contextmanager
    def timer(self, name: str, labels: Optional[Dict] = None) -> Iterator[None]:
        """Замерить длительность блока в histogram name"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.observe(name, time.perf_counter() - start, labels)

    def durations(self) -> Dict[str, float]:
        """Суммарные длительности по ключам *_seconds"""
        return {
            key: sum(values) for key, values in self.samples.items()
            if key.split("{", 1)[0].endswith("_seconds")
        }

    # ==================== CHECKS ====================

    def record_check(self, tag: str, passed: bool, value: Any = None, detail: str = "") -> CheckVerdict:
        """
        Зафиксировать вердикт проверки

        Повторная запись с тем же тегом объединяется: вердикт проходит,
        только если прошли все записи; сохраняются подробности первого провала.

        Args:
            tag: Тег соотношения (например, "spectrum_localized" или "e_measure")
            passed: Исход
            value: Наблюденное значение
            detail: Подробности для stderr
        """
        previous = self.checks.get(tag)
        if previous is not None:
            if not previous.passed:
                value, detail = previous.value, previous.detail
            elif value is None:
                value = previous.value
            passed = passed and previous.passed
        verdict = CheckVerdict(tag=tag, passed=passed, value=value, detail=detail)
        self.checks[tag] = verdict

        if passed:
            self.inc_counter('checks_passed')
            logger.debug(f"✅ {tag}: {value}")
        else:
            self.inc_counter('checks_failed')
            logger.error(f"🚨 Check {tag} failed: {detail or value}")
        return verdict

    def failed_checks(self) -> List[CheckVerdict]:
        return [v for v in self.checks.values() if not v.passed]

    def all_passed(self) -> bool:
        return not self.failed_checks()

    def summary_rows(self) -> List[tuple]:
        """Строки (tag, pass/FAIL, value) в порядке записи"""
        return [(v.tag, v.status, v.value) for v in self.checks.values()]

    def reset(self):
        """Сбросить все метрики"""
        self.counters.clear()
        self.samples.clear()
        self.checks.clear()


def _labelled(name: str, labels: Optional[Dict] = None) -> str:
    """Ключ вида "name{a=1,b=2}" """
    if not labels:
        return name
    return name + "{" + ",".join(f"{k}={v}" for k, v in sorted(labels.items())) + "}"


# Сборщик текущего запуска
metrics = MetricsCollector()


def track_check(tag: str, passed: bool, value: Any = None, detail: str = "") -> bool:
    """Записать вердикт в глобальный сборщик и вернуть исход"""
    metrics.record_check(tag, passed, value, detail)
    return passed


def track_points_sampled(count: int, level: Optional[int] = None):
    labels = {"level": str(level)} if level is not None else None
    metrics.inc_counter("points_sampled", count, labels)


def track_grid(cells: int, purpose: str):
    """Отследить размер материализованной сетки"""
    metrics.observe("grid_cells", cells, {"purpose": purpose})
    logger.debug(f"Grid {purpose}: {cells} cells")
