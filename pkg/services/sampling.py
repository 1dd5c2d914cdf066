"""
Детерминированная выборка двоичных точек

Генератор — numpy Generator(PCG64(seed)); точки выдаются пакетами
в виде матриц цифр (строка — точка, столбец i — цифра b_(i+1)).
"""
import logging
import math
from typing import Iterator, List, Optional, Tuple

import numpy as np

import config
from services.dyadic import DyadicPoint
from services.errors import PreconditionError


logger = logging.getLogger(__name__)

DEFAULT_BATCH = 1024


class PointSampler:
    """
    Источник равномерных точек разрешения R

    Args:
        resolution: Число двоичных цифр R
        seed: Зерно PCG64 (по умолчанию WALSH_SEED)
    """

    def __init__(self, resolution: int, seed: Optional[int] = None):
        if resolution < 1:
            raise PreconditionError("sampling resolution must be positive")
        self.resolution = resolution
        self.seed = config.WALSH_SEED if seed is None else seed
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def bit_batches(self, count: int, batch_size: int = DEFAULT_BATCH) -> Iterator[np.ndarray]:
        """Пакеты матриц uint8 формы (≤ batch_size, R)"""
        remaining = count
        while remaining > 0:
            size = min(batch_size, remaining)
            yield self._rng.integers(0, 2, size=(size, self.resolution), dtype=np.uint8)
            remaining -= size

    def points(self, count: int) -> List[DyadicPoint]:
        """Список точек (для поточечного движка)"""
        result = []
        for batch in self.bit_batches(count):
            result.extend(bits_to_points(batch))
        return result


def bits_to_points(bits: np.ndarray) -> List[DyadicPoint]:
    """Строки матрицы цифр в DyadicPoint"""
    resolution = bits.shape[1]
    packed = np.packbits(bits, axis=1, bitorder="little")
    return [DyadicPoint(int.from_bytes(row.tobytes(), "little"), resolution) for row in packed]


def points_to_bits(points: List[DyadicPoint], resolution: int) -> np.ndarray:
    """Точки в матрицу цифр разрешения resolution"""
    width = (resolution + 7) // 8
    raw = np.frombuffer(
        b"".join(p.digits.to_bytes(width, "little") for p in points), dtype=np.uint8
    ).reshape(len(points), width)
    return np.unpackbits(raw, axis=1, count=resolution, bitorder="little")


def cell_indices(bits: np.ndarray, resolution: int) -> np.ndarray:
    """Номера ячеек разрешения N по первым N цифрам (b_1 — старший бит)"""
    if resolution == 0:
        return np.zeros(bits.shape[0], dtype=np.int64)
    weights = 1 << np.arange(resolution - 1, -1, -1, dtype=np.int64)
    return bits[:, :resolution].astype(np.int64) @ weights


def wilson_interval(successes: int, total: int, z: float = 1.96) -> Tuple[float, float]:
    """Доверительный интервал Уилсона для доли"""
    if total == 0:
        return 0.0, 1.0
    p = successes / total
    denom = 1 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)
