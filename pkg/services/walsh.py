"""
Система Уолша на двоичных сетках

Ячейка с номером c на разрешении N — это отрезок Δ(N, c+1); первая
двоичная цифра точки b_1 является старшим битом c. Быстрое преобразование
Уолша–Адамара в порядке Пэли: перестановка с обращением битов плюс
бабочка на месте, O(N·2^N).

Целочисленный путь точный: значения хранятся числителями над 2^scale_log2.
"""
import bisect
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Union

import numpy as np

from services.dyadic import DyadicPoint, SpectralLike, as_spectral, variation
from services.errors import PreconditionError


logger = logging.getLogger(__name__)

Number = Union[Fraction, float]


def _is_exact(array: np.ndarray) -> bool:
    return array.dtype.kind in "iu"


def _reduce_scale(array: np.ndarray, scale_log2: int):
    """Сократить общую степень двойки числителей"""
    if not _is_exact(array) or scale_log2 == 0:
        return array, scale_log2
    common = int(np.bitwise_or.reduce(np.abs(array))) if array.size else 0
    if common == 0:
        return np.zeros_like(array), 0
    shift = min((common & -common).bit_length() - 1, scale_log2)
    if shift:
        array = array >> shift
    return array, scale_log2 - shift


@dataclass(frozen=True, eq=False)
class StepFunction:
    """
    Функция, постоянная на 2^N двоичных ячейках

    Attributes:
        resolution: N
        values: Массив длины 2^N; для целого типа — числители
        scale_log2: Истинное значение ячейки равно values[c] / 2^scale_log2
    """
    resolution: int
    values: np.ndarray
    scale_log2: int = 0

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1 or values.size != 1 << self.resolution:
            raise PreconditionError(
                f"step function at resolution {self.resolution} needs {1 << self.resolution} values, got {values.size}"
            )
        if values.dtype.kind == "b":
            values = values.astype(np.int64)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, resolution: int, value: int = 1) -> "StepFunction":
        return cls(resolution, np.full(1 << resolution, value, dtype=np.int64))

    @classmethod
    def zero(cls, resolution: int) -> "StepFunction":
        return cls.constant(resolution, 0)

    @property
    def value_kind(self) -> str:
        return "exact-integer" if _is_exact(self.values) else "float"

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.values)

    def as_float(self) -> np.ndarray:
        return self.values / float(1 << self.scale_log2) if self.scale_log2 else self.values.astype(np.float64)

    def value_at_cell(self, index: int) -> Number:
        raw = self.values[index]
        if self.is_exact:
            return Fraction(int(raw), 1 << self.scale_log2)
        return float(raw) / (1 << self.scale_log2)

    def at(self, x: DyadicPoint) -> Number:
        """Значение в точке x"""
        return self.value_at_cell(x.cell_index(self.resolution))

    def __repr__(self) -> str:
        return f"StepFunction(N={self.resolution}, kind={self.value_kind}, scale=2^-{self.scale_log2})"


@dataclass(frozen=True, eq=False)
class WalshCoefficients:
    """
    Коэффициенты Уолша–Фурье f̂(k), k < 2^N

    Attributes:
        resolution: N
        coeffs: Массив длины 2^N, индекс k хранит числитель f̂(k)
        scale_log2: f̂(k) = coeffs[k] / 2^scale_log2
    """
    resolution: int
    coeffs: np.ndarray
    scale_log2: int = 0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs)
        if coeffs.ndim != 1 or coeffs.size != 1 << self.resolution:
            raise PreconditionError(
                f"coefficient vector at resolution {self.resolution} needs {1 << self.resolution} entries, got {coeffs.size}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.coeffs)

    def as_float(self) -> np.ndarray:
        return self.coeffs / float(1 << self.scale_log2) if self.scale_log2 else self.coeffs.astype(np.float64)

    def coefficient(self, k: int) -> Number:
        raw = self.coeffs[k]
        if self.is_exact:
            return Fraction(int(raw), 1 << self.scale_log2)
        return float(raw) / (1 << self.scale_log2)

    def support(self) -> np.ndarray:
        """Индексы ненулевых коэффициентов (спектр многочлена)"""
        return np.flatnonzero(self.coeffs)

    def degree(self) -> int:
        """Наибольший индекс с ненулевым коэффициентом (0 для нулевого)"""
        nz = self.support()
        return int(nz[-1]) if nz.size else 0


# ==================== TRANSFORM ====================

@lru_cache(maxsize=32)
def bit_reversal(resolution: int) -> np.ndarray:
    """Перестановка обращения N битов (только для чтения)"""
    idx = np.arange(1 << resolution, dtype=np.int64)
    rev = np.zeros_like(idx)
    for b in range(resolution):
        rev |= ((idx >> b) & 1) << (resolution - 1 - b)
    rev.setflags(write=False)
    return rev


def _butterfly(array: np.ndarray) -> np.ndarray:
    """Ненормированное преобразование Адамара (естественный порядок)"""
    a = np.array(array, copy=True)
    h = 1
    while h < a.size:
        view = a.reshape(-1, 2, h)
        top = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = top - view[:, 1, :]
        h <<= 1
    return a


def fwht(f: StepFunction) -> WalshCoefficients:
    """
    Прямое преобразование: f̂(k) = 2^(-N) Σ_c f(c) w_k(c)

    Для целых значений результат точный (числители int64; модули значений
    до 2^40 при N ≤ 20 не переполняются).
    """
    n = f.resolution
    rev = bit_reversal(n)
    if f.is_exact:
        transformed = _butterfly(f.values.astype(np.int64))[rev]
        coeffs, scale = _reduce_scale(transformed, f.scale_log2 + n)
        return WalshCoefficients(n, coeffs, scale)
    transformed = _butterfly(f.as_float())[rev] / float(1 << n)
    return WalshCoefficients(n, transformed)


def fwht_inverse(c: WalshCoefficients) -> StepFunction:
    """Обратное преобразование: f(c) = Σ_k f̂(k) w_k(c)"""
    n = c.resolution
    rev = bit_reversal(n)
    if c.is_exact:
        values, scale = _reduce_scale(_butterfly(c.coeffs.astype(np.int64)[rev]), c.scale_log2)
        return StepFunction(n, values, scale)
    return StepFunction(n, _butterfly(c.as_float()[rev]))


# ==================== POINTWISE ====================

def rademacher(n: int, x: DyadicPoint) -> int:
    """r_n(x): +1, если цифра b_(n+1) равна 0, иначе −1"""
    return 1 - 2 * x.bit(n + 1)


def walsh_eval(n: SpectralLike, x: DyadicPoint) -> int:
    """
    w_n(x) = Π r_j(x)^ε_j(n)

    Учитываются только показатели меньше разрешения точки, поэтому
    величина n не важна, важен лишь размер спектра.
    """
    bits = as_spectral(n).bits
    relevant = bits[:bisect.bisect_left(bits, x.resolution)]
    parity = sum((x.digits >> j) & 1 for j in relevant) & 1
    return -1 if parity else 1


def walsh_grid(k: SpectralLike, resolution: int) -> StepFunction:
    """Значения w_k на всех ячейках разрешения N"""
    bits = as_spectral(k).bits
    cells = np.arange(1 << resolution, dtype=np.int64)
    parity = np.zeros(cells.size, dtype=np.int64)
    for j in bits:
        if j >= resolution:
            break
        parity ^= (cells >> (resolution - 1 - j)) & 1
    return StepFunction(resolution, 1 - 2 * parity)


def partial_sum(c: WalshCoefficients, m: SpectralLike) -> StepFunction:
    """
    S_m(f) = Σ_{k<m} f̂(k) w_k

    Raises:
        PreconditionError: m > 2^N ("cut exceeds resolution")
    """
    m = int(as_spectral(m))
    if m > 1 << c.resolution:
        raise PreconditionError(f"cut exceeds resolution: {m} > 2^{c.resolution}")
    truncated = c.coeffs.copy()
    truncated[m:] = 0
    return fwht_inverse(WalshCoefficients(c.resolution, truncated, c.scale_log2))


def dirichlet_dense(n: SpectralLike, resolution: int) -> StepFunction:
    """Сетка ядра Дирихле D_n = Σ_{k<n} w_k (точные целые)"""
    n = int(as_spectral(n))
    if n > 1 << resolution:
        raise PreconditionError(f"kernel index {n} exceeds 2^{resolution}")
    coeffs = np.zeros(1 << resolution, dtype=np.int64)
    coeffs[:n] = 1
    return fwht_inverse(WalshCoefficients(resolution, coeffs))


def dirichlet_point(n: SpectralLike, x: DyadicPoint) -> int:
    """
    D_n(x) через разложение Пэли D_n = w_n Σ_{j∈Sp(n)} r_j D_(2^j)

    D_(2^j)(x) = 2^j на [0, 2^(-j)) и 0 вне его, поэтому при z ведущих
    нулях точки слагаемые j < z дают +2^j, j = z дает −2^j, остальные 0.
    """
    n = as_spectral(n)
    z = x.leading_zeros
    total = 0
    for j in n.bits:
        if z is not None and j > z:
            break
        if z is not None and j == z:
            total -= 1 << j
        else:
            total += 1 << j
    return walsh_eval(n, x) * total


def l1_norm(f: StepFunction) -> Number:
    """‖f‖₁ = 2^(-N) Σ |f(c)|; точная дробь для целого типа"""
    if f.is_exact:
        total = int(np.abs(f.values).sum())
        return Fraction(total, 1 << (f.resolution + f.scale_log2))
    return float(np.abs(f.as_float()).mean())


def sign_function(f: StepFunction) -> StepFunction:
    """Покомпонентный знак, sgn(0) = 0"""
    return StepFunction(f.resolution, np.sign(f.values).astype(np.int64))


def integral(f: StepFunction) -> Number:
    """∫ f по [0,1)"""
    if f.is_exact:
        return Fraction(int(f.values.sum()), 1 << (f.resolution + f.scale_log2))
    return float(f.as_float().mean())


# ==================== KERNEL TABLE ====================

@dataclass(frozen=True)
class KernelRow:
    """Строка проверки оценки V(n)/8 ≤ ‖D_n‖₁ ≤ V(n)"""
    n: int
    variation: int
    norm: Fraction

    @property
    def lower_ok(self) -> bool:
        return Fraction(self.variation, 8) <= self.norm

    @property
    def upper_ok(self) -> bool:
        return self.norm <= self.variation


def kernel_table(n_max: int, resolution: int = None) -> List[KernelRow]:
    """
    Нормы ядер Дирихле для всех 1 ≤ n ≤ n_max

    Ядра накапливаются инкрементально D_(n+1) = D_n + w_n.

    Args:
        n_max: Верхняя граница n
        resolution: Разрешение сетки (по умолчанию минимальное, вмещающее n_max)
    """
    if n_max < 1:
        raise PreconditionError("n_max must be at least 1")
    if resolution is None:
        resolution = max(0, math.ceil(math.log2(n_max)))
    if n_max > 1 << resolution:
        raise PreconditionError(f"n_max {n_max} exceeds 2^{resolution}")

    rows = []
    kernel = np.zeros(1 << resolution, dtype=np.int64)
    denominator = 1 << resolution
    for n in range(1, n_max + 1):
        kernel += walsh_grid(n - 1, resolution).values
        norm = Fraction(int(np.abs(kernel).sum()), denominator)
        rows.append(KernelRow(n=n, variation=variation(n), norm=norm))
    logger.info(f"Kernel table: n ≤ {n_max} at resolution {resolution}")
    return rows
