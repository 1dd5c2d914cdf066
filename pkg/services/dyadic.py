"""
Спектральная арифметика натуральных чисел и двоично-рациональные точки

Число n хранится своим спектром Sp(n) = {j : ε_j(n) = 1}; точка x ∈ [0,1)
хранится конечным двоичным разложением x = Σ b_i 2^(-i).
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from services.errors import PreconditionError


logger = logging.getLogger(__name__)


def _exponents_of(value: int) -> Tuple[int, ...]:
    """Позиции единичных битов числа (по возрастанию)"""
    if value < 0:
        raise PreconditionError(f"natural number expected, got {value}")
    digits = bin(value)[:1:-1]
    return tuple(i for i, ch in enumerate(digits) if ch == "1")


def _reverse_bits(value: int, width: int) -> int:
    """Развернуть младшие width битов числа"""
    if width == 0:
        return 0
    return int(format(value, f"0{width}b")[::-1], 2)


# ==================== SPECTRAL NATURALS ====================

@total_ordering
@dataclass(frozen=True)
class SpectralNat:
    """
    Натуральное число, заданное спектром

    Attributes:
        bits: Строго возрастающие показатели j с ε_j(n) = 1 (пусто для 0)
    """
    bits: Tuple[int, ...] = ()

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if bits and bits[0] < 0:
            raise PreconditionError("spectrum exponents must be non-negative")
        if any(a >= b for a, b in zip(bits, bits[1:])):
            raise PreconditionError("spectrum exponents must be strictly increasing")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_int(cls, value: int) -> "SpectralNat":
        return cls(_exponents_of(int(value)))

    @classmethod
    def from_exponents(cls, exponents: Iterable[int]) -> "SpectralNat":
        """Собрать число из множества показателей (повторы запрещены)"""
        exps = list(exponents)
        if len(set(exps)) != len(exps):
            raise PreconditionError("repeated exponent in spectrum")
        return cls(tuple(sorted(exps)))

    @cached_property
    def value(self) -> int:
        """Значение n = Σ 2^j (материализуется только по запросу)"""
        result = 0
        for e in self.bits:
            result |= 1 << e
        return result

    @property
    def max_exponent(self) -> Optional[int]:
        return self.bits[-1] if self.bits else None

    @property
    def min_exponent(self) -> Optional[int]:
        return self.bits[0] if self.bits else None

    def __int__(self) -> int:
        return self.value

    def __index__(self) -> int:
        return self.value

    def __len__(self) -> int:
        return len(self.bits)

    def __bool__(self) -> bool:
        return bool(self.bits)

    def __contains__(self, exponent: int) -> bool:
        return exponent in self._bit_set

    @cached_property
    def _bit_set(self) -> frozenset:
        return frozenset(self.bits)

    def __lt__(self, other: "SpectralNat") -> bool:
        if not isinstance(other, SpectralNat):
            return NotImplemented
        # старший различающийся показатель решает сравнение
        return self.bits[::-1] < other.bits[::-1]

    def __repr__(self) -> str:
        if len(self.bits) <= 8:
            return f"SpectralNat({self.bits})"
        return f"SpectralNat(|Sp|={len(self.bits)}, max={self.bits[-1]})"


SpectralLike = Union[SpectralNat, int]


def as_spectral(n: SpectralLike) -> SpectralNat:
    """Привести int или SpectralNat к SpectralNat"""
    if isinstance(n, SpectralNat):
        return n
    return SpectralNat.from_int(int(n))


def variation(n: SpectralLike) -> int:
    """
    Вариация числа V(n) = ε_0 + Σ|ε_j − ε_{j−1}|

    Равна удвоенному числу максимальных серий подряд идущих показателей.
    """
    bits = as_spectral(n).bits
    runs = sum(1 for i, e in enumerate(bits) if i == 0 or e != bits[i - 1] + 1)
    return 2 * runs


def xor(a: SpectralLike, b: SpectralLike) -> SpectralNat:
    """Двоичное сложение ⊕ индексов (симметрическая разность спектров)"""
    a, b = as_spectral(a), as_spectral(b)
    return SpectralNat(tuple(sorted(a._bit_set ^ b._bit_set)))


def nested_diff(a: SpectralLike, b: SpectralLike) -> SpectralNat:
    """
    Точная разность a − b при Sp(b) ⊆ Sp(a)

    Raises:
        PreconditionError: Если спектр b не вложен в спектр a
    """
    a, b = as_spectral(a), as_spectral(b)
    if not b._bit_set <= a._bit_set:
        raise PreconditionError("not nested")
    return xor(a, b)


# ==================== DYADIC POINTS ====================

@dataclass(frozen=True, eq=False)
class DyadicPoint:
    """
    Точка x = Σ b_i 2^(-i) отрезка [0,1) с конечным разложением

    Attributes:
        digits: Упакованные биты, бит i−1 хранит b_i
        resolution: Число значащих двоичных разрядов R
    """
    digits: int
    resolution: int

    def __post_init__(self):
        if self.digits < 0 or self.resolution < 0:
            raise PreconditionError("dyadic point digits and resolution must be non-negative")
        if self.digits.bit_length() > self.resolution:
            raise PreconditionError(
                f"digits need {self.digits.bit_length()} bits, resolution is {self.resolution}"
            )

    @classmethod
    def zero(cls) -> "DyadicPoint":
        return cls(0, 0)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "DyadicPoint":
        """Из вектора (b_1, …, b_R)"""
        digits = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise PreconditionError(f"binary digit expected, got {b}")
            if b:
                digits |= 1 << i
        return cls(digits, len(bits))

    @classmethod
    def from_fraction(cls, x: Union[Fraction, int, str]) -> "DyadicPoint":
        """Из двоично-рационального числа 0 ≤ x < 1"""
        x = Fraction(x)
        if not 0 <= x < 1:
            raise PreconditionError(f"point must lie in [0,1), got {x}")
        den = x.denominator
        if den & (den - 1):
            raise PreconditionError(f"denominator of {x} is not a power of two")
        resolution = den.bit_length() - 1
        return cls(_reverse_bits(x.numerator, resolution), resolution)

    @classmethod
    def from_cell(cls, resolution: int, index: int) -> "DyadicPoint":
        """Левый конец отрезка Δ(resolution, index + 1)"""
        if not 0 <= index < (1 << resolution):
            raise PreconditionError(f"cell index {index} out of range for resolution {resolution}")
        return cls(_reverse_bits(index, resolution), resolution)

    def bit(self, i: int) -> int:
        """Двоичная цифра b_i (i ≥ 1); за пределами разрешения — 0"""
        return (self.digits >> (i - 1)) & 1

    @property
    def bits(self) -> Tuple[int, ...]:
        return tuple(self.bit(i) for i in range(1, self.resolution + 1))

    @property
    def value(self) -> Fraction:
        return Fraction(_reverse_bits(self.digits, self.resolution), 1 << self.resolution)

    def cell_index(self, resolution: int) -> int:
        """Номер j−1 двоичного отрезка Δ(resolution, j), содержащего точку"""
        head = self.digits & ((1 << resolution) - 1)
        return _reverse_bits(head, resolution)

    @property
    def leading_zeros(self) -> Optional[int]:
        """Число ведущих нулевых цифр; None для x = 0"""
        if self.digits == 0:
            return None
        return (self.digits & -self.digits).bit_length() - 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, DyadicPoint):
            return NotImplemented
        return self.digits == other.digits

    def __hash__(self) -> int:
        return hash(self.digits)

    def __repr__(self) -> str:
        return f"DyadicPoint({self.value})"


def point_xor(x: DyadicPoint, y: DyadicPoint) -> DyadicPoint:
    """Двоичное сложение точек x ⊕ y"""
    return DyadicPoint(x.digits ^ y.digits, max(x.resolution, y.resolution))


# ==================== SEQUENCES ====================

NESTED_CANONICAL = "nested-canonical"
NESTED_CANONICAL_FROM_ZERO = "nested-canonical-from-zero"
SEPARATED_CANONICAL = "separated-canonical"
POWERS_OF_TWO = "powers-of-two"

SEQUENCE_KINDS = (NESTED_CANONICAL, NESTED_CANONICAL_FROM_ZERO, SEPARATED_CANONICAL, POWERS_OF_TWO)


def _canonical_exponents(kind: str, k: int) -> Tuple[int, ...]:
    if kind == NESTED_CANONICAL:
        return tuple(range(0, 2 * k + 1, 2))
    if kind == NESTED_CANONICAL_FROM_ZERO:
        return tuple(range(0, 2 * k - 1, 2))
    if kind == SEPARATED_CANONICAL:
        return tuple(k * k + 2 * j for j in range(k + 1))
    if kind == POWERS_OF_TWO:
        return (k,)
    raise PreconditionError(f"unknown sequence kind '{kind}', expected one of {', '.join(SEQUENCE_KINDS)}")


def _canonical_value(kind: str, k: int) -> int:
    """Значение n_k в замкнутой форме"""
    if kind == NESTED_CANONICAL:
        return ((1 << (2 * k + 2)) - 1) // 3
    if kind == NESTED_CANONICAL_FROM_ZERO:
        return ((1 << (2 * k)) - 1) // 3
    if kind == SEPARATED_CANONICAL:
        return (((1 << (2 * k + 2)) - 1) // 3) << (k * k)
    if kind == POWERS_OF_TWO:
        return 1 << k
    return SpectralNat(_canonical_exponents(kind, k)).value


def generate_sequence(kind: str, count: int) -> List[SpectralNat]:
    """
    Первые count членов именованной последовательности (k начинается с 1)

    Raises:
        PreconditionError: count < 1 или неизвестный вид
    """
    if count < 1:
        raise PreconditionError("count must be at least 1")
    return [SpectralNat(_canonical_exponents(kind, k)) for k in range(1, count + 1)]


class SequenceSource:
    """
    Источник членов n_k (k ≥ 1): либо именованное правило, либо явный префикс

    Кэшируются только целые значения (спектры именованных правил
    строятся по запросу); для явного префикса выход за его длину
    дает PreconditionError("prefix too short").
    """

    def __init__(self, name: str, terms: Optional[Sequence[SpectralNat]] = None):
        if terms is None:
            _canonical_exponents(name, 1)
        self.name = name
        self._explicit = list(terms) if terms is not None else None
        self._values: Dict[int, int] = {}

    @classmethod
    def from_kind(cls, kind: str) -> "SequenceSource":
        return cls(kind)

    @classmethod
    def from_terms(cls, terms: Sequence[SpectralLike], name: str = "explicit") -> "SequenceSource":
        return cls(name, [as_spectral(t) for t in terms])

    @property
    def is_explicit(self) -> bool:
        return self._explicit is not None

    @property
    def available(self) -> Optional[int]:
        """Длина явного префикса (None для именованного правила)"""
        return None if self._explicit is None else len(self._explicit)

    def has(self, k: int) -> bool:
        return k >= 1 and (self._explicit is None or k <= len(self._explicit))

    def term(self, k: int) -> SpectralNat:
        if not self.has(k):
            raise PreconditionError(f"prefix too short: term n_{k} requested, {len(self._explicit)} available")
        if self._explicit is not None:
            return self._explicit[k - 1]
        return SpectralNat(_canonical_exponents(self.name, k))

    def value(self, k: int) -> int:
        cached = self._values.get(k)
        if cached is None:
            if self._explicit is not None:
                cached = self.term(k).value
            else:
                cached = _canonical_value(self.name, k)
            self._values[k] = cached
        return cached

    def prefix(self, count: int) -> List[SpectralNat]:
        return [self.term(k) for k in range(1, count + 1)]

    def index_at_least(self, bound: int, start: int = 1) -> int:
        """Минимальный k ≥ start с n_k ≥ bound"""
        k = start
        while self.value(k) < bound:
            k += 1
        return k

    def __repr__(self) -> str:
        return f"SequenceSource({self.name})"


@dataclass(frozen=True)
class SequenceReport:
    """Классификация конечного префикса последовательности"""
    variation_profile: Tuple[int, ...]
    separated: bool
    nested: bool
    unbounded_variation_evidence: bool
    lacunary_ratio: Optional[Fraction]
    close_bound: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "variation_profile": list(self.variation_profile),
            "separated": self.separated,
            "nested": self.nested,
            "unbounded_variation_evidence": self.unbounded_variation_evidence,
            "lacunary_ratio": None if self.lacunary_ratio is None else str(self.lacunary_ratio),
            "close_bound": self.close_bound,
        }


def is_nested_step(a: SpectralNat, b: SpectralNat) -> bool:
    """Sp(b) ∩ [0, max Sp(a)] = Sp(a)"""
    if not a.bits:
        return True
    top = a.bits[-1]
    head = tuple(e for e in b.bits if e <= top)
    return head == a.bits


def is_separated_step(a: SpectralNat, b: SpectralNat) -> bool:
    """max Sp(a) < min Sp(b)"""
    return bool(a.bits) and bool(b.bits) and a.bits[-1] < b.bits[0]


def classify_sequence(
    seq: Sequence[SpectralLike],
    compare: Optional[Sequence[SpectralLike]] = None,
) -> SequenceReport:
    """
    Классифицировать префикс последовательности

    Args:
        seq: Строго возрастающий префикс длины ≥ 2
        compare: Последовательность для оценки близости sup|m_k − n_k|

    Raises:
        PreconditionError: Префикс короче 2 или не возрастает
    """
    terms = [as_spectral(t) for t in seq]
    if len(terms) < 2:
        raise PreconditionError("classification needs at least two terms")
    for a, b in zip(terms, terms[1:]):
        if not a < b:
            raise PreconditionError("sequence must be strictly increasing")

    profile = tuple(variation(t) for t in terms)
    separated = all(is_separated_step(a, b) for a, b in zip(terms, terms[1:]))
    nested = all(is_nested_step(a, b) for a, b in zip(terms, terms[1:]))

    # рекорд вариации обновляется хотя бы на половине шагов
    records = 0
    best = profile[0]
    for v in profile[1:]:
        if v > best:
            records += 1
            best = v
    unbounded = records >= max(1, len(profile) // 2)

    ratios = [Fraction(b.value, a.value) for a, b in zip(terms, terms[1:]) if a.value > 0]
    lacunary = min(ratios) if ratios else None

    close_bound = None
    if compare is not None:
        others = [as_spectral(t) for t in compare]
        common = min(len(others), len(terms))
        if common:
            close_bound = max(abs(others[i].value - terms[i].value) for i in range(common))

    return SequenceReport(
        variation_profile=profile,
        separated=separated,
        nested=nested,
        unbounded_variation_evidence=unbounded,
        lacunary_ratio=lacunary,
        close_bound=close_bound,
    )
