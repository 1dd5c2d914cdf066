"""
Функция роста φ_(n_k) с узлами в показательной записи

Узлы 2^(2n_ν) не материализуются: функция хранится показателями
e_ν = 2n_ν и вариациями V_ν, а наклоны — в переставленной форме
t_ν = V_(ν+1) + δ_ν / (2^g − 1), g = e_(ν+1) − e_ν, δ_ν = V_(ν+1) − V_ν.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import config
from services.dyadic import SpectralLike, SpectralNat, as_spectral, is_nested_step, variation
from services.errors import PreconditionError
from services.orlicz import PiecewiseConvex


logger = logging.getLogger(__name__)

# материализация узлов 2^e разумна только при небольших e
MATERIALIZE_MAX_EXPONENT = 1 << 20


@dataclass(frozen=True)
class Slope:
    """
    Наклон base + coef / (2^gap − 1)

    При gap больше порога точности значение заключается в интервал
    (base, base + 2·coef / 2^cap).
    """
    base: int
    coef: int = 0
    gap: int = 0

    def exact(self, cap: Optional[int] = None) -> Optional[Fraction]:
        cap = config.WALSH_EXACT_GAP_BITS if cap is None else cap
        if self.coef == 0:
            return Fraction(self.base)
        if self.gap > cap:
            return None
        return self.base + Fraction(self.coef, (1 << self.gap) - 1)

    def bounds(self, cap: Optional[int] = None) -> Tuple[Fraction, Fraction]:
        cap = config.WALSH_EXACT_GAP_BITS if cap is None else cap
        value = self.exact(cap)
        if value is not None:
            return value, value
        return Fraction(self.base), self.base + Fraction(2 * self.coef, 1 << cap)

    def __float__(self) -> float:
        if self.coef == 0:
            return float(self.base)
        if self.gap > 1000:
            return float(self.base)
        return self.base + self.coef / ((1 << self.gap) - 1)


def slope_less(a: Slope, b: Slope, cap: Optional[int] = None) -> bool:
    """Доказуемое a < b по интервалам (при неточных значениях границы строгие)"""
    a_lo, a_hi = a.bounds(cap)
    b_lo, b_hi = b.bounds(cap)
    a_exact = a_lo == a_hi
    b_exact = b_lo == b_hi
    if a_exact and b_exact:
        return a_lo < b_lo
    if a_hi < b_lo:
        return True
    return a_hi == b_lo and (not a_exact or not b_exact)


@dataclass(frozen=True)
class ExponentPhi:
    """
    φ_(n_k) по первым K узлам

    Attributes:
        terms: n_1, …, n_K
        exponents: e_ν = 2n_ν
        variations: V(n_ν)
    """
    terms: Tuple[SpectralNat, ...]
    exponents: Tuple[int, ...]
    variations: Tuple[int, ...]

    @property
    def knot_count(self) -> int:
        return len(self.exponents)

    def value_at_knot(self, nu: int) -> Tuple[int, int]:
        """φ(2^e_ν) = 2^e_ν · V_ν, возвращается как (e_ν, V_ν)"""
        return self.exponents[nu - 1], self.variations[nu - 1]

    def slope(self, nu: int) -> Slope:
        """t_ν: наклон на [2^e_ν, 2^e_(ν+1)], t_0 — на [0, 2^e_1]"""
        if nu == 0:
            return Slope(base=self.variations[0])
        if not 1 <= nu < self.knot_count:
            raise PreconditionError(f"slope t_{nu} needs knots {nu} and {nu + 1}")
        delta = self.variations[nu] - self.variations[nu - 1]
        gap = self.exponents[nu] - self.exponents[nu - 1]
        return Slope(base=self.variations[nu], coef=delta, gap=gap)

    @property
    def slopes(self) -> List[Slope]:
        return [self.slope(nu) for nu in range(self.knot_count)]

    def ratio_at_power(self, m: int) -> Union[Fraction, float]:
        """
        q(m) = φ(2^m) / 2^m для 0 ≤ m ≤ e_K

        В отрезке ν при d = m − e_ν: q = V_ν + δ_ν (1 − 2^(−d)) (1 + 1/(2^g − 1)).
        Точная дробь при g ≤ WALSH_EXACT_GAP_BITS, иначе float.
        """
        if m < 0 or m > self.exponents[-1]:
            raise PreconditionError(f"2^{m} lies outside the represented knot range")
        if m <= self.exponents[0]:
            return Fraction(self.variations[0])
        nu = next(i for i in range(1, self.knot_count) if m <= self.exponents[i])
        v_lo = self.variations[nu - 1]
        delta = self.variations[nu] - v_lo
        gap = self.exponents[nu] - self.exponents[nu - 1]
        d = m - self.exponents[nu - 1]
        if gap <= config.WALSH_EXACT_GAP_BITS:
            return v_lo + delta * (1 - Fraction(1, 1 << d)) * (1 + Fraction(1, (1 << gap) - 1))
        return v_lo + delta * (1.0 - 2.0 ** (-min(d, 1100)))

    def materialize(self, knot_count: Optional[int] = None) -> PiecewiseConvex:
        """
        Точная PiecewiseConvex по первым knot_count узлам

        Raises:
            PreconditionError: Показатель узла слишком велик для материализации
        """
        k = self.knot_count if knot_count is None else knot_count
        if not 1 <= k <= self.knot_count:
            raise PreconditionError(f"cannot materialize {k} of {self.knot_count} knots")
        if self.exponents[k - 1] > MATERIALIZE_MAX_EXPONENT:
            raise PreconditionError(f"knot 2^{self.exponents[k - 1]} is too large to materialize")
        points = [(1 << e, (1 << e) * v) for e, v in zip(self.exponents[:k], self.variations[:k])]
        return PiecewiseConvex.from_points(points, tail_slope=None)


def build_phi(seq: Sequence[SpectralLike], knot_count: Optional[int] = None) -> ExponentPhi:
    """
    Построить φ_(n_k) по префиксу последовательности

    Args:
        seq: Вложенный префикс со строго возрастающей вариацией
        knot_count: Число узлов K (по умолчанию вся длина префикса)

    Raises:
        PreconditionError: Префикс не вложен, вариация не растет или короче K
    """
    terms = [as_spectral(t) for t in seq]
    k = len(terms) if knot_count is None else knot_count
    if k < 1 or k > len(terms):
        raise PreconditionError(f"knot count {k} out of range for a prefix of {len(terms)}")
    terms = terms[:k]
    for a, b in zip(terms, terms[1:]):
        if not is_nested_step(a, b):
            raise PreconditionError("not nested")
    variations = tuple(variation(t) for t in terms)
    if any(a >= b for a, b in zip(variations, variations[1:])):
        raise PreconditionError("variation must strictly increase along the prefix")
    exponents = tuple(2 * t.value for t in terms)
    logger.info(f"φ built: {k} knots, V = {variations[0]}…{variations[-1]}")
    return ExponentPhi(terms=tuple(terms), exponents=exponents, variations=variations)


# ==================== PROPERTY SCANS ====================

@dataclass(frozen=True)
class SpacingRow:
    """Вспомогательная оценка для отрезка ν"""
    nu: int
    delta: int
    gap: int

    @property
    def gap_ok(self) -> bool:
        # n_(ν+1) ≥ n_ν + δ_ν
        return self.gap >= 2 * self.delta

    @property
    def bound_ok(self) -> bool:
        # δ / (2^(2δ) − 1) < 1 и δ / (2^g − 1) < 1  ⇔  δ + 1 < 2^g
        return self.delta < (1 << (2 * self.delta)) - 1 and (self.delta + 1).bit_length() <= self.gap

    @property
    def passed(self) -> bool:
        return self.gap_ok and self.bound_ok


@dataclass(frozen=True)
class PhiReport:
    """Итог проверки выпуклости, сверхлинейности и Δ2"""
    convex: bool
    strictly_convex: bool
    superlinear_evidence: bool
    delta2_constant: Fraction
    delta2: bool
    delta2_literal: bool
    spacing: Optional[bool] = None
    growth_window: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return {
            "convex": self.convex,
            "strictly_convex": self.strictly_convex,
            "superlinear_evidence": self.superlinear_evidence,
            "delta2_constant": str(self.delta2_constant),
            "delta2": self.delta2,
            "delta2_literal": self.delta2_literal,
            "spacing": self.spacing,
            "growth_window": None if self.growth_window is None else list(self.growth_window),
        }


def spacing_rows(phi: ExponentPhi) -> List[SpacingRow]:
    rows = []
    for nu in range(1, phi.knot_count):
        rows.append(SpacingRow(
            nu=nu,
            delta=phi.variations[nu] - phi.variations[nu - 1],
            gap=phi.exponents[nu] - phi.exponents[nu - 1],
        ))
    return rows


def delta2_constant(phi: ExponentPhi) -> Fraction:
    """
    max_m φ(2^(m+1)) / φ(2^m) по 2^(m+1) ≤ последнего узла

    Внутри отрезка отношение убывает по m, поэтому максимум достигается
    в начале отрезка m = e_ν: 2 + δ_ν (1 + 1/(2^g − 1)) / V_ν. Для
    неточного g берется верхняя граница.
    """
    worst = Fraction(2)
    cap = config.WALSH_EXACT_GAP_BITS
    for row in spacing_rows(phi):
        v = phi.variations[row.nu - 1]
        if row.gap <= cap:
            excess = 1 + Fraction(1, (1 << row.gap) - 1)
        else:
            excess = 1 + Fraction(2, 1 << cap)
        worst = max(worst, 2 + row.delta * excess / v)
    return worst


def growth_window(phi: ExponentPhi) -> Tuple[float, float]:
    """
    Константы c, C в c·u·log2 log2 u ≤ φ(u) ≤ C·u·log2 log2 u

    Отношение φ(u)/(u log2 log2 u) при u = 2^m равно q(m)/log2 m;
    сканируются m = 3, узлы, их соседи и середины отрезков.
    """
    top = phi.exponents[-1]
    marks = {3, top}
    for i, e in enumerate(phi.exponents):
        marks.update({e, e + 1, e - 1})
        if i + 1 < phi.knot_count:
            marks.add((e + phi.exponents[i + 1]) // 2)
    ratios = [float(phi.ratio_at_power(m)) / math.log2(m) for m in sorted(marks) if 3 <= m <= top]
    if not ratios:
        raise PreconditionError("growth window needs knots beyond u = 8")
    return min(ratios), max(ratios)


def _piecewise_delta2(phi: PiecewiseConvex) -> Fraction:
    """Точный максимум φ(2u)/φ(u) по кандидатам u ∈ узлы ∪ узлы/2"""
    positive = [u for u, v in zip(phi.knots, phi.values) if u > 0 and v > 0]
    if not positive:
        return Fraction(2)
    start = positive[0]
    limit = phi.last_knot / 2 if phi.tail_slope is None else phi.last_knot
    candidates = sorted({u for u in phi.knots if start <= u <= limit} | {u / 2 for u in phi.knots if start <= u / 2 <= limit})
    worst = Fraction(2)
    for u in candidates:
        worst = max(worst, phi(2 * u) / phi(u))
    return worst


def check_phi_properties(phi: Union[ExponentPhi, PiecewiseConvex], delta2_bound: Optional[Fraction] = None) -> PhiReport:
    """
    Выпуклость, сверхлинейность и условие Δ2

    Для ExponentPhi наклоны сравниваются по интервальным границам
    переставленной формы, для PiecewiseConvex — точно.
    """
    bound = Fraction(config.WALSH_DELTA2_BOUND if delta2_bound is None else delta2_bound)

    if isinstance(phi, ExponentPhi):
        slopes = phi.slopes
        strict = all(slope_less(a, b) for a, b in zip(slopes, slopes[1:]))
        constant = delta2_constant(phi)
        spacing = all(row.passed for row in spacing_rows(phi))
        window = growth_window(phi) if phi.exponents[-1] >= 3 else None
        report = PhiReport(
            convex=strict,
            strictly_convex=strict,
            superlinear_evidence=strict and len(slopes) >= 2,
            delta2_constant=constant,
            delta2=constant <= bound,
            delta2_literal=constant <= 2,
            spacing=spacing,
            growth_window=window,
        )
    else:
        slopes = phi.all_slopes
        convex = phi.is_convex()
        strict = all(a < b for a, b in zip(slopes, slopes[1:]))
        constant = _piecewise_delta2(phi)
        report = PhiReport(
            convex=convex,
            strictly_convex=strict,
            superlinear_evidence=strict and len(slopes) >= 2,
            delta2_constant=constant,
            delta2=constant <= bound,
            delta2_literal=constant <= 2,
        )

    if not report.convex:
        logger.warning("⚠️ φ is not convex on the scanned range")
    return report
