"""
Кусочно-линейные выпуклые функции роста и операции над ними

Все абсциссы и значения — точные Fraction; хвост за последним узлом
либо линеен (tail_slope), либо функция равна +∞ (tail_slope = None).
"""
import bisect
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from services.errors import PreconditionError
from services.walsh import StepFunction


logger = logging.getLogger(__name__)

Real = Union[Fraction, int, float]


def _frac(value: Real) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    return Fraction(float(value))


@dataclass(frozen=True)
class PiecewiseConvex:
    """
    Кусочно-линейная функция на [0, ∞) с φ(0) = 0

    Выпуклость не навязывается конструктором (её проверяет
    check_phi_properties), чтобы можно было описать и нарушения.

    Attributes:
        knots: Абсциссы 0 = u_0 < u_1 < … < u_K
        values: φ(u_i)
        tail_slope: Наклон за u_K; None означает φ = +∞ за последним узлом
    """
    knots: Tuple[Fraction, ...]
    values: Tuple[Fraction, ...]
    tail_slope: Optional[Fraction] = None

    def __post_init__(self):
        knots = tuple(_frac(u) for u in self.knots)
        values = tuple(_frac(v) for v in self.values)
        tail = None if self.tail_slope is None else _frac(self.tail_slope)
        if not knots or len(knots) != len(values):
            raise PreconditionError("knots and values must be non-empty and of equal length")
        if knots[0] != 0 or values[0] != 0:
            raise PreconditionError("function must start at φ(0) = 0")
        if any(a >= b for a, b in zip(knots, knots[1:])):
            raise PreconditionError("knot abscissae must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tail_slope", tail)

    @classmethod
    def linear(cls, slope: Real = 1) -> "PiecewiseConvex":
        """φ(u) = slope·u"""
        slope = _frac(slope)
        return cls((Fraction(0), Fraction(1)), (Fraction(0), slope), slope)

    @classmethod
    def from_points(cls, points: Iterable[Tuple[Real, Real]], tail_slope: Optional[Real] = None) -> "PiecewiseConvex":
        """Из пар (u, φ(u)); точка (0, 0) добавляется при отсутствии"""
        pts = [(_frac(u), _frac(v)) for u, v in points]
        if not pts or pts[0][0] != 0:
            pts.insert(0, (Fraction(0), Fraction(0)))
        return cls(tuple(u for u, _ in pts), tuple(v for _, v in pts), tail_slope)

    @cached_property
    def slopes(self) -> Tuple[Fraction, ...]:
        """Наклоны отрезков [u_(i−1), u_i]"""
        return tuple(
            (v1 - v0) / (u1 - u0)
            for (u0, v0), (u1, v1) in zip(zip(self.knots, self.values), zip(self.knots[1:], self.values[1:]))
        )

    @property
    def all_slopes(self) -> Tuple[Fraction, ...]:
        """Наклоны отрезков и (если конечен) хвоста"""
        tail = () if self.tail_slope is None else (self.tail_slope,)
        return self.slopes + tail

    @property
    def last_knot(self) -> Fraction:
        return self.knots[-1]

    def __call__(self, u: Real) -> Union[Fraction, float]:
        """Значение φ(u); math.inf за последним узлом при бесконечном хвосте"""
        u = _frac(u)
        if u < 0:
            raise PreconditionError(f"φ is defined on [0, ∞), got {u}")
        if u >= self.knots[-1]:
            if u == self.knots[-1]:
                return self.values[-1]
            if self.tail_slope is None:
                return math.inf
            return self.values[-1] + self.tail_slope * (u - self.knots[-1])
        i = bisect.bisect_right(self.knots, u)
        u0, u1 = self.knots[i - 1], self.knots[i]
        v0, v1 = self.values[i - 1], self.values[i]
        return v0 + (v1 - v0) * (u - u0) / (u1 - u0)

    def right_derivative(self, u: Real) -> Union[Fraction, float]:
        u = _frac(u)
        if u >= self.knots[-1]:
            return math.inf if self.tail_slope is None else self.tail_slope
        i = bisect.bisect_right(self.knots, u)
        return self.slopes[i - 1]

    def left_derivative(self, u: Real) -> Union[Fraction, float]:
        u = _frac(u)
        if u <= 0:
            return self.slopes[0] if len(self.knots) > 1 else (self.tail_slope or Fraction(0))
        if u > self.knots[-1]:
            return math.inf if self.tail_slope is None else self.tail_slope
        i = bisect.bisect_left(self.knots, u)
        return self.slopes[i - 1]

    def scaled(self, factor: Real) -> "PiecewiseConvex":
        factor = _frac(factor)
        tail = None if self.tail_slope is None else self.tail_slope * factor
        return PiecewiseConvex(self.knots, tuple(v * factor for v in self.values), tail)

    def is_convex(self) -> bool:
        slopes = self.all_slopes
        return all(a <= b for a, b in zip(slopes, slopes[1:]))

    def is_increasing(self) -> bool:
        return all(s > 0 for s in self.all_slopes)

    def __repr__(self) -> str:
        return f"PiecewiseConvex(knots={len(self.knots)}, last={float(self.knots[-1]):.4g}, tail={self.tail_slope})"


def _require_convex(phi: PiecewiseConvex, name: str = "φ"):
    if not phi.is_convex():
        raise PreconditionError(f"{name} is not convex")


# ==================== YOUNG CONJUGATE ====================

def young_conjugate(phi: PiecewiseConvex) -> PiecewiseConvex:
    """
    Сопряженная по Юнгу функция ψ(v) = sup_u (uv − φ(u))

    Наклоны φ становятся узлами ψ, узлы φ — наклонами ψ. Если у φ конечный
    хвост наклона s, то ψ = +∞ при v > s; если φ = +∞ за u_K, то ψ
    продолжается с наклоном u_K.

    Raises:
        PreconditionError: φ не выпукла
    """
    _require_convex(phi)
    knots = [Fraction(0)]
    values = [Fraction(0)]
    slopes = phi.all_slopes
    for i, s in enumerate(slopes):
        if s < 0:
            raise PreconditionError("conjugate needs a non-decreasing φ")
        # максимум достигается в левом конце отрезка с наклоном s
        u_left, v_left = phi.knots[i], phi.values[i]
        if s == knots[-1]:
            continue
        knots.append(s)
        values.append(u_left * s - v_left)
    tail = phi.knots[-1] if phi.tail_slope is None else None
    return PiecewiseConvex(tuple(knots), tuple(values), tail)


def young_gap(phi: PiecewiseConvex, psi: PiecewiseConvex, u: Real, v: Real) -> Union[Fraction, float]:
    """φ(u) + ψ(v) − uv (неотрицательно по неравенству Юнга)"""
    left = phi(u)
    right = psi(v)
    if left == math.inf or right == math.inf:
        return math.inf
    return left + right - _frac(u) * _frac(v)


# ==================== LEMMA 4 ====================

@dataclass(frozen=True)
class NFunctionReport:
    """Проверка свойств N-функции на представленном диапазоне"""
    zero_at_zero: bool
    increasing: bool
    convex: bool
    small_at_zero: bool
    large_at_tail: bool

    @property
    def passed(self) -> bool:
        return all((self.zero_at_zero, self.increasing, self.convex, self.small_at_zero, self.large_at_tail))


@dataclass(frozen=True)
class EquivalenceCertificate:
    """c·α(u) ≤ α_ε(u) ≤ C·α(u) при u ≥ u_0 с явными константами"""
    c: Fraction
    C: Fraction
    u0: Fraction
    ratio_min: Fraction
    ratio_max: Fraction

    @property
    def holds(self) -> bool:
        return self.c <= self.ratio_min and self.ratio_max <= self.C


@dataclass(frozen=True)
class Lemma4Result:
    function: PiecewiseConvex
    report: NFunctionReport
    certificate: EquivalenceCertificate
    segments: int


def nfunction_report(phi: PiecewiseConvex) -> NFunctionReport:
    """
    Признаки N-функции: φ(0) = 0, возрастание, выпуклость,
    φ(u)/u убывает к нулю на первых узлах и наклоны растут на хвосте
    """
    positive = [(u, v) for u, v in zip(phi.knots, phi.values) if u > 0]
    ratios = [v / u for u, v in positive]
    small = len(ratios) >= 2 and ratios[0] < ratios[1] and ratios[0] == min(ratios)
    slopes = phi.all_slopes
    large = len(slopes) >= 2 and slopes[-1] > slopes[0] and (
        phi.tail_slope is None or slopes[-1] > phi.right_derivative(1)
    )
    return NFunctionReport(
        zero_at_zero=phi(0) == 0,
        increasing=phi.is_increasing(),
        convex=phi.is_convex(),
        small_at_zero=small,
        large_at_tail=large,
    )


def lemma4_nfunction(
    alpha: PiecewiseConvex,
    epsilon: Real,
    segments: int = 64,
    c: Real = Fraction(1, 2),
    C: Real = 2,
    u0: Real = 2,
) -> Lemma4Result:
    """
    N-функция α_ε, эквивалентная α на бесконечности

    α_ε(u) = ε u² на [0,1] (ломаная из segments хорд) и
    α_ε(u) = α(u) − α(1) + ε при u > 1.

    Args:
        alpha: Возрастающая выпуклая функция
        epsilon: ε > 0, 2ε ≤ α'_+(1)
        segments: Число хорд квадратичной головы
        c, C, u0: Проверяемые константы эквивалентности

    Raises:
        PreconditionError: "junction breaks convexity" при слишком большом ε
    """
    epsilon = _frac(epsilon)
    if epsilon <= 0:
        raise PreconditionError("ε must be positive")
    _require_convex(alpha, "α")
    if 2 * epsilon > alpha.right_derivative(1):
        raise PreconditionError(
            f"junction breaks convexity: 2ε = {2 * epsilon} exceeds α'(1+) = {alpha.right_derivative(1)}"
        )

    knots = [Fraction(i, segments) for i in range(segments + 1)]
    values = [epsilon * u * u for u in knots]
    shift = alpha(1) - epsilon
    for u, v in zip(alpha.knots, alpha.values):
        if u > 1:
            knots.append(u)
            values.append(v - shift)
    function = PiecewiseConvex(tuple(knots), tuple(values), alpha.tail_slope)

    certificate = _equivalence(alpha, function, _frac(c), _frac(C), _frac(u0))
    report = nfunction_report(function)
    logger.info(
        f"Lemma 4: ε={epsilon}, N-function={'ok' if report.passed else 'fail'}, "
        f"ratio ∈ [{certificate.ratio_min}, {certificate.ratio_max}]"
    )
    return Lemma4Result(function=function, report=report, certificate=certificate, segments=segments)


def _equivalence(alpha: PiecewiseConvex, other: PiecewiseConvex, c: Fraction, C: Fraction, u0: Fraction) -> EquivalenceCertificate:
    """
    Экстремумы other/α при u ≥ u0

    На каждом общем линейном куске отношение монотонно, поэтому достаточно
    концов кусков и предела на хвосте.
    """
    points = sorted({u0} | {u for u in alpha.knots + other.knots if u > u0})
    ratios = [other(u) / alpha(u) for u in points]
    if alpha.tail_slope is not None and other.tail_slope is not None and alpha.tail_slope > 0:
        ratios.append(other.tail_slope / alpha.tail_slope)
    return EquivalenceCertificate(c=c, C=C, u0=u0, ratio_min=min(ratios), ratio_max=max(ratios))


# ==================== LEMMA 3 ====================

@dataclass(frozen=True)
class GammaAnchor:
    """Точки склейки уровня j: γ = 2α_j на [u_j, v_j), касательная наклона 2M_j на [v_j, u_(j+1))"""
    j: int
    u: Fraction
    v: Optional[Fraction] = None
    slope: Optional[Fraction] = None


@dataclass(frozen=True)
class GammaConstruction:
    function: PiecewiseConvex
    anchors: Tuple[GammaAnchor, ...]
    bracket_ok: bool
    dominates_beta: bool


def _dominated(beta: PiecewiseConvex, alpha: PiecewiseConvex, scale: Fraction, start: Fraction) -> bool:
    """β ≤ α·scale на [start, конец представленного диапазона]"""
    end = alpha.last_knot
    points = sorted({start} | {u for u in alpha.knots + beta.knots if u > start})
    for u in points:
        if u > end and alpha.tail_slope is None:
            break
        b = beta(u)
        if b == math.inf or b > alpha(u) * scale:
            return False
    if alpha.tail_slope is None:
        return True
    return beta.tail_slope is not None and beta.tail_slope <= alpha.tail_slope * scale


def _tangent_crossing(alpha: PiecewiseConvex, level: int, v: Fraction, slope: Fraction) -> Optional[Fraction]:
    """
    Первая точка u > v, где касательная к α/2^level в v встречает α/2^(level+1)

    Возвращает None, если пересечения нет в представленном диапазоне.
    """
    base = alpha(v) / (1 << level)
    half = Fraction(1, 1 << (level + 1))

    def gap(u: Fraction) -> Fraction:
        return alpha(u) * half - (base + slope * (u - v))

    segment_starts = [u for u in alpha.knots if u > v]
    prev = v
    for u in segment_starts:
        if gap(u) >= 0:
            return _solve_linear(prev, u, gap(prev), gap(u))
        prev = u
    if alpha.tail_slope is not None and alpha.tail_slope * half > slope:
        g0 = gap(prev)
        return prev + (-g0) / (alpha.tail_slope * half - slope)
    return None


def _solve_linear(u0: Fraction, u1: Fraction, g0: Fraction, g1: Fraction) -> Fraction:
    if g1 == g0:
        return u1
    return u0 + (u1 - u0) * (-g0) / (g1 - g0)


def lemma3_gamma(alpha: PiecewiseConvex, beta: PiecewiseConvex) -> GammaConstruction:
    """
    Функция γ между β и α: γ ≥ β за u_1 и α/2^j ≤ γ ≤ α/2^(j−1) на [u_j, u_(j+1))

    Поиск u_j левосторонний по объединению узлов α и β: u_1 — первый
    положительный узел, за которым β ≤ α/2; далее для каждого кандидата
    v_j ≥ u_j берется касательная к α_j = α/2^j с наклоном M_j = α_j'(v_j+),
    u_(j+1) — её встреча с α_(j+1), при условии β ≤ α_(j+1) за u_(j+1)
    и M_j ≤ α_(j+1)'(u_(j+1)+).

    Raises:
        PreconditionError: "β is not o(α) on range"
    """
    _require_convex(alpha, "α")
    candidates = sorted({u for u in alpha.knots + beta.knots if 0 < u <= alpha.last_knot})
    u1 = next((u for u in candidates if _dominated(beta, alpha, Fraction(1, 2), u)), None)
    if u1 is None:
        raise PreconditionError("β is not o(α) on range")

    anchors: List[GammaAnchor] = []
    knots = [Fraction(0), u1]
    values = [Fraction(0), alpha(u1)]
    j, u_j = 1, u1
    while True:
        found = None
        for v in [u_j] + [u for u in alpha.knots if u > u_j]:
            slope = alpha.right_derivative(v) / (1 << j)
            if slope == math.inf:
                break
            crossing = _tangent_crossing(alpha, j, v, slope)
            if crossing is None or crossing <= v:
                continue
            if slope > alpha.right_derivative(crossing) / (1 << (j + 1)):
                continue
            if not _dominated(beta, alpha, Fraction(1, 1 << (j + 1)), crossing):
                continue
            found = (v, slope, crossing)
            break
        if found is None:
            break
        v, slope, crossing = found
        anchors.append(GammaAnchor(j=j, u=u_j, v=v, slope=slope))
        for u in alpha.knots:
            if u_j < u <= v:
                knots.append(u)
                values.append(alpha(u) / (1 << (j - 1)))
        knots.append(crossing)
        values.append(alpha(crossing) / (1 << j))
        logger.debug(f"Lemma 3: level {j} v={float(v):.4g} u_next={float(crossing):.4g}")
        j, u_j = j + 1, crossing

    anchors.append(GammaAnchor(j=j, u=u_j))
    for u in alpha.knots:
        if u > u_j:
            knots.append(u)
            values.append(alpha(u) / (1 << (j - 1)))
    tail = None if alpha.tail_slope is None else alpha.tail_slope / (1 << (j - 1))
    gamma = PiecewiseConvex(tuple(knots), tuple(values), tail)

    bracket_ok = gamma_bracket_holds(alpha, gamma, anchors)
    dominates = _dominated(beta, gamma, Fraction(1), u1)
    logger.info(f"Lemma 3: {len(anchors)} levels, bracket={'ok' if bracket_ok else 'FAIL'}")
    return GammaConstruction(function=gamma, anchors=tuple(anchors), bracket_ok=bracket_ok, dominates_beta=dominates)


def gamma_bracket_holds(alpha: PiecewiseConvex, gamma: PiecewiseConvex, anchors: Sequence[GammaAnchor]) -> bool:
    """
    Точная проверка 1/2^j ≤ γ/α ≤ 1/2^(j−1) на каждом [u_j, u_(j+1))

    Обе функции линейны между общими узлами, поэтому хватает концов.
    """
    end = alpha.last_knot
    all_knots = set(alpha.knots) | set(gamma.knots)
    for index, anchor in enumerate(anchors):
        start = anchor.u
        stop = anchors[index + 1].u if index + 1 < len(anchors) else end
        lower = Fraction(1, 1 << anchor.j)
        upper = Fraction(1, 1 << (anchor.j - 1))
        points = sorted({start, stop} | {u for u in all_knots if start < u < stop})
        for u in points:
            a = alpha(u)
            g = gamma(u)
            if not (a * lower <= g <= a * upper):
                logger.error(f"Lemma 3 bracket fails at u={float(u):.4g} on level {anchor.j}")
                return False
    return True


# ==================== INTEGRALS ====================

def orlicz_integral(f: StepFunction, phi: PiecewiseConvex) -> Union[Fraction, float]:
    """
    ∫ φ(|f|) = 2^(-N) Σ_c φ(|f(c)|)

    Для целочисленной f результат — точная дробь.

    Raises:
        PreconditionError: |f| выходит за представленный диапазон φ
    """
    if f.is_exact:
        unique, counts = np.unique(np.abs(f.values), return_counts=True)
        total = Fraction(0)
        for raw, count in zip(unique, counts):
            value = phi(Fraction(int(raw), 1 << f.scale_log2))
            if value == math.inf:
                raise PreconditionError(f"|f| = {int(raw)}/2^{f.scale_log2} exceeds φ knot range")
            total += value * int(count)
        return total / (1 << f.resolution)

    unique, counts = np.unique(np.abs(f.as_float()), return_counts=True)
    total = 0.0
    for raw, count in zip(unique, counts):
        value = phi(float(raw))
        if value == math.inf:
            raise PreconditionError(f"|f| = {raw} exceeds φ knot range")
        total += float(value) * int(count)
    return total / (1 << f.resolution)
