"""
План уровней и усеченная функция-свидетель f*_J

f*_J = Σ_{j≤J} (M_j / V(n_ν(j))) P_ν(j). Уровни разнесены по спектру:
все коэффициенты P_ν(i) при i < j лежат ниже n_α(j), а при i > j — выше
n_β(j), поэтому частичные суммы f*_J на разрезах уровня j телескопируются
к одному слагаемому.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

import config
from services.dyadic import DyadicPoint, SequenceSource, SpectralNat, nested_diff, variation
from services.errors import InvariantViolation, PreconditionError
from services.lemma1 import (
    BRANCH_A,
    CutBatch,
    CutEvaluator,
    Lemma1Artifact,
    batch_partial_sum,
    construct_lemma1,
    cut_profile,
    partial_sum_at,
    point_value,
)
from services.metrics import metrics, track_check, track_points_sampled
from services.orlicz import PiecewiseConvex, orlicz_integral
from services.phi import ExponentPhi
from services.sampling import PointSampler, bits_to_points, cell_indices
from services.walsh import WalshCoefficients, fwht_inverse


logger = logging.getLogger(__name__)

PhiLike = Union[PiecewiseConvex, ExponentPhi]

# флаговые сертификаты проверяются точно на первых точках выборки
FLAT_EXACT_POINTS = 256

# доля точек выборки, где хотя бы один уровень достигает порога
HIT_FRACTION_MIN = Fraction(1, 4)


def _phi_ratio(phi: PhiLike, m: int) -> Fraction:
    """φ(2^m) / 2^m"""
    if isinstance(phi, ExponentPhi):
        value = phi.ratio_at_power(m)
        return value if isinstance(value, Fraction) else Fraction(value)
    u = Fraction(1 << m)
    value = phi(u)
    if value == math.inf:
        raise PreconditionError(f"φ is not represented at 2^{m}")
    return Fraction(value) / u


# ==================== PLAN ====================

@dataclass(frozen=True, eq=False)
class LevelPlan:
    """
    Уровень j плана

    Attributes:
        weight: M_j
        alpha, beta: Индексы двух членов после N_ν(j) (n_α < n_β)
        cap_index: Индекс k с n_k = N_ν(j) = min{n_k ≥ deg P_ν(j)}
        term: (M_j / V) φ(2^(2n_ν)) / 2^(2n_ν)
    """
    j: int
    weight: int
    nu: int
    alpha: int
    beta: int
    cap_index: int
    term: Fraction
    budget: Fraction
    artifact: Lemma1Artifact

    @property
    def variation(self) -> int:
        return self.artifact.variation

    @property
    def scale(self) -> Fraction:
        """M_j / V(n_ν(j))"""
        return Fraction(self.weight, self.variation)


@dataclass(eq=False)
class WitnessPlan:
    """Жадный план уровней 1..J вместе с артефактами P_ν(j)"""
    seq: SequenceSource
    phi: PhiLike
    levels: List[LevelPlan] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.levels)

    @property
    def total_term(self) -> Fraction:
        return sum((level.term for level in self.levels), Fraction(0))

    def n(self, k: int) -> int:
        return self.seq.value(k)

    def to_dict(self) -> dict:
        rows = []
        for level in self.levels:
            rows.append({
                "j": level.j,
                "M": level.weight,
                "nu": level.nu,
                "n_nu": level.artifact.n_nu,
                "variation": level.variation,
                "alpha": level.alpha,
                "beta": level.beta,
                "n_alpha": self.n(level.alpha),
                "n_beta": self.n(level.beta),
                "cap_index": level.cap_index,
                "deg_Q": level.artifact.deg_Q,
                "term": level.term,
                "budget": level.budget,
            })
        return {"sequence": self.seq.name, "horizon": self.horizon, "total_term": self.total_term, "levels": rows}


def _check_phi_decay(seq: SequenceSource, phi: PhiLike, last_nu: int):
    """φ(2^(2n_ν)) / φ_(n_k)(2^(2n_ν)) не возрастает на просмотренных ν"""
    previous = None
    for nu in range(1, last_nu + 1):
        n = seq.value(nu)
        ratio = _phi_ratio(phi, 2 * n) / variation(n)
        if previous is not None and ratio > previous:
            raise PreconditionError(f"φ is not o(φ_(n_k)) on range: ratio grows at ν={nu}")
        previous = ratio


def plan_levels(
    seq: SequenceSource,
    phi: PhiLike,
    horizon: Optional[int] = None,
    grid_cap_log2: Optional[int] = None,
    scan: Optional[int] = None,
) -> WitnessPlan:
    """
    Построить план: M_j = j, бюджет 2^(−j), ν(j) минимально с term_j ≤ бюджета

    N_ν(j) берется из построенного P_ν(j) (min n_k ≥ deg), α = cap + 1,
    β = cap + 2, следующий уровень начинается с β + 1, так что в зазоре
    (N_ν(j), n_ν(j+1)) лежат ровно два члена.

    Raises:
        PreconditionError: Префикс исчерпан или уровень не помещается
    """
    J = config.WALSH_HORIZON if horizon is None else horizon
    scan = config.WALSH_PREFIX_LENGTH if scan is None else scan
    if J < 1:
        raise PreconditionError("horizon must be at least 1")
    plan = WitnessPlan(seq=seq, phi=phi)
    k_min = 1

    for j in range(1, J + 1):
        budget = Fraction(1, 1 << j)
        nu = k_min
        while True:
            if not seq.has(nu) or nu > k_min + scan:
                raise PreconditionError(f"prefix exhausted while planning level {j} (reached ν={nu})")
            n = seq.value(nu)
            # узлы φ_(n_k) стоят в u = 2^(2n_k), отношение берется в том же узле
            term = Fraction(j, variation(n)) * _phi_ratio(phi, 2 * n)
            if term <= budget:
                break
            nu += 1
        _check_phi_decay(seq, phi, nu)
        logger.info(f"Level {j}: ν={nu}, term={term} ≤ {budget}")

        artifact = construct_lemma1(seq, nu, grid_cap_log2)
        cap_index = artifact.cover_index
        alpha, beta = cap_index + 1, cap_index + 2
        if not seq.has(beta):
            raise PreconditionError(f"prefix too short: level {j} needs n_{beta}")
        plan.levels.append(LevelPlan(
            j=j, weight=j, nu=nu, alpha=alpha, beta=beta, cap_index=cap_index,
            term=term, budget=budget, artifact=artifact,
        ))
        k_min = beta + 1

    _verify_plan(plan)
    return plan


def _verify_plan(plan: WitnessPlan):
    levels = plan.levels
    track_check("weights_increasing", all(a.weight < b.weight for a, b in zip(levels, levels[1:])), [lv.weight for lv in levels])
    total = plan.total_term
    track_check("terms_summable", total <= 1 and all(lv.term <= lv.budget for lv in levels), str(total))
    ok = True
    for lv in levels:
        n_alpha, n_beta = plan.n(lv.alpha), plan.n(lv.beta)
        ok &= lv.artifact.deg_Q <= plan.n(lv.cap_index) < n_alpha < n_beta
    for a, b in zip(levels, levels[1:]):
        between = [k for k in range(a.cap_index + 1, b.nu) if plan.n(a.cap_index) < plan.n(k) < b.artifact.n_nu]
        ok &= len(between) >= 2 and b.artifact.n_nu > plan.n(a.cap_index)
    if not ok:
        track_check("level_gap", False, detail="level gap holds fewer than two terms")
        raise InvariantViolation("level_gap", "level gap holds fewer than two terms")
    track_check("level_gap", True, len(levels))


# ==================== WITNESS ====================

@dataclass
class WitnessValue:
    """
    Значения f*_J в точке

    Attributes:
        sup_value: max |S_c(f*_J)(x)| по назначенным разрезам всех уровней
        level_diffs: max_c |S_c(f*_J) − S_anchor(f*_J)| для каждого уровня
        thresholds: (M_j / V_j)(V_j / 16 − 1)
        in_e: Попадает ли x в E_ν(j)
        flat: S_{n_β(j)}(f*_J) − S_{n_α(j)}(f*_J)
    """
    point: DyadicPoint
    sup_value: Fraction
    best_level: int
    best_cut: int
    level_diffs: List[Fraction]
    thresholds: List[Fraction]
    in_e: List[bool]
    flat: List[Fraction]

    @property
    def passed(self) -> bool:
        bound_ok = all(d >= t for d, t, e in zip(self.level_diffs, self.thresholds, self.in_e) if e)
        return bound_ok and all(f == 0 for f in self.flat)


def level_threshold(level: LevelPlan) -> Fraction:
    return level.scale * (Fraction(level.variation, 16) - 1)


def flat_certificate(plan: WitnessPlan, x: DyadicPoint) -> List[Fraction]:
    """S_{n_β(j)}(f*_J)(x) − S_{n_α(j)}(f*_J)(x) для каждого уровня"""
    result = []
    for level in plan.levels:
        upper = _witness_partial_sum(plan, plan.n(level.beta), x)
        lower = _witness_partial_sum(plan, plan.n(level.alpha), x)
        result.append(upper - lower)
    return result


def _witness_partial_sum(plan: WitnessPlan, m: int, x: DyadicPoint) -> Fraction:
    return sum((lv.scale * partial_sum_at(lv.artifact, m, x) for lv in plan.levels), Fraction(0))


def witness_sup(plan: WitnessPlan, x: DyadicPoint) -> WitnessValue:
    """
    Нижняя граница sup_m |S_m(f*_J)(x)| по назначенным разрезам

    Для разреза c уровня j: S_c(f*) = Σ_{i<j} s_i P_i(x) + s_j S_c(P_j)(x) + Σ_{i>j} s_i,
    где s_i = M_i / V_i; якорь уровня j — n_β(j−1) (для j = 1 — разрез 1).

    Raises:
        InvariantViolation: Флаговый сертификат не равен нулю (tag "flat_segment")
    """
    values = [Fraction(point_value(lv.artifact, x)) for lv in plan.levels]
    sup_value = Fraction(-1)
    best_level = best_cut = 0
    diffs, thresholds, in_e = [], [], []

    for idx, level in enumerate(plan.levels):
        below = sum((lv.scale * v for lv, v in zip(plan.levels[:idx], values[:idx])), Fraction(0))
        above = sum((lv.scale for lv in plan.levels[idx + 1:]), Fraction(0))
        artifact = level.artifact
        profile = cut_profile(artifact, x)
        designated = [up if c.branch == BRANCH_A else low for c, (low, up) in zip(artifact.deltas, profile)]

        best_diff = Fraction(0)
        top = Fraction(0)
        for j, value in enumerate(designated, start=1):
            total = below + level.scale * value + above
            if abs(total) > sup_value:
                sup_value, best_level, best_cut = abs(total), level.j, artifact.designated_cut(j)
            best_diff = max(best_diff, level.scale * abs(value - 1))
            top = max(top, abs(value))
        diffs.append(best_diff)
        thresholds.append(level_threshold(level))
        in_e.append(top >= artifact.threshold)

    flat = flat_certificate(plan, x)
    if any(f != 0 for f in flat):
        raise InvariantViolation("flat_segment", f"flat segment broken at x={x}: {flat}")
    return WitnessValue(
        point=x, sup_value=sup_value, best_level=best_level, best_cut=best_cut,
        level_diffs=diffs, thresholds=thresholds, in_e=in_e, flat=flat,
    )


@dataclass
class WitnessReport:
    """
    Итог выборочной проверки свидетеля

    Attributes:
        rows: Строки witness.csv для точек из E_ν(j)
        in_e: Число точек в E_ν(j) по уровням
        failures: Число точек из E_ν(j), где разность уровня ниже порога
        hits: Число точек, где разность хотя бы одного уровня достигает порога
        flat_max: max |S_{n_β} − S_{n_α}| по всем точкам выборки и уровням
    """
    samples: int
    seed: int
    rows: List[dict]
    in_e: Dict[int, int]
    failures: Dict[int, int]
    hits: int
    flat_checked: int
    flat_max: float = 0.0

    @property
    def hit_fraction(self) -> Fraction:
        return Fraction(self.hits, self.samples) if self.samples else Fraction(0)

    @property
    def passed(self) -> bool:
        return not any(self.failures.values()) and self.hit_fraction >= HIT_FRACTION_MIN and self.flat_max == 0

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "seed": self.seed,
            "in_e": {str(k): v for k, v in self.in_e.items()},
            "failures": {str(k): v for k, v in self.failures.items()},
            "hits": self.hits,
            "hit_fraction": self.hit_fraction,
            "flat_checked": self.flat_checked,
            "flat_max": self.flat_max,
            "passed": self.passed,
        }


def _bits_tag(row: np.ndarray) -> str:
    return "".join(str(int(b)) for b in row[:32])


def _batch_flat(plan: WitnessPlan, batches: List[CutBatch]) -> np.ndarray:
    """|S_{n_β(j)}(f*_J) − S_{n_α(j)}(f*_J)| для пакета, столбец — уровень j"""
    columns = []
    for target in plan.levels:
        n_alpha, n_beta = plan.n(target.alpha), plan.n(target.beta)
        total = np.zeros(batches[0].q_values.shape[0])
        for level, batch in zip(plan.levels, batches):
            # разность двоично-рациональных значений точна, масштаб после нее
            step = batch_partial_sum(level.artifact, n_beta, batch) - batch_partial_sum(level.artifact, n_alpha, batch)
            total += float(level.scale) * step
        columns.append(np.abs(total))
    return np.stack(columns, axis=1)


def sample_witness(plan: WitnessPlan, samples: Optional[int] = None, seed: Optional[int] = None) -> WitnessReport:
    """
    Проверить оценку уровня на выборке пакетным движком

    Флаговые сертификаты считаются пакетно во всех точках выборки и
    дополнительно точно через partial_sum_at на первых FLAT_EXACT_POINTS.

    Raises:
        InvariantViolation: Флаговый сертификат не равен нулю (tag "flat_segment")
    """
    count = config.WALSH_SAMPLE_COUNT if samples is None else samples
    seed = config.WALSH_SEED if seed is None else seed
    evaluators = [CutEvaluator(lv.artifact, plan.seq) for lv in plan.levels]
    resolution = max(e.resolution for e in evaluators)
    sampler = PointSampler(resolution, seed)
    scales = [float(lv.scale) for lv in plan.levels]
    thresholds = [level_threshold(lv) for lv in plan.levels]

    rows: List[dict] = []
    in_e = {lv.j: 0 for lv in plan.levels}
    failures = {lv.j: 0 for lv in plan.levels}
    hits = 0
    flat_checked = 0
    flat_max = 0.0

    with metrics.timer("witness_seconds"):
        for bits in sampler.bit_batches(count):
            batches = [e.evaluate(bits) for e in evaluators]
            hit = np.zeros(bits.shape[0], dtype=bool)
            for idx, (level, batch) in enumerate(zip(plan.levels, batches)):
                magnitude = np.abs(batch.designated)
                best = magnitude.argmax(axis=1)
                member = magnitude[np.arange(bits.shape[0]), best] >= float(level.artifact.threshold)
                diff = scales[idx] * np.abs(batch.designated - 1.0).max(axis=1)
                passed = diff >= float(thresholds[idx])
                hit |= passed
                in_e[level.j] += int(member.sum())
                failures[level.j] += int((member & ~passed).sum())
                branches = level.artifact.deltas
                for p in np.flatnonzero(member):
                    choice = branches[int(best[p])]
                    rows.append({
                        "x_bits": _bits_tag(bits[p]),
                        "level": level.j,
                        "cut_tag": f"L{level.j}.j{choice.j}{choice.branch}",
                        "value": float(diff[p]),
                        "threshold": thresholds[idx],
                        "pass": bool(passed[p]),
                    })
            hits += int(hit.sum())

            flat = _batch_flat(plan, batches)
            flat_max = max(flat_max, float(flat.max()) if flat.size else 0.0)
            if flat_max != 0:
                track_check("flat_segment", False, detail=f"flat segment broken in batch, max {flat_max}")
                raise InvariantViolation("flat_segment", f"flat segment broken on sampled points: max {flat_max}")

            if flat_checked < FLAT_EXACT_POINTS:
                take = min(FLAT_EXACT_POINTS - flat_checked, bits.shape[0])
                for x in bits_to_points(bits[:take]):
                    exact = flat_certificate(plan, x)
                    if any(f != 0 for f in exact):
                        track_check("flat_segment", False, detail=f"flat segment broken at {x}")
                        raise InvariantViolation("flat_segment", f"flat segment broken at x={x}: {exact}")
                flat_checked += take
    track_points_sampled(count)

    report = WitnessReport(
        samples=count, seed=seed, rows=rows, in_e=in_e, failures=failures,
        hits=hits, flat_checked=flat_checked, flat_max=flat_max,
    )
    track_check("flat_segment", True, count)
    for level in plan.levels:
        track_check(f"witness_L{level.j}", failures[level.j] == 0, in_e[level.j])
    track_check("witness_hits", report.hit_fraction >= HIT_FRACTION_MIN, str(report.hit_fraction))
    logger.info(f"Witness: {count} points, E hits {in_e}, level hits {report.hit_fraction}, failures {failures}")
    return report


# ==================== ORLICZ BOUND ====================

def orlicz_bound_check(artifact: Lemma1Artifact, phi: PhiLike) -> Tuple[Fraction, Fraction]:
    """
    ∫ φ(P_ν) ≤ φ(2^(2n_ν)) / 2^(2n_ν) · ∫ P_ν на плотном артефакте

    Returns:
        (левая часть, правая часть)

    Raises:
        PreconditionError: Артефакт не плотный
        InvariantViolation: Неравенство нарушено (tag "orlicz_bound")
    """
    if not artifact.is_dense:
        raise PreconditionError("orlicz bound needs a dense artifact")
    if isinstance(phi, ExponentPhi):
        phi = phi.materialize()
    lhs = Fraction(orlicz_integral(artifact.q_dense, phi))
    rhs = _phi_ratio(phi, 2 * artifact.n_nu) * artifact.q_coefficients.coefficient(0)
    if lhs > rhs:
        track_check("orlicz_bound", False, str(lhs), f"∫φ(P) = {lhs} > {rhs}")
        raise InvariantViolation("orlicz_bound", f"∫φ(P) = {lhs} exceeds {rhs}")
    track_check("orlicz_bound", True, str(lhs))
    return lhs, rhs


# ==================== RELOCATION ====================

def sparse_partial_sum(coefficients: Dict[int, Fraction], m: int, x: DyadicPoint) -> Fraction:
    """S_m по разреженному набору {индекс: коэффициент} (индексы любой величины)"""
    total = Fraction(0)
    for k, c in coefficients.items():
        if k < m:
            total += -c if (k & x.digits).bit_count() & 1 else c
    return total


@dataclass
class Relocation:
    """
    Q*_r = w_δ Q_r со спектром в (n_α(j), n_β(j)]

    Attributes:
        level: j(r) — минимальный уровень с deg Q_r < n_α(j)
        delta: δ = n_β(j) − n_α(j)
    """
    r: int
    level: int
    delta: SpectralNat
    source: WalshCoefficients
    relocated: WalshCoefficients
    checks: Dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        support = self.relocated.support()
        return {
            "r": self.r,
            "level": self.level,
            "delta_exponents": list(self.delta.bits),
            "degree": self.source.degree(),
            "support_min": int(support[0]) if support.size else None,
            "support_max": int(support[-1]) if support.size else None,
            "checks": dict(self.checks),
        }


def spectral_relocate(
    q_r: WalshCoefficients,
    plan: WitnessPlan,
    r: int = 0,
    samples: int = 64,
    seed: Optional[int] = None,
    grid_cap_log2: Optional[int] = None,
) -> Relocation:
    """
    Перенести спектр Q_r в зазор уровня j(r)

    j(r): первый уровень со строгим неравенством deg Q_r < n_α(j). При
    deg Q_r = n_α(j) старший член попал бы в n_β, а S_{n_β} его не содержит.

    Проверяет: Sp(Q*) ⊂ (n_α, n_β], S_{n_β}(Q*) = Q*, S_{n_α}(Q*) = 0,
    |Q*| = |Q_r| в точках выборки и, при j(r) < J, совпадение разреженных
    частичных сумм на n_β(j) и N_ν(j+1).

    Raises:
        PreconditionError: "degree exceeds anchor" или сетка не помещается
        InvariantViolation: Нарушено одно из тождеств
    """
    cap = config.WALSH_GRID_CAP_LOG2 if grid_cap_log2 is None else grid_cap_log2
    deg = q_r.degree()
    index = next((i for i, lv in enumerate(plan.levels) if deg < plan.n(lv.alpha)), None)
    if index is None:
        raise PreconditionError(f"degree exceeds anchor: deg Q_r = {deg}")
    level = plan.levels[index]
    n_alpha, n_beta = plan.n(level.alpha), plan.n(level.beta)
    delta = nested_diff(n_beta, n_alpha)
    resolution = n_beta.bit_length()
    if resolution > cap:
        raise PreconditionError(f"relocated grid 2^{resolution} exceeds the resolution cap 2^{cap}")

    source = q_r.coeffs[:deg + 1]
    out = np.zeros(1 << resolution, dtype=source.dtype)
    shift = delta.value
    support = np.flatnonzero(source)
    if np.any(support & shift):
        raise InvariantViolation("relocated_support", "δ ⊕ h differs from δ + h")
    out[shift:shift + deg + 1] = source
    relocated = WalshCoefficients(resolution, out, q_r.scale_log2)

    nz = relocated.support()
    checks = {
        "relocated_support": bool(nz.size == 0 or (nz[0] > n_alpha and nz[-1] <= n_beta)),
        "above_beta_zero": not np.any(out[n_beta:]),
        "below_alpha_zero": not np.any(out[:n_alpha]),
    }

    # |Q*| = |Q_r| в точках выборки
    sampler = PointSampler(resolution, seed)
    bits = next(sampler.bit_batches(samples))
    cells = cell_indices(bits, resolution)
    padded = np.zeros(1 << resolution, dtype=source.dtype)
    padded[:deg + 1] = source
    original = fwht_inverse(WalshCoefficients(resolution, padded, q_r.scale_log2)).values
    moved = fwht_inverse(relocated).values
    checks["modulus"] = bool(np.array_equal(np.abs(original[cells]), np.abs(moved[cells])))

    if index + 1 < len(plan.levels):
        sparse = {int(k): relocated.coefficient(int(k)) for k in nz}
        cut_hi = plan.n(plan.levels[index + 1].cap_index)
        ok = True
        for x in bits_to_points(bits[:16]):
            ok &= sparse_partial_sum(sparse, n_beta, x) == sparse_partial_sum(sparse, cut_hi, x)
        checks["relocated_sums"] = bool(ok)

    for tag, passed in checks.items():
        track_check(tag, passed, r)
    if not all(checks.values()):
        failed = [tag for tag, passed in checks.items() if not passed]
        raise InvariantViolation(failed[0], f"relocation {r} breaks {', '.join(failed)}")
    return Relocation(r=r, level=level.j, delta=delta, source=q_r, relocated=relocated, checks=checks)


def random_polynomial(rng: np.random.Generator, degree_below: int, resolution: int) -> WalshCoefficients:
    """Случайный целочисленный многочлен Уолша степени < degree_below"""
    deg = int(rng.integers(0, degree_below))
    coeffs = np.zeros(1 << resolution, dtype=np.int64)
    coeffs[:deg + 1] = rng.integers(-3, 4, size=deg + 1)
    coeffs[deg] = int(rng.choice([-2, -1, 1, 2]))
    return WalshCoefficients(resolution, coeffs)


def relocate_batch(plan: WitnessPlan, count: int, seed: Optional[int] = None) -> List[Relocation]:
    """Перенести count случайных многочленов со степенью ниже n_α(1)"""
    seed = config.WALSH_SEED if seed is None else seed
    rng = np.random.Generator(np.random.PCG64(seed))
    anchor = plan.n(plan.levels[0].alpha)
    resolution = max(1, (anchor - 1).bit_length())
    results = []
    for r in range(1, count + 1):
        q_r = random_polynomial(rng, anchor, resolution)
        results.append(spectral_relocate(q_r, plan, r=r, seed=seed + r))
    logger.info(f"Relocated {count} polynomials into level gaps")
    return results
