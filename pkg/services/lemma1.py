"""
Многочлен расходимости P_ν и множество E_ν

Q = Π_{j=1}^{2^N} (1 + w_{δ_j} g_j), g = sgn D_{n_ν}, g_j(x) = g(x ⊕ (j−1)/2^N).
Числа δ_j выбираются последовательно: ветвь A (δ = n_k − n_ν, верхний
разрез δ + n_ν попадает в последовательность) или ветвь B
(δ = n_k − n_ν + 2^M, нижний разрез δ − λ попадает в последовательность).

Значения частичных сумм на разрезах вычисляются по факторизованной
форме, поэтому плотная сетка нужна только для перекрестной проверки.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

import config
from services.dyadic import DyadicPoint, SequenceSource, SpectralNat, variation
from services.errors import InvariantViolation, PreconditionError
from services.metrics import metrics, track_check, track_grid, track_points_sampled
from services.sampling import PointSampler, cell_indices, wilson_interval
from services.walsh import (
    StepFunction,
    WalshCoefficients,
    dirichlet_dense,
    fwht,
    l1_norm,
    partial_sum,
    sign_function,
    walsh_grid,
)


logger = logging.getLogger(__name__)

BRANCH_A = "A"
BRANCH_B = "B"

HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)


def _check(tag: str, passed: bool, message: str, value=None):
    """Записать вердикт; при провале — InvariantViolation с тегом"""
    track_check(tag, passed, value, "" if passed else message)
    if not passed:
        raise InvariantViolation(tag, message)


def _walsh_sign(index: int, digits: int) -> int:
    return -1 if (index & digits).bit_count() & 1 else 1


# ==================== BASE ====================

@dataclass(frozen=True, eq=False)
class Lemma1Base:
    """
    Исходные данные уровня ν

    Attributes:
        g: sgn D_{n_ν} на разрешении N
        local_sums: S_{n_ν}(g) на разрешении N
        norm: ‖D_{n_ν}‖₁ = S_{n_ν}(g)(0)
    """
    nu: int
    n_nu: SpectralNat
    N: int
    g: StepFunction
    local_sums: StepFunction
    norm: Fraction
    variation: int


def build_base(seq: SequenceSource, nu: int, factor_cap_log2: Optional[int] = None) -> Lemma1Base:
    """
    Функция g = sgn D_{n_ν} и проверка S_{n_ν}(g)(0) = ‖D_{n_ν}‖₁ ≥ V(n_ν)/8

    S_{n_ν}(g) — многочлен степени < 2^N, поэтому он постоянен на Δ(N, 1).

    Raises:
        PreconditionError: n_ν = 0 или 2^N множителей превышают предел
        InvariantViolation: Нарушена одна из проверок
    """
    cap = config.WALSH_FACTOR_CAP_LOG2 if factor_cap_log2 is None else factor_cap_log2
    n = seq.term(nu)
    if not n:
        raise PreconditionError("Lemma 1 needs n_ν ≥ 1")
    N = n.max_exponent + 1
    if N > cap:
        raise PreconditionError(f"level too large for desk scale: 2^{N} factors exceed 2^{cap}")

    kernel = dirichlet_dense(n, N)
    g = sign_function(kernel)
    norm = l1_norm(kernel)
    v = variation(n)
    local_sums = partial_sum(fwht(g), n)

    at_zero = local_sums.value_at_cell(0)
    _check("base", at_zero == norm, f"S_n(g)(0) = {at_zero} differs from ‖D_n‖₁ = {norm}", str(norm))
    _check("sandwich", Fraction(v, 8) <= norm <= v, f"‖D_n‖₁ = {norm} outside [V/8, V] for V = {v}", str(norm))
    logger.info(f"Level ν={nu}: n_ν={n.value if N <= 64 else n}, N={N}, V={v}, ‖D‖₁={norm}")
    return Lemma1Base(nu=nu, n_nu=n, N=N, g=g, local_sums=local_sums, norm=norm, variation=v)


def _is_nested_int(a: int, b: int) -> bool:
    """Sp(b) ∩ [0, max Sp(a)] = Sp(a) для целых"""
    if a == 0:
        return True
    return b & ((1 << a.bit_length()) - 1) == a


def minimal_out_of_spectrum(seq: SequenceSource, N: int, scan: Optional[int] = None) -> int:
    """
    Наименьшее M ≥ N, не входящее ни в один спектр Sp(n_k)

    Для вложенной последовательности младшие биты последнего
    просмотренного члена (до его старшего бита) уже окончательны, поэтому
    M сертифицируется, если M < max Sp(n_last) и M ∉ Sp(n_last).

    Raises:
        PreconditionError: "cannot certify M" или префикс не вложен
    """
    if scan is None:
        scan = config.WALSH_PREFIX_LENGTH
    last_index = seq.available if seq.is_explicit else scan
    values = [seq.value(k) for k in range(1, last_index + 1)]
    for a, b in zip(values, values[1:]):
        if not _is_nested_int(a, b):
            raise PreconditionError("not nested")
    last = values[-1]
    for m in range(N, last.bit_length() - 1):
        if not (last >> m) & 1:
            logger.debug(f"M = {m} certified by n_{last_index}")
            return m
    raise PreconditionError(f"cannot certify M ≥ {N} from the first {last_index} terms")


# ==================== DELTA SELECTION ====================

@dataclass(frozen=True)
class BranchMeasures:
    """
    Точные меры условий выбора на Δ(N, j) (в долях |Δ(N, j)|)

    Attributes:
        active: Число i < j с g_i ≠ 0 на ячейке
        upper: Мера {|R*_j + S_{n_ν}(g_j)| ≥ V/16}
        lower: Мера {|R*_j| ≥ V/16}
    """
    j: int
    active: int
    upper: Fraction
    lower: Fraction


def branch_measures(base: Lemma1Base, j: int) -> BranchMeasures:
    """
    Меры обоих условий на Δ(N, j) до выбора δ_j

    На Δ(N, j) имеем g_j = 1, S_{n_ν}(g_j) = ‖D‖₁ и R*_j = head_j − 1.
    Характеры w_{δ_i} (i < j) на ячейке — независимые равновероятные знаки
    (старшие показатели δ_i различны и не меньше N), поэтому
    head_j = 2^m с вероятностью 2^(−m) и 0 иначе.
    """
    cell = j - 1
    c = base.g.values[np.arange(j - 1) ^ cell]
    m = int(np.count_nonzero(c))
    threshold = Fraction(base.variation, 16)
    p_top = Fraction(1, 1 << m)
    outcomes = [(1 << m, p_top)]
    if m:
        outcomes.append((0, 1 - p_top))
    upper = sum((p for head, p in outcomes if abs(head - 1 + base.norm) >= threshold), Fraction(0))
    lower = sum((p for head, p in outcomes if abs(head - 1) >= threshold), Fraction(0))
    return BranchMeasures(j=j, active=m, upper=upper, lower=lower)


@dataclass(frozen=True)
class DeltaChoice:
    """
    Выбранное δ_j

    Attributes:
        source_k: Индекс k члена n_k, на который попадает назначенный разрез
        branch: A (δ = n_k − n_ν) или B (δ = n_k − n_ν + 2^M)
        value: δ_j
    """
    j: int
    source_k: int
    branch: str
    value: int
    measures: BranchMeasures

    @property
    def spectrum(self) -> SpectralNat:
        return SpectralNat.from_int(self.value)


def select_deltas(seq: SequenceSource, base: Lemma1Base, M: int) -> Tuple[DeltaChoice, ...]:
    """
    Последовательный выбор δ_1, …, δ_{2^N}

    Ветвь A предпочтительна, когда выполнены оба условия; внутри ветви
    берется минимальный допустимый k, так что δ_1 ≥ 2^M + 1 и
    δ_{j+1} ≥ 2(δ_j + 2^M).

    Raises:
        PreconditionError: "prefix too short" или префикс не вложен
        InvariantViolation: Ни одно из условий не выполнено
    """
    n_nu = base.n_nu.value
    two_m = 1 << M
    floor = two_m + 1
    k = base.nu + 1
    choices: List[DeltaChoice] = []

    for j in range(1, (1 << base.N) + 1):
        measures = branch_measures(base, j)
        if measures.upper >= HALF:
            branch = BRANCH_A
        elif measures.lower >= HALF:
            branch = BRANCH_B
        else:
            raise InvariantViolation(
                "branch_choice", f"neither condition holds on Δ(N,{j}): {measures.upper}, {measures.lower}"
            )
        while True:
            if not seq.has(k):
                raise PreconditionError(f"prefix too short: no admissible n_k for δ_{j}")
            n_k = seq.value(k)
            if not _is_nested_int(n_nu, n_k):
                raise PreconditionError("not nested")
            if (n_k >> M) & 1:
                raise PreconditionError(f"cannot certify M: bit {M} set in n_{k}")
            delta = n_k - n_nu + (two_m if branch == BRANCH_B else 0)
            if delta >= floor:
                break
            k += 1
        choices.append(DeltaChoice(j=j, source_k=k, branch=branch, value=delta, measures=measures))
        logger.debug(f"δ_{j}: branch {branch}, k={k}, active={measures.active}")
        floor = 2 * (delta + two_m)
        k += 1

    counts = sum(1 for c in choices if c.branch == BRANCH_A)
    logger.info(f"Level ν={base.nu}: {len(choices)} δ_j chosen ({counts} A / {len(choices) - counts} B), last k={choices[-1].source_k}")
    return tuple(choices)


# ==================== ARTIFACT ====================

@dataclass(frozen=True, eq=False)
class Lemma1Artifact:
    """
    Полный результат построения P_ν

    Attributes:
        deg_Q: δ_{2^N} + deg(g)
        cover_index, cover_cap: k и n_k = min{n_k ≥ deg(Q)}
        q_dense: Сетка Q (только если степень помещается в предел сетки)
    """
    base: Lemma1Base
    M: int
    deltas: Tuple[DeltaChoice, ...]
    deg_Q: int
    cover_index: int
    cover_cap: int
    q_dense: Optional[StepFunction] = None
    q_coefficients: Optional[WalshCoefficients] = None

    @property
    def nu(self) -> int:
        return self.base.nu

    @property
    def N(self) -> int:
        return self.base.N

    @property
    def n_nu(self) -> int:
        return self.base.n_nu.value

    @property
    def lam(self) -> int:
        """λ = 2^M − n_ν"""
        return (1 << self.M) - self.n_nu

    @property
    def variation(self) -> int:
        return self.base.variation

    @property
    def threshold(self) -> Fraction:
        return Fraction(self.base.variation, 16)

    @property
    def is_dense(self) -> bool:
        return self.q_dense is not None

    @property
    def min_positive_index(self) -> int:
        """Нижняя граница наименьшего положительного индекса спектра Q"""
        return self.deltas[0].value

    def cut_pair(self, j: int) -> Tuple[int, int]:
        """(δ_j − λ, δ_j + n_ν)"""
        delta = self.deltas[j - 1].value
        return delta - self.lam, delta + self.n_nu

    def designated_cut(self, j: int) -> int:
        lower, upper = self.cut_pair(j)
        return upper if self.deltas[j - 1].branch == BRANCH_A else lower

    @property
    def cut_pairs(self) -> List[Tuple[int, int]]:
        return [self.cut_pair(j) for j in range(1, len(self.deltas) + 1)]

    def to_dict(self) -> dict:
        rows = []
        for choice in self.deltas:
            lower, upper = self.cut_pair(choice.j)
            rows.append({
                "j": choice.j,
                "branch": choice.branch,
                "source_k": choice.source_k,
                "delta_exponents": list(choice.spectrum.bits),
                "lower_cut": lower,
                "upper_cut": upper,
                "measure16": choice.measures.upper,
                "measure17": choice.measures.lower,
            })
        return {
            "nu": self.nu,
            "n_nu": self.n_nu,
            "N": self.N,
            "M": self.M,
            "lambda": self.lam,
            "variation": self.variation,
            "kernel_norm": self.base.norm,
            "g": [int(v) for v in self.base.g.values],
            "deg_Q": self.deg_Q,
            "cover_index": self.cover_index,
            "cover_cap": self.cover_cap,
            "dense_resolution": self.q_dense.resolution if self.q_dense is not None else None,
            "branches": rows,
        }


def _check_structure(seq: SequenceSource, base: Lemma1Base, M: int, deltas: Tuple[DeltaChoice, ...]):
    two_m = 1 << M
    lam = two_m - base.n_nu.value

    delta_growth = deltas[0].value >= two_m + 1 and all(
        b.value >= 2 * (a.value + two_m) for a, b in zip(deltas, deltas[1:])
    )
    _check("delta_growth", delta_growth, "δ_j growth condition violated")
    _check("lambda", lam > 0, f"λ = {lam} is not positive", lam)

    for choice in deltas:
        n_k = seq.value(choice.source_k)
        if choice.branch == BRANCH_A:
            ok = choice.value + base.n_nu.value == n_k and choice.value - lam != n_k
        else:
            ok = choice.value - lam == n_k and choice.value + base.n_nu.value != n_k
        if not ok:
            _check("branches", False, f"δ_{choice.j} cut does not land on n_{choice.source_k}")
    track_check("branches", True, len(deltas))

    width = 1 << base.N
    for a, b in zip(deltas, deltas[1:]):
        head_degree = a.value + width - 1
        if not (head_degree < 1 << a.value.bit_length() and a.value.bit_length() <= b.value.bit_length() - 1):
            _check("head_degree", False, f"head degree before δ_{b.j} not below 2^max Sp(δ_{b.j})")
    track_check("head_degree", True)
    _check("q_scale", width <= 2 * base.n_nu.value, "2^N exceeds 2n_ν")


def assemble_Q(
    seq: SequenceSource,
    base: Lemma1Base,
    M: int,
    deltas: Tuple[DeltaChoice, ...],
    grid_cap_log2: Optional[int] = None,
) -> Lemma1Artifact:
    """
    Собрать Q и проверить его свойства

    Факторизованная форма хранится всегда; при deg(Q) < 2^cap строится
    плотная сетка и проверяются: 0 ≤ Q ≤ 2^(2^N), ∫Q = 1, отсутствие
    коэффициентов в (0, ν), совпадение блоков [δ_j, δ_j + 2^N) с ĝ_j и
    локализация остальных коэффициентов, а также точные меры ветвей.

    Raises:
        InvariantViolation: С тегом проваленного соотношения
    """
    cap = config.WALSH_GRID_CAP_LOG2 if grid_cap_log2 is None else grid_cap_log2
    _check_structure(seq, base, M, deltas)

    g_coeffs = fwht(base.g)
    deg_q = deltas[-1].value + g_coeffs.degree()
    cover_index = seq.index_at_least(deg_q, start=base.nu)
    artifact = Lemma1Artifact(
        base=base,
        M=M,
        deltas=deltas,
        deg_Q=deg_q,
        cover_index=cover_index,
        cover_cap=seq.value(cover_index),
    )

    resolution = max(base.N, deg_q.bit_length())
    if resolution > cap:
        logger.info(f"Level ν={base.nu}: deg(Q) needs 2^{resolution} cells, factored form only")
        return artifact

    with metrics.timer("densify_seconds", {"nu": base.nu}):
        q_dense, q_coeffs = _densify(base, deltas, resolution)
    _check_dense(artifact, q_dense, q_coeffs, g_coeffs)
    return Lemma1Artifact(
        base=base,
        M=M,
        deltas=deltas,
        deg_Q=deg_q,
        cover_index=cover_index,
        cover_cap=artifact.cover_cap,
        q_dense=q_dense,
        q_coefficients=q_coeffs,
    )


def _densify(base: Lemma1Base, deltas: Tuple[DeltaChoice, ...], resolution: int):
    """Перемножить множители на сетке с попутной проверкой мер ветвей"""
    size = 1 << resolution
    per_cell = 1 << (resolution - base.N)
    coarse = np.arange(size, dtype=np.int64) >> (resolution - base.N)
    den = base.norm.denominator
    num = base.norm.numerator

    q = np.ones(size, dtype=np.int64)
    for choice in deltas:
        j = choice.j
        head = q[(j - 1) * per_cell:j * per_cell]
        shifted = 16 * (head - 1)
        upper = np.count_nonzero(np.abs(shifted * den + 16 * num) >= base.variation * den)
        lower = np.count_nonzero(np.abs(shifted) >= base.variation)
        observed = (Fraction(int(upper), per_cell), Fraction(int(lower), per_cell))
        if observed != (choice.measures.upper, choice.measures.lower):
            _check("branch_measures", False, f"Δ(N,{j}): dense {observed} vs exact {(choice.measures.upper, choice.measures.lower)}")
        g_j = base.g.values[coarse ^ (j - 1)]
        q *= 1 + walsh_grid(choice.value, resolution).values * g_j
    track_check("branch_measures", True, len(deltas))
    track_grid(size, "Q")

    q_dense = StepFunction(resolution, q)
    return q_dense, fwht(q_dense)


def _check_dense(artifact: Lemma1Artifact, q_dense: StepFunction, q_coeffs: WalshCoefficients, g_coeffs: WalshCoefficients):
    base = artifact.base
    width = 1 << base.N
    values = q_dense.values

    top = 1 << width
    _check("q_range", int(values.min()) >= 0 and int(values.max()) <= top,
           f"Q range [{values.min()}, {values.max()}] outside [0, 2^{width}]", int(values.max()))
    _check("integral", q_coeffs.coefficient(0) == 1, f"∫Q = {q_coeffs.coefficient(0)}", "1")

    support = q_coeffs.support()
    positive = support[support > 0]
    min_positive = int(positive[0]) if positive.size else None
    _check("spectrum_gap", min_positive is None or min_positive >= base.nu,
           f"coefficient at {min_positive} inside (0, ν)", min_positive)
    _check("degree", q_coeffs.degree() == artifact.deg_Q,
           f"dense degree {q_coeffs.degree()} differs from {artifact.deg_Q}", artifact.deg_Q)

    # блоки [δ_j, δ_j + 2^N) совпадают с ĝ_j
    cells = np.arange(width, dtype=np.int64)
    for choice in artifact.deltas:
        g_j = fwht(StepFunction(base.N, base.g.values[cells ^ (choice.j - 1)]))
        block = q_coeffs.coeffs[choice.value:choice.value + width]
        if not np.array_equal(block << g_j.scale_log2, g_j.coeffs << q_coeffs.scale_log2):
            _check("block_copies", False, f"coefficients at δ_{choice.j} + h differ from ĝ_{choice.j}(h)")
    track_check("block_copies", True, len(artifact.deltas))

    allowed = np.zeros(q_coeffs.coeffs.size, dtype=bool)
    allowed[0] = True
    two_m = 1 << artifact.M
    previous = None
    for choice in artifact.deltas:
        allowed[choice.value:choice.value + width] = True
        if previous is not None:
            allowed[previous + width + 1:choice.value - two_m] = True
        previous = choice.value
    stray = np.flatnonzero((q_coeffs.coeffs != 0) & ~allowed)
    _check("spectrum_localized", stray.size == 0, f"{stray.size} coefficients outside the localized blocks", int(stray.size))


def construct_lemma1(
    seq: SequenceSource,
    nu: int,
    grid_cap_log2: Optional[int] = None,
    factor_cap_log2: Optional[int] = None,
) -> Lemma1Artifact:
    """Полный конвейер: база, M, выбор δ_j, сборка Q"""
    with metrics.timer("lemma1_seconds", {"nu": nu}):
        base = build_base(seq, nu, factor_cap_log2)
        M = minimal_out_of_spectrum(seq, base.N)
        deltas = select_deltas(seq, base, M)
        return assemble_Q(seq, base, M, deltas, grid_cap_log2)


# ==================== POINTWISE ENGINE ====================

@dataclass(frozen=True)
class CutValue:
    """
    Значение частичной суммы Q на разрезе в точке

    value = head + remainder + local, где remainder = w_δ·R*_j(x),
    local = w_δ·S_{n_ν}(g_j)(x) (ноль для нижнего разреза).
    """
    point: DyadicPoint
    cut: int
    value: Fraction
    head: int
    remainder: Fraction
    local: Fraction

    @property
    def cut_spectrum(self) -> SpectralNat:
        return SpectralNat.from_int(self.cut)


def eval_cut(artifact: Lemma1Artifact, x: DyadicPoint, j: int) -> Tuple[CutValue, CutValue]:
    """
    S_{δ_j − λ}(Q)(x) и S_{δ_j + n_ν}(Q)(x) по факторизованной форме

    S_{δ_j−λ}(Q) = head_j + w_{δ_j} g_j (head_j − 1),
    S_{δ_j+n_ν}(Q) = S_{δ_j−λ}(Q) + w_{δ_j} S_{n_ν}(g_j).
    """
    if not 1 <= j <= len(artifact.deltas):
        raise PreconditionError(f"no cut pair with index {j}")
    base = artifact.base
    cell = x.cell_index(base.N)
    digits = x.digits
    g = base.g.values

    head = 1
    for choice in artifact.deltas[:j - 1]:
        c = int(g[cell ^ (choice.j - 1)])
        if c:
            head *= 1 + _walsh_sign(choice.value, digits) * c
            if head == 0:
                break

    choice = artifact.deltas[j - 1]
    w = _walsh_sign(choice.value, digits)
    remainder = Fraction(w * int(g[cell ^ (j - 1)]) * (head - 1))
    local = w * base.local_sums.value_at_cell(cell ^ (j - 1))
    lower_cut, upper_cut = artifact.cut_pair(j)
    lower = CutValue(point=x, cut=lower_cut, value=head + remainder, head=head, remainder=remainder, local=Fraction(0))
    upper = CutValue(point=x, cut=upper_cut, value=head + remainder + local, head=head, remainder=remainder, local=local)
    return lower, upper


def cut_profile(artifact: Lemma1Artifact, x: DyadicPoint) -> List[Tuple[Fraction, Fraction]]:
    """Пары (S_{δ_j−λ}(Q)(x), S_{δ_j+n_ν}(Q)(x)) для всех j за один проход по множителям"""
    base = artifact.base
    cell = x.cell_index(base.N)
    g = base.g.values
    head = 1
    profile = []
    for choice in artifact.deltas:
        c = int(g[cell ^ (choice.j - 1)])
        w = _walsh_sign(choice.value, x.digits)
        lower = Fraction(head + w * c * (head - 1))
        profile.append((lower, lower + w * base.local_sums.value_at_cell(cell ^ (choice.j - 1))))
        head *= 1 + w * c
    return profile


def point_value(artifact: Lemma1Artifact, x: DyadicPoint) -> int:
    """Q(x) как произведение множителей"""
    cell = x.cell_index(artifact.N)
    g = artifact.base.g.values
    product = 1
    for choice in artifact.deltas:
        c = int(g[cell ^ (choice.j - 1)])
        if c:
            product *= 1 + _walsh_sign(choice.value, x.digits) * c
            if product == 0:
                return 0
    return product


def partial_sum_at(artifact: Lemma1Artifact, m: int, x: DyadicPoint) -> Fraction:
    """
    S_m(Q)(x) для разрезов, вычислимых по факторизованной форме

    m = 0 → 0; 0 < m ≤ δ_1 → 1; m > deg(Q) → Q(x); разрезы пар δ_j − λ,
    δ_j + n_ν → eval_cut.

    Raises:
        PreconditionError: Разрез проходит через блок Sp(R_j)
    """
    if m == 0:
        return Fraction(0)
    if m <= artifact.min_positive_index:
        return Fraction(1)
    if m > artifact.deg_Q:
        return Fraction(point_value(artifact, x))
    for j in range(1, len(artifact.deltas) + 1):
        lower, upper = artifact.cut_pair(j)
        if m == lower or m == upper:
            low_value, up_value = eval_cut(artifact, x, j)
            return low_value.value if m == lower else up_value.value
    raise PreconditionError(f"cut {m} is not pointwise-computable from the factored form")


@dataclass
class CutBatch:
    """Значения на всех разрезах для пакета точек (строка — точка, столбец — j−1)"""
    cells: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    q_values: np.ndarray
    designated: np.ndarray


class CutEvaluator:
    """
    Пакетная оценка разрезов по матрице двоичных цифр

    Четности w_{n_k} для вложенной последовательности — префиксные XOR
    по столбцам Sp(n_{k_max}), так как Sp(n_k) — начальный отрезок
    этого спектра; w_δ = w_{n_k} w_{n_ν} (r_M для ветви B).
    """

    def __init__(self, artifact: Lemma1Artifact, seq: SequenceSource):
        self.artifact = artifact
        k_max = max(c.source_k for c in artifact.deltas)
        last = seq.value(k_max)
        for choice in artifact.deltas:
            if not _is_nested_int(seq.value(choice.source_k), last):
                raise PreconditionError("not nested")
        self.columns = np.array(SpectralNat.from_int(last).bits, dtype=np.int64)
        self.prefix_sizes = np.array([seq.value(c.source_k).bit_count() for c in artifact.deltas], dtype=np.int64)
        self.nu_size = artifact.n_nu.bit_count()
        self.is_b = np.array([c.branch == BRANCH_B for c in artifact.deltas], dtype=np.uint8)
        self.resolution = int(max(self.columns[-1], artifact.M)) + 1
        base = artifact.base
        self.local = base.local_sums.as_float()
        self.g = base.g.values.astype(np.int64)
        self.width = 1 << base.N

    def evaluate(self, bits: np.ndarray) -> CutBatch:
        if bits.shape[1] < self.resolution:
            pad = np.zeros((bits.shape[0], self.resolution - bits.shape[1]), dtype=np.uint8)
            bits = np.hstack([bits, pad])
        artifact = self.artifact
        parity = np.bitwise_xor.accumulate(bits[:, self.columns], axis=1)
        par_nu = parity[:, self.nu_size - 1]
        par = parity[:, self.prefix_sizes - 1] ^ par_nu[:, None] ^ (self.is_b[None, :] & bits[:, artifact.M][:, None])
        w = 1 - 2 * par.astype(np.int64)

        cells = cell_indices(bits, artifact.N)
        shifted = cells[:, None] ^ np.arange(self.width, dtype=np.int64)
        G = self.g[shifted]
        factors = 1 + w * G
        zeros = (factors == 0).astype(np.int64)
        twos = (factors == 2).astype(np.int64)
        zeros_before = np.cumsum(zeros, axis=1) - zeros
        twos_before = np.cumsum(twos, axis=1) - twos
        # после нулевого множителя head_j = 0, показатель там не нужен
        exponent = np.where(zeros_before > 0, 0, twos_before)
        if exponent.size and int(exponent.max()) >= 53:
            logger.warning("⚠️ head_j exceeds 2^53 at some sampled point, float values are no longer exact")
        head = np.where(zeros_before > 0, 0.0, np.ldexp(1.0, exponent))

        lower = head + w * G * (head - 1.0)
        upper = lower + w * self.local[shifted]
        dead = zeros.sum(axis=1) > 0
        q_values = np.where(dead, 0.0, np.ldexp(1.0, np.where(dead, 0, twos.sum(axis=1))))
        designated = np.where(self.is_b[None, :] == 1, lower, upper)
        return CutBatch(cells=cells, lower=lower, upper=upper, q_values=q_values, designated=designated)


def batch_partial_sum(artifact: Lemma1Artifact, m: int, batch: CutBatch) -> np.ndarray:
    """
    S_m(Q) для пакета точек по тем же правилам, что partial_sum_at

    Raises:
        PreconditionError: Разрез проходит через блок Sp(R_j)
    """
    rows = batch.q_values.shape[0]
    if m == 0:
        return np.zeros(rows)
    if m <= artifact.min_positive_index:
        return np.ones(rows)
    if m > artifact.deg_Q:
        return batch.q_values
    for j in range(1, len(artifact.deltas) + 1):
        lower, upper = artifact.cut_pair(j)
        if m == lower:
            return batch.lower[:, j - 1]
        if m == upper:
            return batch.upper[:, j - 1]
    raise PreconditionError(f"cut {m} is not pointwise-computable from the factored form")


# ==================== E_ν ====================

@dataclass
class EReport:
    """
    Мера E_ν в ячейках Δ(N, j) и свидетельства k(ν, x)

    Attributes:
        exact: Меры точные (плотная сетка) или выборочные
        cell_measures: Мера E_ν ∩ Δ(N, j) в долях ячейки
        cell_intervals: Интервалы Уилсона (только для выборки)
        witness_counts: Сколько точек свидетельствует каждый k
    """
    exact: bool
    threshold: Fraction
    cell_measures: List[Union[Fraction, float]]
    overall: Union[Fraction, float]
    witness_counts: Dict[int, int]
    min_witness_value: Union[Fraction, float, None]
    cover_ok: bool
    gap_ok: bool
    samples: Optional[int] = None
    cell_intervals: Optional[List[Tuple[float, float]]] = None

    @property
    def passed(self) -> bool:
        if self.exact:
            return all(m >= QUARTER for m in self.cell_measures) and self.cover_ok and self.gap_ok
        return self.overall >= 0.25 and self.cover_ok and self.gap_ok and all(
            hi >= 0.25 for _, hi in (self.cell_intervals or [])
        )

    def to_dict(self) -> dict:
        return {
            "exact": self.exact,
            "threshold": self.threshold,
            "cell_measures": list(self.cell_measures),
            "overall": self.overall,
            "samples": self.samples,
            "witness_counts": {str(k): v for k, v in sorted(self.witness_counts.items())},
            "min_witness_value": self.min_witness_value,
            "cover_ok": self.cover_ok,
            "gap_ok": self.gap_ok,
            "passed": self.passed,
        }


def extract_E(
    artifact: Lemma1Artifact,
    seq: SequenceSource,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> EReport:
    """
    E_ν = {x : max_j |S_{cut_j}(Q)(x)| ≥ V(n_ν)/16} по назначенным разрезам

    На плотном артефакте меры точные, иначе оцениваются по выборке.

    Raises:
        InvariantViolation: Точная мера в какой-либо ячейке меньше 1/4
    """
    if artifact.is_dense:
        report = _extract_dense(artifact)
        for j, measure in enumerate(report.cell_measures, start=1):
            if measure < QUARTER:
                _check("e_measure", False, f"|E ∩ Δ(N,{j})| = {measure} < 1/4")
        track_check("e_measure", True, str(min(report.cell_measures)))
    else:
        count = config.WALSH_SAMPLE_COUNT if samples is None else samples
        report = _extract_sampled(artifact, seq, count, seed)
        track_check("e_measure_sampled", report.passed, round(float(report.overall), 6))
    track_check("witness_cut", report.cover_ok, artifact.cover_index)
    track_check("cut_gap", report.gap_ok, str(Fraction(artifact.variation, 8)))
    return report


def _extract_dense(artifact: Lemma1Artifact) -> EReport:
    coeffs = artifact.q_coefficients
    resolution = coeffs.resolution
    limit = 1 << resolution
    threshold = artifact.threshold

    # частичные суммы двоично-рациональны и точно представимы в float64
    best = np.full(limit, -1.0)
    best_j = np.zeros(limit, dtype=np.int64)
    for j in range(1, len(artifact.deltas) + 1):
        cut = min(artifact.designated_cut(j), limit)
        values = partial_sum(coeffs, cut)
        magnitude = np.abs(values.as_float())
        better = magnitude > best
        best = np.where(better, magnitude, best)
        best_j = np.where(better, j, best_j)

    in_e = best >= float(threshold)
    per_cell = 1 << (resolution - artifact.N)
    cell_measures = [
        Fraction(int(np.count_nonzero(in_e[c * per_cell:(c + 1) * per_cell])), per_cell)
        for c in range(1 << artifact.N)
    ]
    witness_ks = np.array([c.source_k for c in artifact.deltas], dtype=np.int64)[best_j[in_e] - 1]
    ks, counts = np.unique(witness_ks, return_counts=True)
    cover_ok = all(artifact.cover_index >= k >= artifact.nu for k in ks.tolist())

    # зазор между разрезами пары j на своей ячейке Δ(N, j)
    gap_ok = True
    gap = Fraction(artifact.variation, 8)
    for j in range(1, len(artifact.deltas) + 1):
        lower_cut, upper_cut = artifact.cut_pair(j)
        low = partial_sum(coeffs, min(lower_cut, limit))
        up = partial_sum(coeffs, min(upper_cut, limit))
        chunk = slice((j - 1) * per_cell, j * per_cell)
        diff = np.abs(up.values[chunk] * (1 << low.scale_log2) - low.values[chunk] * (1 << up.scale_log2))
        denominator = 1 << (low.scale_log2 + up.scale_log2)
        if diff.size and Fraction(int(diff.min()), denominator) < gap:
            gap_ok = False

    min_value = Fraction(float(best[in_e].min())) if np.any(in_e) else None
    return EReport(
        exact=True,
        threshold=threshold,
        cell_measures=cell_measures,
        overall=Fraction(int(np.count_nonzero(in_e)), limit),
        witness_counts=dict(zip(ks.tolist(), counts.tolist())),
        min_witness_value=min_value,
        cover_ok=cover_ok,
        gap_ok=gap_ok,
    )


def _extract_sampled(artifact: Lemma1Artifact, seq: SequenceSource, count: int, seed: Optional[int]) -> EReport:
    evaluator = CutEvaluator(artifact, seq)
    sampler = PointSampler(evaluator.resolution, seed)
    width = 1 << artifact.N
    hits = np.zeros(width, dtype=np.int64)
    totals = np.zeros(width, dtype=np.int64)
    witness: Dict[int, int] = {}
    ks = np.array([c.source_k for c in artifact.deltas], dtype=np.int64)
    threshold = float(artifact.threshold)
    gap = artifact.variation / 8
    gap_ok = True
    min_value = None

    for bits in sampler.bit_batches(count):
        batch = evaluator.evaluate(bits)
        magnitude = np.abs(batch.designated)
        best_j = magnitude.argmax(axis=1)
        best = magnitude[np.arange(magnitude.shape[0]), best_j]
        in_e = best >= threshold
        hits += np.bincount(batch.cells[in_e], minlength=width)
        totals += np.bincount(batch.cells, minlength=width)
        for k, n in zip(*np.unique(ks[best_j[in_e]], return_counts=True)):
            witness[int(k)] = witness.get(int(k), 0) + int(n)
        own = np.abs(batch.upper - batch.lower)[np.arange(batch.cells.size), batch.cells]
        if own.size and own.min() < gap:
            gap_ok = False
        if np.any(in_e):
            low = float(best[in_e].min())
            min_value = low if min_value is None else min(min_value, low)
    track_points_sampled(count, artifact.nu)

    measures = [float(h / t) if t else 0.0 for h, t in zip(hits, totals)]
    intervals = [wilson_interval(int(h), int(t)) for h, t in zip(hits, totals)]
    cover_ok = all(artifact.cover_index >= k >= artifact.nu for k in witness)
    return EReport(
        exact=False,
        threshold=artifact.threshold,
        cell_measures=measures,
        overall=float(hits.sum() / max(1, totals.sum())),
        witness_counts=witness,
        min_witness_value=min_value,
        cover_ok=cover_ok,
        gap_ok=gap_ok,
        samples=count,
        cell_intervals=intervals,
    )
