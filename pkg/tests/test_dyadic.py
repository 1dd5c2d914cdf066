"""
Тесты спектральной арифметики и двоичных точек
"""
import os
import sys
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

# Добавить корневую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.dyadic import (
    DyadicPoint,
    SequenceSource,
    SpectralNat,
    classify_sequence,
    generate_sequence,
    is_nested_step,
    is_separated_step,
    nested_diff,
    point_xor,
    variation,
    xor,
)
from services.errors import PreconditionError


naturals = st.integers(min_value=0, max_value=2 ** 80)


def test_spectrum_of_five():
    """Тест спектра числа 5"""
    n = SpectralNat.from_int(5)
    assert n.bits == (0, 2)
    assert n.value == 5
    assert n.max_exponent == 2
    assert 2 in n and 1 not in n


def test_from_exponents_rejects_repeats():
    """Тест запрета повторов в спектре"""
    with pytest.raises(PreconditionError, match="repeated"):
        SpectralNat.from_exponents([3, 1, 3])
    assert SpectralNat.from_exponents([4, 0]).value == 17


def test_ordering_by_top_exponent():
    """Тест сравнения по старшему различающемуся показателю"""
    values = [21, 4, 5, 0, 16, 1]
    ordered = sorted(SpectralNat.from_int(v) for v in values)
    assert [n.value for n in ordered] == sorted(values)


@pytest.mark.parametrize("n,expected", [
    (0, 0),
    (1, 2),
    (2, 2),
    (5, 4),
    (6, 2),
    (7, 2),
    (21, 6),
    (85, 8),
    (1365, 12),
])
def test_variation(n, expected):
    """Тест вариации V(n)"""
    assert variation(n) == expected


def test_variation_of_all_ones_is_two():
    """Тест V(2^k − 1) = 2 для любого k"""
    for k in range(1, 40):
        assert variation((1 << k) - 1) == 2


def test_xor_and_nested_diff():
    """Тест двоичного сложения и вложенной разности"""
    assert xor(5, 3).value == 6
    assert nested_diff(21, 5).value == 16
    assert nested_diff(341, 85).value == 256


def test_nested_diff_not_nested():
    """Тест отказа для невложенных спектров"""
    with pytest.raises(PreconditionError, match="not nested"):
        nested_diff(5, 2)


@given(naturals, naturals, naturals)
def test_xor_group_laws(a, b, c):
    """Тест законов группы (N, ⊕)"""
    assert xor(a, b) == xor(b, a)
    assert xor(xor(a, b), c) == xor(a, xor(b, c))
    assert xor(a, 0).value == a
    assert xor(a, a).value == 0
    assert xor(a, b).value == a ^ b


@given(naturals, naturals)
def test_nested_diff_matches_subtraction(low, high):
    """Тест: при вложенных спектрах разность совпадает с вычитанием"""
    a = low | high
    assert nested_diff(a, low).value == a - low


# ==================== POINTS ====================

def test_point_from_fraction():
    """Тест разложения 3/8 = 0.011"""
    x = DyadicPoint.from_fraction("3/8")
    assert x.resolution == 3
    assert x.bits == (0, 1, 1)
    assert x.value == Fraction(3, 8)
    assert x.cell_index(1) == 0
    assert x.cell_index(3) == 3
    assert x.leading_zeros == 1


def test_point_zero_has_no_leading_one():
    """Тест: у нуля нет ведущей единицы"""
    assert DyadicPoint.zero().leading_zeros is None
    assert DyadicPoint.from_fraction(0).value == 0


def test_point_rejects_non_dyadic():
    """Тест отказа для недвоичного знаменателя и выхода за [0,1)"""
    with pytest.raises(PreconditionError, match="power of two"):
        DyadicPoint.from_fraction(Fraction(1, 3))
    with pytest.raises(PreconditionError):
        DyadicPoint.from_fraction(1)
    with pytest.raises(PreconditionError, match="binary digit"):
        DyadicPoint.from_bits([0, 2])


def test_point_from_cell():
    """Тест левого конца ячейки"""
    x = DyadicPoint.from_cell(3, 5)
    assert x.value == Fraction(5, 8)
    assert x.cell_index(3) == 5
    with pytest.raises(PreconditionError):
        DyadicPoint.from_cell(2, 4)


def test_point_xor():
    """Тест двоичного сложения точек: 0.011 ⊕ 0.110 = 0.101"""
    x = DyadicPoint.from_bits([0, 1, 1])
    y = DyadicPoint.from_bits([1, 1, 0])
    assert point_xor(x, y).bits == (1, 0, 1)
    assert point_xor(x, x).value == 0


@given(st.integers(min_value=1, max_value=24), st.data())
def test_cell_round_trip(resolution, data):
    """Тест: ячейка левого конца совпадает с исходной"""
    index = data.draw(st.integers(min_value=0, max_value=(1 << resolution) - 1))
    x = DyadicPoint.from_cell(resolution, index)
    assert x.cell_index(resolution) == index
    assert x.value == Fraction(index, 1 << resolution)


# ==================== SEQUENCES ====================

@pytest.mark.parametrize("kind,expected", [
    ("nested-canonical", [5, 21, 85, 341]),
    ("nested-canonical-from-zero", [1, 5, 21, 85]),
    ("separated-canonical", [10, 336, 43520]),
    ("powers-of-two", [2, 4, 8, 16]),
])
def test_generate_sequence(kind, expected):
    """Тест первых членов именованных последовательностей"""
    terms = generate_sequence(kind, len(expected))
    assert [t.value for t in terms] == expected


def test_generate_sequence_rejects_bad_input():
    """Тест отказа для неизвестного вида и нулевой длины"""
    with pytest.raises(PreconditionError, match="unknown sequence kind"):
        generate_sequence("fibonacci", 3)
    with pytest.raises(PreconditionError):
        generate_sequence("powers-of-two", 0)


@pytest.mark.parametrize("kind", [
    "nested-canonical",
    "nested-canonical-from-zero",
    "separated-canonical",
    "powers-of-two",
])
def test_closed_form_matches_spectrum(kind):
    """Тест: замкнутая форма n_k совпадает со значением спектра"""
    source = SequenceSource.from_kind(kind)
    for k in range(1, 30):
        assert source.value(k) == source.term(k).value


def test_explicit_source_prefix_too_short():
    """Тест явного префикса"""
    source = SequenceSource.from_terms([1, 5, 21])
    assert source.is_explicit
    assert source.available == 3
    assert source.value(3) == 21
    with pytest.raises(PreconditionError, match="prefix too short"):
        source.term(4)


def test_index_at_least():
    """Тест поиска первого n_k ≥ границы"""
    source = SequenceSource.from_kind("nested-canonical-from-zero")
    assert source.index_at_least(20) == 3
    assert source.index_at_least(22) == 4
    assert source.index_at_least(1, start=2) == 2


def test_classify_nested_canonical():
    """Тест классификации вложенной последовательности"""
    report = classify_sequence([5, 21, 85])
    assert report.nested is True
    assert report.separated is False
    assert report.variation_profile == (4, 6, 8)
    assert report.unbounded_variation_evidence is True
    assert report.lacunary_ratio == Fraction(85, 21)


CANONICAL_PREFIX = generate_sequence("nested-canonical", 64)


@given(st.sets(st.integers(min_value=0, max_value=63), min_size=2))
def test_nested_subsequence_stays_nested(indices):
    """Тест: любая подпоследовательность вложенной последовательности вложена"""
    report = classify_sequence([CANONICAL_PREFIX[i] for i in sorted(indices)])
    assert report.nested is True


def test_canonical_variation_strictly_increasing():
    """Тест строгого роста V(n_k) на префиксе из 64 членов"""
    profile = classify_sequence(CANONICAL_PREFIX).variation_profile
    assert len(profile) == 64
    assert all(a < b for a, b in zip(profile, profile[1:]))


def test_classify_separated_and_powers():
    """Тест разделенной последовательности и степеней двойки"""
    separated = classify_sequence([10, 336, 43520])
    assert separated.separated is True
    assert separated.nested is False

    powers = classify_sequence([2, 4, 8, 16])
    assert powers.variation_profile == (2, 2, 2, 2)
    assert powers.unbounded_variation_evidence is False
    assert powers.lacunary_ratio == 2


def test_classify_compare_bound():
    """Тест оценки близости двух последовательностей"""
    report = classify_sequence([5, 21, 85], compare=[6, 20, 90])
    assert report.close_bound == 5
    assert report.to_dict()["lacunary_ratio"] == "85/21"


def test_classify_rejects_short_and_decreasing():
    """Тест отказа для короткого и невозрастающего префикса"""
    with pytest.raises(PreconditionError, match="at least two"):
        classify_sequence([5])
    with pytest.raises(PreconditionError, match="strictly increasing"):
        classify_sequence([21, 5])


def test_step_predicates():
    """Тест предикатов вложенности и разделенности"""
    a, b = SpectralNat.from_int(5), SpectralNat.from_int(21)
    assert is_nested_step(a, b)
    assert not is_separated_step(a, b)
    assert is_separated_step(SpectralNat.from_int(10), SpectralNat.from_int(336))
