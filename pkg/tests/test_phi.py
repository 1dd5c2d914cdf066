"""
Тесты функции роста φ_(n_k)
"""
import os
import sys
from fractions import Fraction

import pytest

# Добавить корневую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.dyadic import generate_sequence
from services.errors import PreconditionError
from services.orlicz import PiecewiseConvex
from services.phi import (
    Slope,
    build_phi,
    check_phi_properties,
    delta2_constant,
    spacing_rows,
    slope_less,
)


@pytest.fixture
def canonical_phi():
    """φ по первым пяти членам канонической вложенной последовательности"""
    return build_phi(generate_sequence("nested-canonical", 5))


def test_knots_in_exponent_form(canonical_phi):
    """Тест показателей e_ν = 2n_ν и вариаций"""
    assert canonical_phi.exponents == (10, 42, 170, 682, 2730)
    assert canonical_phi.variations == (4, 6, 8, 10, 12)
    assert canonical_phi.value_at_knot(2) == (42, 6)


def test_ratio_at_knots(canonical_phi):
    """Тест φ(2^e_ν) / 2^e_ν = V_ν в узлах"""
    assert canonical_phi.ratio_at_power(3) == 4
    assert canonical_phi.ratio_at_power(42) == 6
    assert canonical_phi.ratio_at_power(170) == 8
    with pytest.raises(PreconditionError):
        canonical_phi.ratio_at_power(2731)


def test_materialize_matches_exponent_form(canonical_phi):
    """Тест точной ломаной по первым двум узлам"""
    phi = canonical_phi.materialize(2)
    assert phi.knots == (0, 1 << 10, 1 << 42)
    assert phi(1 << 42) == 6 * (1 << 42)
    assert phi.is_convex()


def test_build_phi_rejects_bad_prefix():
    """Тест отказа для невложенного префикса и невозрастающей вариации"""
    with pytest.raises(PreconditionError, match="not nested"):
        build_phi([5, 10])
    with pytest.raises(PreconditionError, match="variation must strictly increase"):
        build_phi([1, 3])


def test_slope_comparison():
    """Тест сравнения наклонов в переставленной форме"""
    small = Slope(base=6, coef=2, gap=32)
    assert small.exact() == 6 + Fraction(2, (1 << 32) - 1)
    assert slope_less(Slope(base=4), small)
    assert slope_less(small, Slope(base=8, coef=2, gap=5000))
    # неточный наклон заключен в интервал
    lo, hi = Slope(base=8, coef=2, gap=5000).bounds(cap=64)
    assert lo == 8 and hi > 8


def test_spacing_rows(canonical_phi):
    """Тест вспомогательной оценки на каждом отрезке"""
    rows = spacing_rows(canonical_phi)
    assert [r.delta for r in rows] == [2, 2, 2, 2]
    assert [r.gap for r in rows] == [32, 128, 512, 2048]
    assert all(r.passed for r in rows)


def test_delta2_constant(canonical_phi):
    """Тест константы Δ2: максимум на первом отрезке"""
    expected = 2 + Fraction(2, 4) * (1 + Fraction(1, (1 << 32) - 1))
    assert delta2_constant(canonical_phi) == expected


def test_properties_of_canonical_phi(canonical_phi):
    """Тест выпуклости, сверхлинейности и Δ2 для канонической φ"""
    report = check_phi_properties(canonical_phi, Fraction(3))
    assert report.convex
    assert report.strictly_convex
    assert report.superlinear_evidence
    assert report.delta2
    assert not report.delta2_literal
    assert report.spacing
    low, high = report.growth_window
    assert 0 < low <= high


def test_delta2_bound_too_tight(canonical_phi):
    """Тест: граница Δ2 меньше фактической константы"""
    report = check_phi_properties(canonical_phi, Fraction(2))
    assert not report.delta2


def test_properties_of_linear():
    """Тест линейной φ: выпукла, но не сверхлинейна"""
    report = check_phi_properties(PiecewiseConvex.linear())
    assert report.convex
    assert not report.strictly_convex
    assert not report.superlinear_evidence
    assert report.delta2_constant == 2
    assert report.delta2_literal
    assert report.spacing is None
