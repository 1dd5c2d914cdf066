"""
Тесты кусочно-линейных функций роста, сопряжения по Юнгу и лемм 3–4
"""
import math
import os
import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

# Добавить корневую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.errors import PreconditionError
from services.orlicz import (
    PiecewiseConvex,
    gamma_bracket_holds,
    lemma3_gamma,
    lemma4_nfunction,
    nfunction_report,
    orlicz_integral,
    young_conjugate,
    young_gap,
)
from services.phi import build_phi
from services.walsh import dirichlet_dense


@pytest.fixture
def square():
    """Ломаная u² по узлам 0, 1, 2 с φ = +∞ за u = 2"""
    return PiecewiseConvex.from_points([(1, 1), (2, 4)])


@pytest.fixture
def alpha():
    """Выпуклая α с линейным хвостом наклона 10"""
    return PiecewiseConvex.from_points([(1, 2), (2, 6), (4, 20)], tail_slope=10)


def test_evaluation_and_tail(square, alpha):
    """Тест значений между узлами и за последним узлом"""
    assert square(Fraction(3, 2)) == Fraction(5, 2)
    assert square(2) == 4
    assert square(3) == math.inf
    assert alpha(5) == 30
    with pytest.raises(PreconditionError):
        square(-1)


def test_slopes_and_derivatives(alpha):
    """Тест наклонов и односторонних производных"""
    assert alpha.slopes == (2, 4, 7)
    assert alpha.all_slopes == (2, 4, 7, 10)
    assert alpha.right_derivative(1) == 4
    assert alpha.left_derivative(1) == 2
    assert alpha.is_convex() and alpha.is_increasing()


def test_constructor_validation():
    """Тест отказа для неупорядоченных узлов и φ(0) ≠ 0"""
    with pytest.raises(PreconditionError, match="strictly increasing"):
        PiecewiseConvex((0, 2, 1), (0, 1, 2))
    with pytest.raises(PreconditionError, match="φ\\(0\\) = 0"):
        PiecewiseConvex((0, 1), (1, 2))


def test_not_convex_detected():
    """Тест обнаружения невыпуклости"""
    bent = PiecewiseConvex.from_points([(1, 3), (2, 4)], tail_slope=5)
    assert not bent.is_convex()
    with pytest.raises(PreconditionError, match="not convex"):
        young_conjugate(bent)


def test_young_conjugate_of_square(square):
    """Тест сопряженной к ломаной u²"""
    psi = young_conjugate(square)
    assert psi.knots == (0, 1, 3)
    assert psi.values == (0, 0, 2)
    assert psi.tail_slope == 2
    assert psi(5) == 6


def test_young_conjugate_of_linear():
    """Тест: у φ(u) = u сопряженная равна +∞ за v = 1"""
    psi = young_conjugate(PiecewiseConvex.linear())
    assert psi(1) == 0
    assert psi(2) == math.inf


@settings(max_examples=200, deadline=None)
@given(
    st.fractions(min_value=0, max_value=2, max_denominator=64),
    st.fractions(min_value=0, max_value=8, max_denominator=64),
)
def test_young_inequality(u, v):
    """Тест неравенства Юнга uv ≤ φ(u) + ψ(v)"""
    phi = PiecewiseConvex.from_points([(1, 1), (2, 4)])
    psi = young_conjugate(phi)
    assert young_gap(phi, psi, u, v) >= 0


def test_orlicz_integral_of_kernel():
    """Тест ∫φ(|D_5|) для линейной и квадратичной φ"""
    kernel = dirichlet_dense(5, 3)
    assert orlicz_integral(kernel, PiecewiseConvex.linear()) == Fraction(7, 4)
    square = PiecewiseConvex.from_points([(1, 1), (3, 9), (5, 25)])
    # |D_5| = 5, 3 и шесть единиц
    assert orlicz_integral(kernel, square) == Fraction(25 + 9 + 6, 8)


def test_orlicz_integral_out_of_range():
    """Тест отказа, когда |f| выходит за диапазон φ"""
    with pytest.raises(PreconditionError, match="exceeds φ knot range"):
        orlicz_integral(dirichlet_dense(5, 3), PiecewiseConvex.from_points([(1, 1), (2, 4)]))


# ==================== LEMMA 4 ====================

def test_lemma4_nfunction(alpha):
    """Тест N-функции, эквивалентной α на бесконечности"""
    result = lemma4_nfunction(alpha, 1)
    assert result.function(1) == 1
    assert result.function(2) == 5
    assert result.report.passed
    assert result.certificate.holds
    assert result.certificate.ratio_min == Fraction(5, 6)
    assert result.certificate.ratio_max == 1


def test_lemma4_junction_breaks_convexity(alpha):
    """Тест отказа при 2ε > α'(1+)"""
    with pytest.raises(PreconditionError, match="junction breaks convexity"):
        lemma4_nfunction(alpha, 3)
    with pytest.raises(PreconditionError):
        lemma4_nfunction(alpha, 0)


def test_linear_is_not_nfunction():
    """Тест: φ(u) = u не является N-функцией"""
    report = nfunction_report(PiecewiseConvex.linear())
    assert report.zero_at_zero and report.convex
    assert not report.passed


# ==================== LEMMA 3 ====================

def test_lemma3_gamma_for_canonical_phi():
    """Тест γ между β(u) = u и α = φ канонической последовательности"""
    alpha = build_phi([5, 21, 85]).materialize()
    beta = PiecewiseConvex.linear()
    result = lemma3_gamma(alpha, beta)

    assert result.bracket_ok
    assert result.dominates_beta
    assert result.function.is_convex()
    assert result.anchors[0].u == 1
    assert gamma_bracket_holds(alpha, result.function, result.anchors)


def test_lemma3_gamma_for_square_knots():
    """Тест γ для α с узлами (2^i, 4^i)"""
    alpha = PiecewiseConvex.from_points([(1 << i, 1 << (2 * i)) for i in range(13)])
    result = lemma3_gamma(alpha, PiecewiseConvex.linear())
    assert result.bracket_ok
    assert result.dominates_beta
    assert result.anchors[0].u == 2
    assert result.function.is_convex()


def test_lemma3_beta_not_little_o():
    """Тест отказа, когда β не мала относительно α"""
    alpha = PiecewiseConvex.linear()
    with pytest.raises(PreconditionError, match="β is not o\\(α\\) on range"):
        lemma3_gamma(alpha, PiecewiseConvex.linear(2))
