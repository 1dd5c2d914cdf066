"""
Тесты системы Уолша: преобразование, ядра Дирихле, нормы
"""
import os
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Добавить корневую директорию в путь
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from services.dyadic import DyadicPoint, variation
from services.errors import PreconditionError
from services.walsh import (
    StepFunction,
    WalshCoefficients,
    dirichlet_dense,
    dirichlet_point,
    fwht,
    fwht_inverse,
    integral,
    kernel_table,
    l1_norm,
    partial_sum,
    rademacher,
    sign_function,
    walsh_eval,
    walsh_grid,
)


def test_first_rademacher_on_halves():
    """Тест r_0: +1 на [0, 1/2), −1 на [1/2, 1)"""
    assert list(walsh_grid(1, 1).values) == [1, -1]
    assert rademacher(0, DyadicPoint.from_fraction("1/4")) == 1
    assert rademacher(0, DyadicPoint.from_fraction("3/4")) == -1


@pytest.mark.parametrize("k", range(8))
def test_fwht_of_walsh_is_delta(k):
    """Тест порядка Пэли: преобразование w_k — единица на месте k"""
    coeffs = fwht(walsh_grid(k, 3))
    assert coeffs.is_exact
    assert coeffs.coefficient(k) == 1
    assert list(coeffs.support()) == [k]


def test_fwht_of_constant():
    """Тест преобразования константы"""
    coeffs = fwht(StepFunction.constant(4, 3))
    assert coeffs.coefficient(0) == 3
    assert coeffs.degree() == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.data())
def test_fwht_inverse_restores_values(resolution, data):
    """Тест обратимости точного преобразования"""
    size = 1 << resolution
    values = data.draw(st.lists(st.integers(min_value=-1000, max_value=1000), min_size=size, max_size=size))
    f = StepFunction(resolution, np.array(values, dtype=np.int64))
    back = fwht_inverse(fwht(f))
    assert np.array_equal(back.as_float(), f.as_float())


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=255), st.integers(min_value=0, max_value=255))
def test_walsh_character_property(a, b):
    """Тест w_a · w_b = w_(a ⊕ b)"""
    product = walsh_grid(a, 8).values * walsh_grid(b, 8).values
    assert np.array_equal(product, walsh_grid(a ^ b, 8).values)


@pytest.mark.parametrize("resolution", range(1, 13))
def test_parseval_on_float_grid(resolution):
    """Тест равенства Парсеваля для случайной функции с плавающими значениями"""
    rng = np.random.Generator(np.random.PCG64(resolution))
    f = StepFunction(resolution, rng.standard_normal(1 << resolution))
    assert f.value_kind == "float"
    energy = float(np.mean(f.as_float() ** 2))
    spectrum = float(np.sum(fwht(f).as_float() ** 2))
    assert abs(energy - spectrum) <= 1e-10 * energy


@pytest.mark.parametrize("resolution", range(0, 9))
def test_walsh_orthonormality(resolution):
    """Тест ∫ w_j w_k = [j = k] для всех j, k < 2^N"""
    size = 1 << resolution
    W = np.stack([walsh_grid(k, resolution).values for k in range(size)])
    assert np.array_equal(W @ W.T, size * np.eye(size, dtype=np.int64))


def test_walsh_eval_matches_grid():
    """Тест поточечного w_n против сетки"""
    for n in range(32):
        grid = walsh_grid(n, 5)
        for cell in range(32):
            x = DyadicPoint.from_cell(5, cell)
            assert walsh_eval(n, x) == grid.values[cell]


def test_dirichlet_five():
    """Тест D_5 на разрешении 3: значения, знак и норма 7/4"""
    kernel = dirichlet_dense(5, 3)
    assert list(kernel.values) == [5, 3, 1, -1, 1, -1, 1, -1]
    assert list(sign_function(kernel).values) == [1, 1, 1, -1, 1, -1, 1, -1]
    assert l1_norm(kernel) == Fraction(7, 4)
    assert integral(kernel) == 1


def test_dirichlet_power_of_two():
    """Тест D_(2^k) = 2^k на [0, 2^(-k))"""
    assert list(dirichlet_dense(4, 3).values) == [4, 4, 0, 0, 0, 0, 0, 0]
    assert l1_norm(dirichlet_dense(4, 3)) == 1


def test_dirichlet_point_matches_dense():
    """Тест формулы Пэли против плотной сетки"""
    for n in range(1, 33):
        grid = dirichlet_dense(n, 5)
        for cell in range(32):
            x = DyadicPoint.from_cell(5, cell)
            assert dirichlet_point(n, x) == grid.values[cell], (n, cell)


def test_dirichlet_point_at_zero():
    """Тест D_n(0) = n"""
    for n in (1, 5, 21, 1365):
        assert dirichlet_point(n, DyadicPoint.zero()) == n


def test_partial_sum_cut_exceeds_resolution():
    """Тест отказа при разрезе больше 2^N"""
    coeffs = fwht(StepFunction.constant(3))
    with pytest.raises(PreconditionError, match="cut exceeds resolution"):
        partial_sum(coeffs, 9)


def test_partial_sum_truncates():
    """Тест S_m: сумма первых m гармоник"""
    f = StepFunction(3, walsh_grid(0, 3).values + 2 * walsh_grid(5, 3).values)
    coeffs = fwht(f)
    assert np.array_equal(partial_sum(coeffs, 5).values, np.ones(8, dtype=np.int64))
    assert np.array_equal(partial_sum(coeffs, 6).as_float(), f.as_float())


def test_step_function_rejects_wrong_size():
    """Тест проверки длины сетки"""
    with pytest.raises(PreconditionError):
        StepFunction(3, np.zeros(7, dtype=np.int64))
    with pytest.raises(PreconditionError):
        WalshCoefficients(2, np.zeros(5, dtype=np.int64))


def test_kernel_table_sandwich():
    """Тест оценки V(n)/8 ≤ ‖D_n‖₁ ≤ V(n) для n ≤ 4096 на сетке 2^12"""
    rows = kernel_table(4096, resolution=12)
    assert len(rows) == 4096
    for row in rows:
        assert row.variation == variation(row.n)
        assert row.lower_ok and row.upper_ok, row


def test_kernel_table_values():
    """Тест отдельных норм таблицы"""
    rows = {row.n: row for row in kernel_table(8, resolution=3)}
    assert rows[1].norm == 1
    assert rows[4].norm == 1
    assert rows[5].norm == Fraction(7, 4)
    assert rows[5].variation == 4


def test_kernel_table_rejects_bad_range():
    """Тест отказа для n_max вне сетки"""
    with pytest.raises(PreconditionError):
        kernel_table(0)
    with pytest.raises(PreconditionError):
        kernel_table(9, resolution=3)
