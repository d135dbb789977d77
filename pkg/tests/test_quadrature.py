import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexbeam.quadrature import (column_head_integral, cumtrapz, row_tail_integral,
                                 trap_weights, trapz, volterra_apply)


def test_weights_sum_to_one():
    for n in (1, 7, 64):
        assert trap_weights(n).sum() == pytest.approx(1.0)


def test_trapz_exact_for_linear():
    n = 10
    x = np.linspace(0, 1, n + 1)
    assert trapz(3 * x + 2, 1 / n) == pytest.approx(3.5)


def test_trapz_second_order():
    errs = []
    for n in (32, 64, 128):
        x = np.linspace(0, 1, n + 1)
        errs.append(abs(trapz(np.exp(x), 1 / n) - (np.e - 1)))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def test_cumtrapz_matches_antiderivative():
    n = 200
    x = np.linspace(0, 1, n + 1)
    assert np.abs(cumtrapz(np.cos(x), 1 / n) - np.sin(x)).max() < 1e-5


def test_volterra_apply_against_closed_form():
    # int_0^x (x - y) dy = x^2 / 2, exact under the trapezoid rule
    n = 16
    x = np.linspace(0, 1, n + 1)
    K = np.tril(x[:, None] - x[None, :])
    assert np.allclose(volterra_apply(K, np.ones(n + 1), 1 / n), x ** 2 / 2)


def test_row_tail_and_column_head():
    n = 20
    x = np.linspace(0, 1, n + 1)
    ones = np.tril(np.ones((n + 1, n + 1)))
    T = row_tail_integral(ones, 1 / n)
    C = column_head_integral(ones, 1 / n)
    lower = np.tri(n + 1, dtype=bool)
    expect = np.where(lower, x[:, None] - x[None, :], 0.0)
    assert np.allclose(T, expect)
    assert np.allclose(C, expect)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 64), c=st.floats(-10, 10), d=st.floats(-10, 10))
def test_trapz_linear_functional(n, c, d):
    x = np.linspace(0, 1, n + 1)
    f, g = np.sin(3 * x), x ** 2
    h = 1 / n
    assert trapz(c * f + d * g, h) == pytest.approx(c * trapz(f, h) + d * trapz(g, h), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40))
def test_cumtrapz_last_equals_trapz(n):
    x = np.linspace(0, 1, n + 1)
    f = np.cos(5 * x) + x
    assert cumtrapz(f, 1 / n)[-1] == pytest.approx(trapz(f, 1 / n), abs=1e-12)
