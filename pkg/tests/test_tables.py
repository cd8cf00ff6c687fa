import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lifereserve.tables import DURATION, Constant, Exponential, PiecewiseConstant, PiecewisePolynomial, table_from_values


def test_constant_and_array_duration():
    table = Constant(0.02)
    assert table(3.0) == 0.02
    assert np.array_equal(table(3.0, np.zeros(4)), np.full(4, 0.02))


def test_right_continuous_pieces():
    table = PiecewiseConstant((1.0, 2.0), (0.1, 0.2, 0.3))
    assert [table(t) for t in (0.5, 1.0, 1.5, 2.0, 9.0)] == [0.1, 0.2, 0.2, 0.3, 0.3]
    assert table.breakpoints == (1.0, 2.0)


def test_duration_tables_have_no_calendar_breakpoints():
    table = PiecewiseConstant((1.0,), (0.1, 0.2), DURATION)
    assert table.breakpoints == ()
    assert table.duration_dependent
    assert list(table(5.0, np.array([0.5, 1.5]))) == [0.1, 0.2]


def test_invalid_tables():
    with pytest.raises(ValueError):
        PiecewiseConstant((2.0, 1.0), (0.1, 0.2, 0.3))
    with pytest.raises(ValueError):
        PiecewiseConstant((1.0,), (0.1,))
    with pytest.raises(ValueError):
        PiecewisePolynomial((1.0,), ((0.1,),))


def test_table_from_values_picks_constant():
    assert isinstance(table_from_values([], [0.5]), Constant)
    assert isinstance(table_from_values([1.0], [0.5, 0.6]), PiecewiseConstant)


def test_polynomial_and_exponential():
    poly = PiecewisePolynomial((5.0,), ((0.01, 0.001), (0.0, 0.0, 0.001)))
    assert poly(2.0) == pytest.approx(0.012)
    assert poly(6.0) == pytest.approx(0.036)
    exp = Exponential(0.1, -1.0, DURATION)
    assert exp(3.0, 2.0) == pytest.approx(0.1 * math.exp(-2.0))
    assert exp.sup(10.0) == pytest.approx(0.1)


@settings(max_examples=40, deadline=None)
@given(
    values=st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
    a=st.floats(0.0, 10.0),
    b=st.floats(0.0, 10.0),
)
def test_piecewise_integral_is_exact(values, a, b):
    a, b = sorted((a, b))
    table = PiecewiseConstant((3.0, 7.0), tuple(values))
    ref, _ = integrate.quad(lambda t: table(t), a, b, points=[3.0, 7.0], epsabs=1e-13)
    assert table.integral(a, b) == pytest.approx(ref, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5.0, 5.0), min_size=2, max_size=2))
def test_sup_bounds_the_table(values):
    table = PiecewiseConstant((4.0,), tuple(values))
    grid = np.linspace(0.0, 10.0, 101)
    assert max(abs(table(t)) for t in grid) <= table.sup(10.0)
