"""Outward rounding and inclusion-isotonicity of the interval layer."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pcr3bp.interval import (EMPTY, Interval, IntervalDivisionError, IntervalError, box, box_contains,
                             box_intersect, ilog, matmul, matvec, split_box, stack)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


@st.composite
def intervals(draw, elements=finite):
    a, b = draw(elements), draw(elements)
    return Interval(min(a, b), max(a, b))


def _frac_in(x, iv):
    return Fraction(float(iv.lo)) <= x <= Fraction(float(iv.hi))


def _pick(iv, t):
    lo, hi = Fraction(float(iv.lo)), Fraction(float(iv.hi))
    return lo + (hi - lo) * Fraction(t)


ts = st.fractions(min_value=0, max_value=1, max_denominator=1000)


@given(intervals(), intervals(), ts, ts)
def test_add_sub_mul_contain_exact_results(a, b, s, t):
    x, y = _pick(a, s), _pick(b, t)
    assert _frac_in(x + y, a + b)
    assert _frac_in(x - y, a - b)
    assert _frac_in(x * y, a * b)


@given(intervals(), intervals(positive), ts, ts)
def test_division_contains_exact_quotient(a, b, s, t):
    x, y = _pick(a, s), _pick(b, t)
    assert _frac_in(x / y, a / b)


@given(intervals(positive), ts)
def test_sqrt_encloses(a, s):
    x = _pick(a, s)
    r = a.sqrt()
    # r.lo^2 <= x <= r.hi^2 in exact arithmetic
    assert Fraction(float(r.lo)) ** 2 <= x <= Fraction(float(r.hi)) ** 2


@given(intervals(st.floats(min_value=-50, max_value=50)), st.integers(min_value=0, max_value=7), ts)
def test_integer_powers(a, n, s):
    x = _pick(a, s)
    assert _frac_in(x ** n, a.pow_int(n))


@given(intervals(positive), ts)
def test_inv_sqrt_cubed(a, s):
    x = _pick(a, s)
    r = a.inv_sqrt_cubed()
    # r^2 brackets x^-3
    lo, hi = Fraction(float(r.lo)), Fraction(float(r.hi))
    assert lo ** 2 <= 1 / x ** 3 <= hi ** 2


@given(intervals(st.floats(min_value=-100, max_value=100)))
def test_sqr_is_tighter_than_product(a):
    s = a.sqr()
    p = a * a
    assert s.lo >= min(p.lo, 0.0) and s.hi <= p.hi
    assert s.lo >= 0


def test_rounding_is_outward():
    third = Interval.point(1.0) / 3.0
    assert third.lo < third.hi
    assert _frac_in(Fraction(1, 3), third)
    tenth = Interval.enclose("0.1")
    assert _frac_in(Fraction(1, 10), tenth)
    assert tenth.lo < tenth.hi


def test_enclose_exact_values_stay_points():
    for v in (0.5, Fraction(3, 4), 3):
        iv = Interval.enclose(v)
        assert float(iv.lo) == float(iv.hi) == float(v)


def test_division_by_zero_interval_raises():
    with pytest.raises(IntervalDivisionError):
        Interval(1.0, 2.0) / Interval(-1.0, 1.0)


def test_sqrt_of_negative_raises():
    with pytest.raises(IntervalError):
        Interval(-1.0, 1.0).sqrt()


def test_constructor_rejects_reversed_bounds():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)


def test_intersection_and_hull():
    a, b = Interval(0.0, 2.0), Interval(1.0, 3.0)
    i = a.intersect(b)
    assert (float(i.lo), float(i.hi)) == (1.0, 2.0)
    h = a.hull(b)
    assert (float(h.lo), float(h.hi)) == (0.0, 3.0)
    assert a.intersect(Interval(5.0, 6.0)) is EMPTY


def test_box_helpers():
    b = box((0.0, 1.0), (2.0, 4.0))
    assert b.shape == (2,)
    pieces = split_box(b, 2)
    assert pieces.shape == (4, 2)
    assert np.all(box_contains(b, pieces))
    assert box_intersect(b, box((5.0, 6.0), (2.0, 3.0))) is EMPTY


def test_matvec_and_matmul_enclose_float_products():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 3))
    v = rng.normal(size=3)
    r = matvec(Interval.point(A), Interval.point(v))
    exact = [sum(Fraction(float(A[i, j])) * Fraction(float(v[j])) for j in range(3)) for i in range(3)]
    for i in range(3):
        assert _frac_in(exact[i], r[i])
    M = matmul(Interval.point(A), Interval.point(A))
    assert np.all(M.contains(A @ A) | (np.abs(M.mid - A @ A) < 1e-14))


def test_stack_and_split():
    s = stack([Interval(0.0, 1.0), Interval(2.0, 3.0)])
    assert s.shape == (2,)
    parts = Interval(0.0, 1.0).split(4)
    assert parts.shape == (4,)
    assert float(parts.lo[0]) == 0.0 and float(parts.hi[-1]) == 1.0


def test_ilog_encloses_log():
    import math

    r = ilog(Interval(2.0, 2.0))
    assert float(r.lo) <= math.log(2.0) <= float(r.hi)
    with pytest.raises(IntervalError):
        ilog(Interval(-1.0, 1.0))
