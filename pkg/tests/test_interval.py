import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdiff import interval as iv
from netdiff.interval import Interval

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)
tiny_or_big = st.one_of(finite, st.floats(min_value=-1e-300, max_value=1e-300))


@given(finite, finite)
def test_directed_addition_brackets_exact_sum(a, b):
    exact = Fraction(a) + Fraction(b)
    assert Fraction(iv.add_down(a, b)) <= exact <= Fraction(iv.add_up(a, b))


@given(tiny_or_big, tiny_or_big)
def test_directed_product_brackets_exact_product(a, b):
    exact = Fraction(a) * Fraction(b)
    assert Fraction(iv.mul_down(a, b)) <= exact <= Fraction(iv.mul_up(a, b))


def test_exact_operations_are_not_widened():
    assert iv.add_down(0.5, 0.25) == 0.75 == iv.add_up(0.5, 0.25)
    assert iv.mul_down(3.0, 4.0) == 12.0 == iv.mul_up(3.0, 4.0)
    assert iv.add(Interval(1, 2), Interval(3, 4)) == Interval(4, 6)


def test_inexact_sum_is_widened_by_one_ulp():
    r = iv.add(Interval(0.1, 0.1), Interval(0.2, 0.2))
    assert r.lo < r.hi
    assert math.nextafter(r.lo, math.inf) == r.hi


def test_fast_math_disables_widening():
    with iv.fast_math():
        r = iv.add(Interval(0.1, 0.1), Interval(0.2, 0.2))
    assert r.lo == r.hi == 0.1 + 0.2
    assert not iv.fast_math_enabled()


@pytest.mark.parametrize("lo,hi", [(1.0, 0.0), (float("nan"), 1.0)])
def test_invalid_interval_rejected(lo, hi):
    with pytest.raises(ValueError):
        Interval(lo, hi)


def test_scale_flips_for_negative_factor():
    assert iv.scale(Interval(1, 2), -2) == Interval(-4, -2)
    with pytest.raises(ValueError):
        iv.scale(Interval(1, 2), float("inf"))


def test_lattice_helpers():
    a, b = Interval(-1, 2), Interval(0, 3)
    assert iv.hull(a, b) == Interval(-1, 3)
    assert iv.intersect(a, b) == Interval(0, 2)
    assert iv.intersect(Interval(0, 1), Interval(2, 3)) is None
    assert iv.imax(a, b) == Interval(0, 3)
    assert iv.imin(a, b) == Interval(-1, 2)
    assert iv.width(a) == 3.0
    assert iv.contains(a, 2.0) and not iv.contains(a, 2.5)


@given(finite, finite, finite, finite)
def test_subtraction_is_inclusion_monotone(a, b, c, d):
    x = Interval(min(a, b), max(a, b))
    y = Interval(min(c, d), max(c, d))
    inner = Interval(x.lo, x.lo)
    outer = iv.sub(x, y)
    part = iv.sub(inner, y)
    assert outer.lo <= part.lo and part.hi <= outer.hi


@settings(max_examples=50)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_matmul_bounds_enclose_exact_product(m, k, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, k)) * 10.0 ** rng.integers(-5, 5, size=(m, k))
    b = rng.normal(size=k) * 10.0 ** rng.integers(-5, 5, size=k)
    a[rng.random((m, k)) < 0.2] = 0.0
    lo, hi = iv.matmul_bounds(a, b)
    for i in range(m):
        exact = sum(Fraction(a[i, j]) * Fraction(b[j]) for j in range(k))
        assert Fraction(lo[i]) <= exact <= Fraction(hi[i])


def test_matmul_exact_zero_rows_stay_zero():
    a = np.array([[0.0, 0.0], [1.0, 2.0]])
    lo, hi = iv.matmul_bounds(a, np.array([3.0, 4.0]))
    assert lo[0] == hi[0] == 0.0
    assert lo[1] < 11.0 < hi[1]


def test_sum_bounds_single_term_is_exact():
    t = np.array([[0.0, 0.1, 0.0], [0.1, 0.2, 0.0]])
    lo, hi = iv.sum_bounds(t, t)
    assert lo[0] == hi[0] == 0.1
    assert Fraction(lo[1]) <= Fraction(0.1) + Fraction(0.2) <= Fraction(hi[1])
