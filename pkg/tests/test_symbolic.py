from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdiff.interval import Interval
from netdiff.oracle import exact_range, extended_precision_recheck
from netdiff.symbolic import (InputRegion, LinearExpr, SymbolicInterval, SymbolicLayer, affine, concretize,
                              sym_add, sym_constant, sym_from_region, sym_negate,
                              sym_scale_add, sym_sub_consts, sym_zero)


def box(*pairs):
    return InputRegion.from_pairs(pairs)


def test_region_validation_and_helpers():
    r = box((0, 2), (-1, 1))
    assert r.dim == 2
    assert r.widths().tolist() == [2, 2]
    assert r.center().tolist() == [1, 0]
    assert r.contains([2, -1]) and not r.contains([2.1, 0])
    assert InputRegion.from_intervals(r.bounds) == r
    with pytest.raises(ValueError):
        box((1, 0))
    with pytest.raises(ValueError):
        r.lo[0] = 5.0


def test_identity_concretizes_to_region():
    r = box((4, 6), (1, 5))
    xs = sym_from_region(r)
    assert [concretize(s, r) for s in xs] == [Interval(4, 6), Interval(1, 5)]


def test_scale_add_tracks_both_bounds():
    r = box((4, 6), (1, 5))
    x1, x2 = sym_from_region(r)
    s = sym_scale_add(sym_scale_add(sym_zero(2), x1, 1.9), x2, -2.1)
    c = concretize(s, r)
    assert c.lo == pytest.approx(1.9 * 4 - 2.1 * 5)
    assert c.hi == pytest.approx(1.9 * 6 - 2.1 * 1)


def test_negate_add_and_constants():
    r = box((-1, 1))
    (x,) = sym_from_region(r)
    assert concretize(sym_negate(x), r) == Interval(-1, 1)
    # sums of several nonzero terms may be widened by a few ulps
    for got, want in [(concretize(sym_add(x, sym_constant(Interval(2, 3), 1)), r), Interval(1, 4)),
                      (concretize(sym_sub_consts(x, Interval(1, 2)), r), Interval(-3, 0))]:
        assert want in got
        assert got.lo == pytest.approx(want.lo, abs=1e-12)
        assert got.hi == pytest.approx(want.hi, abs=1e-12)


def test_small_coefficient_enclosed():
    r = box((-1, 1))
    (x,) = sym_from_region(r)
    c = concretize(sym_scale_add(sym_zero(1), x, 0.1), r)
    assert c.lo <= -0.1 and c.hi >= 0.1
    assert c.hi - c.lo < 0.2 + 1e-15


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        concretize(sym_zero(2), box((0, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_affine_contains_every_point_value(n, m, seed):
    rng = np.random.default_rng(seed)
    lo = rng.normal(size=n)
    r = InputRegion(lo, lo + rng.random(n) * 3)
    w = rng.normal(size=(n, m))
    b = rng.normal(size=m)
    layer = affine([(SymbolicLayer.identity(n), w)], [b])
    c_lo, c_hi = layer.concretize(r)
    xs = r.lo + rng.random((50, n)) * r.widths()
    for x in xs:
        for j in range(m):
            exact = sum(Fraction(x[i]) * Fraction(w[i, j]) for i in range(n)) + Fraction(b[j])
            assert Fraction(c_lo[j]) <= exact <= Fraction(c_hi[j])
            lower, upper = layer[j].lower.evaluate(x), layer[j].upper.evaluate(x)
            assert Fraction(lower.lo) <= exact <= Fraction(upper.hi)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_concretization_contains_exact_range(seed):
    rng = np.random.default_rng(seed)
    n = 100
    coef = rng.normal(size=n) * 10.0 ** rng.integers(-8, 8, size=n)
    expr = LinearExpr(coef, coef, Interval(0.1, 0.1))
    r = InputRegion(-rng.random(n), rng.random(n))
    working = concretize(SymbolicInterval(expr, expr), r)
    exact_lo, exact_hi = exact_range(expr, r)
    assert Fraction(working.lo) <= exact_lo and exact_hi <= Fraction(working.hi)
    ext = extended_precision_recheck(expr, r)
    assert working.lo <= ext.lo and ext.hi <= working.hi


def test_extended_recheck_of_constant():
    expr = LinearExpr(np.zeros(2), np.zeros(2), Interval(1.5, 1.5))
    assert extended_precision_recheck(expr, box((0, 1), (0, 1))) == Interval(1.5, 1.5)
