from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netdiff.forward import forward_pass
from netdiff.interval import Interval
from netdiff.network import NetworkPair, random_network
from netdiff.oracle import (EmptyFeasibleSet, extended_precision_recheck, grid_points,
                            relu_delta_exact, relu_delta_range, sampled_delta_envelope)
from netdiff.symbolic import InputRegion, LinearExpr


@pytest.mark.parametrize("n,d,expect", [
    ((1, 3), (-4, -2), (-3, -1)),
    ((-2, 5), (0, 0), (0, 0)),
    ((-5, -1), (2, 3), (0, 2)),
    ((-1, 1), (-1, 1), (-1, 1)),
])
def test_free_mode_examples(n, d, expect):
    assert relu_delta_exact(n, d) == expect


def test_coupled_mode_tightens_and_rejects_empty_sets():
    assert relu_delta_exact((-1, 1), (-1, 1), "coupled", (1, 2)) == (0, 1)
    with pytest.raises(EmptyFeasibleSet):
        relu_delta_exact((0, 1), (0, 1), "coupled", (5, 6))
    with pytest.raises(ValueError):
        relu_delta_exact((0, 1), (0, 1), "coupled")
    with pytest.raises(ValueError):
        relu_delta_exact((1, 0), (0, 1))


def brute_force(n, d, n_prime=None, steps=61):
    best = None
    for a in np.linspace(n[0], n[1], steps):
        for b in np.linspace(d[0], d[1], steps):
            if n_prime is not None and not n_prime[0] <= a + b <= n_prime[1]:
                continue
            v = max(a + b, 0) - max(a, 0)
            best = (v, v) if best is None else (min(best[0], v), max(best[1], v))
    return best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_exact_range_contains_dense_samples(seed):
    rng = np.random.default_rng(seed)
    n = tuple(np.sort(rng.integers(-6, 6, 2)))
    d = tuple(np.sort(rng.integers(-6, 6, 2)))
    lo, hi = relu_delta_exact(n, d)
    b_lo, b_hi = brute_force(n, d)
    # integer corners lie on the grid, so the sampled extremes are exact
    assert lo == pytest.approx(b_lo) and hi == pytest.approx(b_hi)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_vectorized_matches_exact(seed):
    rng = np.random.default_rng(seed)
    n = np.sort(rng.normal(0, 3, 2))
    d = np.sort(rng.normal(0, 3, 2))
    c = np.sort(rng.normal(0, 3, 2))
    try:
        exact = relu_delta_exact(n, d, "coupled", c)
    except EmptyFeasibleSet:
        exact = None
    lo, hi, ok = relu_delta_range(n[:1], n[1:], d[:1], d[1:], c[:1], c[1:])
    if exact is None:
        assert not ok[0] or hi[0] - lo[0] < 1e-9
    else:
        assert ok[0]
        assert lo[0] == pytest.approx(float(exact[0]), abs=1e-12)
        assert hi[0] == pytest.approx(float(exact[1]), abs=1e-12)


def test_grid_points_include_the_corners():
    pts = grid_points(InputRegion([0.0, 1.0], [1.0, 2.0]), 3)
    assert pts.shape == (9, 2)
    assert [0.0, 1.0] in pts.tolist() and [1.0, 2.0] in pts.tolist()
    with pytest.raises(ValueError):
        grid_points(InputRegion([0.0], [1.0]), [2, 2])


def test_envelope_of_identical_networks_is_zero():
    f = random_network([3, 8, 2], np.random.default_rng(0))
    env = sampled_delta_envelope(NetworkPair(f, f), InputRegion(-np.ones(3), np.ones(3)), 5, 100)
    assert env == [Interval(0, 0), Interval(0, 0)]


def test_envelope_is_inside_the_forward_bound(small_pair, small_region):
    env = sampled_delta_envelope(small_pair, small_region, 100)[0]
    res = forward_pass(small_pair, small_region)
    assert res.output_delta_lo[0] <= env.lo and env.hi <= res.output_delta_hi[0]
    assert env in Interval(-0.53, 6.81)


def test_envelope_grows_with_density(small_pair, small_region):
    coarse = sampled_delta_envelope(small_pair, small_region, 5)[0]
    fine = sampled_delta_envelope(small_pair, small_region, 9)[0]
    # the 9-point grid contains the 5-point grid
    assert coarse in fine


def test_extended_recheck_examples():
    r = InputRegion([-1.0], [1.0])
    expr = LinearExpr(np.array([0.1]), np.array([0.1]), Interval(0, 0))
    assert extended_precision_recheck(expr, r) == Interval(-0.1, 0.1)
    big = LinearExpr(np.array([0.1, 0.2]), np.array([0.1, 0.2]), Interval(0, 0))
    got = extended_precision_recheck(big, InputRegion([1.0, 1.0], [1.0, 1.0]))
    assert Fraction(got.lo) <= Fraction(0.1) + Fraction(0.2) <= Fraction(got.hi)
    assert got.lo < got.hi
