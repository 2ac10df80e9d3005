"""Independent ground truth for tests: exact ReLU-delta ranges, sampling envelopes,
and exact re-evaluation of linear expressions."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .interval import Interval
from .network import NetworkPair, eval_concrete
from .symbolic import InputRegion, LinearExpr

# A line a*n + b*d = c in (n, d) coordinates, identified by its normal.
_N, _D, _S = (1, 0), (0, 1), (1, 1)


class EmptyFeasibleSet(ValueError):
    """No (n, d) pair satisfies the box and coupling constraints."""


def _relu(v):
    return v if v > 0 else Fraction(0)


def _lines(n, d, n_prime):
    zero = Fraction(0)
    lines = [(_N, n[0]), (_N, n[1]), (_N, zero), (_D, d[0]), (_D, d[1]), (_S, zero)]
    if n_prime is not None:
        lines += [(_S, n_prime[0]), (_S, n_prime[1])]
    return lines


def _solve(l1, l2):
    (a1, b1), c1 = l1
    (a2, b2), c2 = l2
    det = a1 * b2 - a2 * b1
    if det == 0:
        return None
    return (c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det


def relu_delta_exact(n, d, mode: str = "free", n_prime=None) -> tuple[Fraction, Fraction]:
    """Exact range of ``ReLU(n + d) - ReLU(n)`` over a box of ``(n, d)``.

    ``n`` and ``d`` are ``(lo, hi)`` pairs (or :class:`Interval`).  In
    ``"coupled"`` mode the points must also satisfy ``n + d`` in ``n_prime``.
    The function is piecewise linear with kinks on ``n = 0`` and
    ``n + d = 0``, so its extremes sit on vertices of the arrangement formed
    by those lines and the constraint boundaries.  All arithmetic is exact.
    """
    if mode not in ("free", "coupled"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "coupled" and n_prime is None:
        raise ValueError("coupled mode needs an n_prime interval")
    n = tuple(Fraction(v) for v in n)
    d = tuple(Fraction(v) for v in d)
    np_ = tuple(Fraction(v) for v in n_prime) if mode == "coupled" else None
    for name, iv_ in (("n", n), ("d", d), ("n_prime", np_)):
        if iv_ is not None and iv_[0] > iv_[1]:
            raise ValueError(f"{name} interval is empty")

    def feasible(p):
        pn, pd = p
        ok = n[0] <= pn <= n[1] and d[0] <= pd <= d[1]
        return ok and (np_ is None or np_[0] <= pn + pd <= np_[1])

    values = []
    for l1, l2 in itertools.combinations(_lines(n, d, np_), 2):
        p = _solve(l1, l2)
        if p is not None and feasible(p):
            values.append(_relu(p[0] + p[1]) - _relu(p[0]))
    if not values:
        raise EmptyFeasibleSet(f"no point with n in {n}, d in {d}, n+d in {np_}")
    return min(values), max(values)


def relu_delta_range(n_lo, n_hi, d_lo, d_hi, np_lo=None, np_hi=None, tol=None):
    """Vectorized float counterpart of :func:`relu_delta_exact`.

    Returns ``(lo, hi, feasible)``.  Vertex coordinates are computed in
    floating point, so results agree with the exact version only up to a few
    ulps; use it for bulk checks with a tolerance.  Vertices within ``tol``
    of the constraints count as feasible (default: relative 1e-12).
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in (n_lo, n_hi, d_lo, d_hi)]
    n_lo, n_hi, d_lo, d_hi = arrays
    coupled = np_lo is not None
    zero = np.zeros_like(n_lo)
    lines = [(_N, n_lo), (_N, n_hi), (_N, zero), (_D, d_lo), (_D, d_hi), (_S, zero)]
    if coupled:
        np_lo = np.asarray(np_lo, dtype=np.float64)
        np_hi = np.asarray(np_hi, dtype=np.float64)
        lines += [(_S, np_lo), (_S, np_hi)]
    if tol is None:
        scale = np.maximum.reduce([np.abs(v) for _, v in lines])
        tol = 1e-12 * (1.0 + scale)
    lo = np.full(n_lo.shape, np.inf)
    hi = np.full(n_lo.shape, -np.inf)
    for l1, l2 in itertools.combinations(lines, 2):
        p = _solve(l1, l2)
        if p is None:
            continue
        pn, pd = p
        ok = (pn >= n_lo - tol) & (pn <= n_hi + tol) & (pd >= d_lo - tol) & (pd <= d_hi + tol)
        s = pn + pd
        if coupled:
            ok &= (s >= np_lo - tol) & (s <= np_hi + tol)
        val = np.maximum(s, 0.0) - np.maximum(pn, 0.0)
        lo = np.where(ok, np.minimum(lo, val), lo)
        hi = np.where(ok, np.maximum(hi, val), hi)
    return lo, hi, np.isfinite(lo)


def grid_points(region: InputRegion, grid) -> np.ndarray:
    """Regular grid including both endpoints of every input interval."""
    counts = [int(grid)] * region.dim if np.isscalar(grid) else [int(g) for g in grid]
    if len(counts) != region.dim:
        raise ValueError("grid counts must match the region dimension")
    axes = [np.linspace(l, h, max(c, 1)) if c > 1 else np.array([l + 0.5 * (h - l)])
            for l, h, c in zip(region.lo, region.hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def sampled_delta_envelope(pair: NetworkPair, region: InputRegion, grid=10,
                           n_random: int = 0, seed: int = 0) -> list[Interval]:
    """Hull of ``f'(x) - f(x)`` over a grid plus seeded random points.

    This is an inner approximation of the true output-delta range, so any
    sound bound must contain it.
    """
    xs = grid_points(region, grid)
    if n_random:
        rng = np.random.default_rng(seed)
        extra = region.lo + rng.random((n_random, region.dim)) * region.widths()
        xs = np.vstack([xs, np.clip(extra, region.lo, region.hi)])
    lo = hi = None
    for start in range(0, xs.shape[0], 8192):
        chunk = xs[start:start + 8192]
        delta = eval_concrete(pair.second, chunk) - eval_concrete(pair.first, chunk)
        c_lo, c_hi = delta.min(axis=0), delta.max(axis=0)
        lo = c_lo if lo is None else np.minimum(lo, c_lo)
        hi = c_hi if hi is None else np.maximum(hi, c_hi)
    return [Interval(a, b) for a, b in zip(lo, hi)]


def _round_down(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) <= q else math.nextafter(f, -math.inf)


def _round_up(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) >= q else math.nextafter(f, math.inf)


def exact_range(expr: LinearExpr, region: InputRegion) -> tuple[Fraction, Fraction]:
    """Exact min and max of an interval-coefficient linear expression over a box."""
    if expr.dim != region.dim:
        raise ValueError(f"expression has {expr.dim} inputs, region has {region.dim}")
    lo = Fraction(expr.const.lo)
    hi = Fraction(expr.const.hi)
    for c_lo, c_hi, x_lo, x_hi in zip(expr.coef_lo, expr.coef_hi, region.lo, region.hi):
        prods = [Fraction(c) * Fraction(x) for c in (c_lo, c_hi) for x in (x_lo, x_hi)]
        lo += min(prods)
        hi += max(prods)
    return lo, hi


def extended_precision_recheck(expr: LinearExpr, region: InputRegion) -> Interval:
    """Range of ``expr`` over ``region`` from exact rational arithmetic.

    The exact endpoints are rounded outward to the nearest floats, giving
    the tightest float interval that encloses the true range.
    """
    lo, hi = exact_range(expr, region)
    return Interval(_round_down(lo), _round_up(hi))


def dense_grid_max_delta(pair: NetworkPair, region: InputRegion, grid: int = 201,
                         output_indices: Sequence[int] | None = None) -> float:
    """Largest sampled ``|f'(x) - f(x)|`` over the watched outputs."""
    env = sampled_delta_envelope(pair, region, grid)
    idx = range(len(env)) if output_indices is None else output_indices
    return max(max(abs(env[i].lo), abs(env[i].hi)) for i in idx)
