"""Concrete interval arithmetic with outward rounding.

Scalar operations emulate directed rounding exactly: the rounding error of
each endpoint is recovered with an error-free transformation (TwoSum /
TwoProduct) and the endpoint is stepped one ULP outward only when the float
result lies on the wrong side of the real result.  Exact results stay exact,
which matters for the ReLU case split at 0.

Array helpers at the bottom give the same guarantee for the vectorized
symbolic passes using a-priori floating-point error bounds.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass

import numpy as np

_FAST = False

_U = 2.0 ** -53
_ETA = 2.0 ** -1074
_SPLITTER = 134217729.0  # 2**27 + 1
_INF = math.inf


def set_fast_math(enabled: bool) -> None:
    """Disable (``True``) or re-enable outward rounding process-wide."""
    global _FAST
    _FAST = bool(enabled)


def fast_math_enabled() -> bool:
    return _FAST


@contextlib.contextmanager
def fast_math(enabled: bool = True):
    previous = _FAST
    set_fast_math(enabled)
    try:
        yield
    finally:
        set_fast_math(previous)


# --------------------------------------------------------------------------
# error-free transformations (scalar)


def two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _split(a: float) -> tuple[float, float]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    if not math.isfinite(p):
        return p, 0.0
    if abs(p) < 2.0 ** -969 and a != 0.0 and b != 0.0:
        # the error term may itself underflow; report an unknown-sign error
        return p, math.nan
    ah, al = _split(a)
    bh, bl = _split(b)
    err = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    return p, err


def _down(value: float, err: float) -> float:
    if _FAST or not math.isfinite(value):
        return value
    if err < 0.0 or err != err:
        return math.nextafter(value, -_INF)
    return value


def _up(value: float, err: float) -> float:
    if _FAST or not math.isfinite(value):
        return value
    if err > 0.0 or err != err:
        return math.nextafter(value, _INF)
    return value


def add_down(a: float, b: float) -> float:
    return _down(*two_sum(a, b))


def add_up(a: float, b: float) -> float:
    return _up(*two_sum(a, b))


def mul_down(a: float, b: float) -> float:
    return _down(*two_prod(a, b))


def mul_up(a: float, b: float) -> float:
    return _up(*two_prod(a, b))


# --------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Interval:
    """Closed interval ``[lo, hi]`` of binary64 floats."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> Interval:
        return cls(x, x)

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __add__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return sub(self, other)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return contains(self, x)

    def __repr__(self) -> str:
        return f"[{self.lo!r}, {self.hi!r}]"


ZERO = Interval(0.0, 0.0)


def add(a: Interval, b: Interval) -> Interval:
    return Interval(add_down(a.lo, b.lo), add_up(a.hi, b.hi))


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(add_down(a.lo, -b.hi), add_up(a.hi, -b.lo))


def scale(a: Interval, c: float) -> Interval:
    c = float(c)
    if not math.isfinite(c):
        raise ValueError(f"scale factor must be finite, got {c}")
    if c >= 0.0:
        return Interval(mul_down(a.lo, c), mul_up(a.hi, c))
    return Interval(mul_down(a.hi, c), mul_up(a.lo, c))


def imax(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo, b.lo), max(a.hi, b.hi))


def imin(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), min(a.hi, b.hi))


def hull(a: Interval, b: Interval) -> Interval:
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))


def intersect(a: Interval, b: Interval) -> Interval | None:
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    return Interval(lo, hi) if lo <= hi else None


def width(a: Interval) -> float:
    return add_up(a.hi, -a.lo)


def contains(a: Interval, x: float) -> bool:
    return a.lo <= x <= a.hi


# --------------------------------------------------------------------------
# array helpers used by the vectorized passes


def two_sum_arrays(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def add_down_arrays(a, b):
    s, err = two_sum_arrays(a, b)
    if _FAST:
        return s
    return np.where(err < 0.0, np.nextafter(s, -_INF), s)


def add_up_arrays(a, b):
    s, err = two_sum_arrays(a, b)
    if _FAST:
        return s
    return np.where(err > 0.0, np.nextafter(s, _INF), s)


def two_prod_arrays(a, b):
    """Elementwise product and the sign of its rounding error.

    The error is NaN where it cannot be recovered (underflow range).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        p = a * b
        ca, cb = _SPLITTER * a, _SPLITTER * b
        ah = ca - (ca - a)
        bh = cb - (cb - b)
        al, bl = a - ah, b - bh
        err = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    err = np.where(np.isfinite(p) & np.isfinite(err), err, np.nan)
    tiny = (np.abs(p) < 2.0 ** -969) & (a != 0.0) & (b != 0.0)
    err = np.where(tiny, np.nan, err)
    err = np.where(~np.isfinite(p) | (a == 0.0) | (b == 0.0), 0.0, err)
    return p, err


def mul_down_arrays(a, b):
    """Elementwise product rounded toward -inf (exact products left alone)."""
    if _FAST:
        return np.asarray(a, dtype=np.float64) * b
    p, err = two_prod_arrays(a, b)
    return np.where((err < 0.0) | np.isnan(err), np.nextafter(p, -_INF), p)


def mul_up_arrays(a, b):
    if _FAST:
        return np.asarray(a, dtype=np.float64) * b
    p, err = two_prod_arrays(a, b)
    return np.where((err > 0.0) | np.isnan(err), np.nextafter(p, _INF), p)


def _error_factor(k: int) -> float:
    # bounds gamma_k / (1 - gamma_k) with slack for the rounding of the bound itself
    if k * _U > 0.01:
        raise ValueError(f"dot product length {k} too large for the error bound")
    return 2.0 * (k + 2) * _U


def matmul_bounds(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(lo, hi)`` with ``lo <= a @ b <= hi`` in exact arithmetic."""
    c = a @ b
    if _FAST:
        return c, c
    k = a.shape[-1]
    s = np.abs(a) @ np.abs(b)
    err = s * _error_factor(k)
    # zero magnitude sums are exact unless some nonzero product underflowed
    zero = s == 0.0
    if zero.any():
        nz = (a != 0.0).astype(np.float64) @ (b != 0.0).astype(np.float64)
        err = np.where(zero & (nz > 0.0), k * _ETA, err)
    err = err + np.where(err > 0.0, k * _ETA, 0.0)
    lo = np.where(err > 0.0, np.nextafter(c - err, -_INF), c)
    hi = np.where(err > 0.0, np.nextafter(c + err, _INF), c)
    return lo, hi


def sum_bounds(terms_lo: np.ndarray, terms_hi: np.ndarray, axis: int = -1):
    """Bound the sums of already directed-rounded terms along ``axis``.

    A row with at most one nonzero term is summed exactly.
    """
    slo = terms_lo.sum(axis=axis)
    shi = terms_hi.sum(axis=axis)
    if _FAST:
        return slo, shi
    k = terms_lo.shape[axis]
    factor = _error_factor(k)
    elo = np.abs(terms_lo).sum(axis=axis) * factor
    ehi = np.abs(terms_hi).sum(axis=axis) * factor
    single_lo = np.count_nonzero(terms_lo, axis=axis) <= 1
    single_hi = np.count_nonzero(terms_hi, axis=axis) <= 1
    lo = np.where(single_lo, slo, np.nextafter(slo - elo, -_INF))
    hi = np.where(single_hi, shi, np.nextafter(shi + ehi, _INF))
    return lo, hi
