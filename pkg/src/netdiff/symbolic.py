"""Symbolic (linear) lower/upper bounds over the network inputs.

A :class:`SymbolicLayer` holds one symbolic interval per neuron of a layer.
Each bound is a linear expression over the ``n`` inputs whose coefficients
(and constant term) are tiny intervals, so that rounding in the affine passes
is absorbed without a separate error term.  Arrays have shape ``(m, n + 1)``;
the last column is the constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import interval as iv
from .interval import Interval


@dataclass(frozen=True)
class InputRegion:
    """Axis-aligned box of inputs."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("region bounds differ in length")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ValueError("region bounds must not be NaN")
        if (lo > hi).any():
            bad = int(np.argmax(lo > hi))
            raise ValueError(f"empty region interval at input {bad}: [{lo[bad]}, {hi[bad]}]")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> InputRegion:
        arr = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def from_intervals(cls, bounds: Sequence[Interval]) -> InputRegion:
        return cls([b.lo for b in bounds], [b.hi for b in bounds])

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def bounds(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.lo, self.hi)]

    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def center(self) -> np.ndarray:
        return self.lo + 0.5 * (self.hi - self.lo)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def to_pairs(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    def __eq__(self, other):
        if not isinstance(other, InputRegion):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


@dataclass(frozen=True)
class LinearExpr:
    """``sum_i c_i x_i + c_0`` with interval coefficients."""

    coef_lo: np.ndarray
    coef_hi: np.ndarray
    const: Interval

    @property
    def dim(self) -> int:
        return self.coef_lo.shape[0]

    def evaluate(self, x) -> Interval:
        """Enclosure of the expression's value at the concrete point ``x``."""
        row_lo = np.append(self.coef_lo, self.const.lo)[None, :]
        row_hi = np.append(self.coef_hi, self.const.hi)[None, :]
        point = InputRegion(x, x)
        lo = _expr_min(row_lo, row_hi, point)[0]
        hi = _expr_max(row_lo, row_hi, point)[0]
        return Interval(lo, hi)


@dataclass(frozen=True)
class SymbolicInterval:
    lower: LinearExpr
    upper: LinearExpr


def _corner_products(c_lo, c_hi, region: InputRegion, down: bool):
    x_lo, x_hi = region.lo, region.hi
    mul = iv.mul_down_arrays if down else iv.mul_up_arrays
    return (mul(c_lo, x_lo), mul(c_lo, x_hi), mul(c_hi, x_lo), mul(c_hi, x_hi))


def _expr_min(e_lo: np.ndarray, e_hi: np.ndarray, region: InputRegion) -> np.ndarray:
    """Lower bound of each row-expression over the region box."""
    n = region.dim
    prods = _corner_products(e_lo[:, :n], e_hi[:, :n], region, down=True)
    terms = np.minimum(np.minimum(prods[0], prods[1]), np.minimum(prods[2], prods[3]))
    terms = np.concatenate([terms, e_lo[:, n:]], axis=1)
    lo, _ = iv.sum_bounds(terms, terms)
    return lo


def _expr_max(e_lo: np.ndarray, e_hi: np.ndarray, region: InputRegion) -> np.ndarray:
    n = region.dim
    prods = _corner_products(e_lo[:, :n], e_hi[:, :n], region, down=False)
    terms = np.maximum(np.maximum(prods[0], prods[1]), np.maximum(prods[2], prods[3]))
    terms = np.concatenate([terms, e_hi[:, n:]], axis=1)
    _, hi = iv.sum_bounds(terms, terms)
    return hi


class SymbolicLayer:
    """Symbolic intervals for the ``m`` neurons of one layer.

    ``low_lo/low_hi`` bound the coefficients of the lower expression and
    ``up_lo/up_hi`` those of the upper expression.
    """

    __slots__ = ("low_lo", "low_hi", "up_lo", "up_hi")

    def __init__(self, low_lo, low_hi, up_lo, up_hi):
        self.low_lo = low_lo
        self.low_hi = low_hi
        self.up_lo = up_lo
        self.up_hi = up_hi

    # construction -------------------------------------------------------

    @classmethod
    def zeros(cls, m: int, n: int) -> SymbolicLayer:
        z = np.zeros((m, n + 1))
        return cls(z, z, z, z)

    @classmethod
    def identity(cls, n: int) -> SymbolicLayer:
        eye = np.hstack([np.eye(n), np.zeros((n, 1))])
        return cls(eye, eye, eye, eye)

    @classmethod
    def constant(cls, lo, hi, n: int) -> SymbolicLayer:
        lo = np.asarray(lo, dtype=np.float64).reshape(-1)
        hi = np.asarray(hi, dtype=np.float64).reshape(-1)
        low = np.zeros((lo.shape[0], n + 1))
        up = np.zeros((lo.shape[0], n + 1))
        low[:, n] = lo
        up[:, n] = hi
        return cls(low, low, up, up)

    @classmethod
    def stack(cls, items: Sequence[SymbolicInterval]) -> SymbolicLayer:
        def rows(exprs, attr):
            out = []
            for e in exprs:
                c = e.const.lo if attr == "lo" else e.const.hi
                coef = e.coef_lo if attr == "lo" else e.coef_hi
                out.append(np.append(coef, c))
            return np.vstack(out)

        lows = [s.lower for s in items]
        ups = [s.upper for s in items]
        return cls(rows(lows, "lo"), rows(lows, "hi"), rows(ups, "lo"), rows(ups, "hi"))

    # shape --------------------------------------------------------------

    @property
    def size(self) -> int:
        return self.low_lo.shape[0]

    @property
    def dim(self) -> int:
        return self.low_lo.shape[1] - 1

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, j: int) -> SymbolicInterval:
        n = self.dim
        lower = LinearExpr(
            self.low_lo[j, :n].copy(),
            self.low_hi[j, :n].copy(),
            Interval(self.low_lo[j, n], self.low_hi[j, n]),
        )
        upper = LinearExpr(
            self.up_lo[j, :n].copy(),
            self.up_hi[j, :n].copy(),
            Interval(self.up_lo[j, n], self.up_hi[j, n]),
        )
        return SymbolicInterval(lower, upper)

    def __iter__(self):
        for j in range(self.size):
            yield self[j]

    # algebra ------------------------------------------------------------

    def negate(self) -> SymbolicLayer:
        return SymbolicLayer(-self.up_hi, -self.up_lo, -self.low_hi, -self.low_lo)

    def __neg__(self):
        return self.negate()

    def __add__(self, other: SymbolicLayer) -> SymbolicLayer:
        return SymbolicLayer(
            iv.add_down_arrays(self.low_lo, other.low_lo),
            iv.add_up_arrays(self.low_hi, other.low_hi),
            iv.add_down_arrays(self.up_lo, other.up_lo),
            iv.add_up_arrays(self.up_hi, other.up_hi),
        )

    def add_constant(self, c: np.ndarray) -> SymbolicLayer:
        """Add an exact per-neuron constant to both bounds."""
        c = np.asarray(c, dtype=np.float64)
        n = self.dim
        out = [a.copy() for a in (self.low_lo, self.low_hi, self.up_lo, self.up_hi)]
        out[0][:, n] = iv.add_down_arrays(out[0][:, n], c)
        out[1][:, n] = iv.add_up_arrays(out[1][:, n], c)
        out[2][:, n] = iv.add_down_arrays(out[2][:, n], c)
        out[3][:, n] = iv.add_up_arrays(out[3][:, n], c)
        return SymbolicLayer(*out)

    def select(self, rows: np.ndarray, other: SymbolicLayer) -> SymbolicLayer:
        """Rows where ``rows`` is true come from ``self``, the rest from ``other``."""
        r = np.asarray(rows, dtype=bool)[:, None]
        return SymbolicLayer(
            np.where(r, self.low_lo, other.low_lo),
            np.where(r, self.low_hi, other.low_hi),
            np.where(r, self.up_lo, other.up_lo),
            np.where(r, self.up_hi, other.up_hi),
        )

    # concretization ------------------------------------------------------

    def lower_bounds(self, region: InputRegion) -> np.ndarray:
        """Concrete minimum of each lower expression over ``region``."""
        return _expr_min(self.low_lo, self.low_hi, region)

    def upper_bounds(self, region: InputRegion) -> np.ndarray:
        return _expr_max(self.up_lo, self.up_hi, region)

    def concretize(self, region: InputRegion) -> tuple[np.ndarray, np.ndarray]:
        return self.lower_bounds(region), self.upper_bounds(region)


def affine(terms: Sequence[tuple[SymbolicLayer, np.ndarray]], bias=()) -> SymbolicLayer:
    """Sound ``sum_t layer_t @ W_t + sum(bias)``.

    Each weight matrix has shape ``(in_t, out)`` (entry ``[i, j]`` is the edge
    from neuron ``i`` to neuron ``j``).  All terms are folded into one matrix
    product per endpoint.  ``bias`` is a sequence of exact float vectors that
    are added one after another.
    """
    layers = [t[0] for t in terms]
    w = np.vstack([np.asarray(t[1], dtype=np.float64) for t in terms])
    wp = np.maximum(w, 0.0).T
    wn = np.minimum(w, 0.0).T
    a = np.hstack([wp, wn])

    def cat(first, second):
        return np.vstack([np.vstack([getattr(l, first) for l in layers]),
                          np.vstack([getattr(l, second) for l in layers])])

    low_lo, _ = iv.matmul_bounds(a, cat("low_lo", "up_hi"))
    _, low_hi = iv.matmul_bounds(a, cat("low_hi", "up_lo"))
    up_lo, _ = iv.matmul_bounds(a, cat("up_lo", "low_hi"))
    _, up_hi = iv.matmul_bounds(a, cat("up_hi", "low_lo"))
    out = SymbolicLayer(low_lo, low_hi, up_lo, up_hi)
    for b in bias:
        out = out.add_constant(b)
    return out


# --------------------------------------------------------------------------
# single-interval operations


def _single(s: SymbolicInterval) -> SymbolicLayer:
    return SymbolicLayer.stack([s])


def sym_from_region(region: InputRegion) -> list[SymbolicInterval]:
    """Identity expressions ``[x_i, x_i]``, one per input."""
    return list(SymbolicLayer.identity(region.dim))


def sym_zero(n: int) -> SymbolicInterval:
    return SymbolicLayer.zeros(1, n)[0]


def sym_constant(value: Interval, n: int) -> SymbolicInterval:
    return SymbolicLayer.constant([value.lo], [value.hi], n)[0]


def sym_scale_add(acc: SymbolicInterval, term: SymbolicInterval, w: float) -> SymbolicInterval:
    """``acc + w * term``; a negative weight swaps the roles of term's bounds."""
    if acc.lower.dim != term.lower.dim:
        raise ValueError("input dimension mismatch")
    scaled = affine([(_single(term), np.array([[float(w)]]))])
    return (_single(acc) + scaled)[0]


def sym_add(a: SymbolicInterval, b: SymbolicInterval) -> SymbolicInterval:
    return (_single(a) + _single(b))[0]


def sym_negate(s: SymbolicInterval) -> SymbolicInterval:
    return _single(s).negate()[0]


def sym_sub_consts(s: SymbolicInterval, c: Interval) -> SymbolicInterval:
    """Subtract a concrete interval from both bounds."""
    layer = _single(s)
    n = layer.dim
    low_lo, low_hi = layer.low_lo.copy(), layer.low_hi.copy()
    up_lo, up_hi = layer.up_lo.copy(), layer.up_hi.copy()
    low_lo[:, n] = iv.add_down_arrays(low_lo[:, n], np.array([-c.hi]))
    low_hi[:, n] = iv.add_up_arrays(low_hi[:, n], np.array([-c.hi]))
    up_lo[:, n] = iv.add_down_arrays(up_lo[:, n], np.array([-c.lo]))
    up_hi[:, n] = iv.add_up_arrays(up_hi[:, n], np.array([-c.lo]))
    return SymbolicLayer(low_lo, low_hi, up_lo, up_hi)[0]


def concretize(s: SymbolicInterval, region: InputRegion) -> Interval:
    """Sound concrete enclosure of ``s`` over ``region``."""
    if s.lower.dim != region.dim:
        raise ValueError(f"expression has {s.lower.dim} inputs, region has {region.dim}")
    lo, hi = _single(s).concretize(region)
    return Interval(lo[0], hi[0])
