"""Interval gradients, gradient differences and smear-driven input bisection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import interval as iv
from .forward import INACTIVE, NONLINEAR
from .interval import Interval
from .network import Network
from .symbolic import InputRegion


class NoSplitPossible(ValueError):
    """Every input interval of the region is degenerate."""


@dataclass(frozen=True)
class GradientVector:
    lo: np.ndarray
    hi: np.ndarray

    def __len__(self) -> int:
        return self.lo.shape[0]

    def __getitem__(self, i: int) -> Interval:
        return Interval(self.lo[i], self.hi[i])

    @property
    def entries(self) -> list[Interval]:
        return [self[i] for i in range(len(self))]

    def magnitude(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))


def gradient(net: Network, masks: Sequence[np.ndarray], output_index: int = 0) -> GradientVector:
    """Interval bounds on d(output)/d(input) under the recorded activation masks.

    ``masks[k]`` holds the states of hidden layer ``k + 1``.  The chosen output
    starts at ``[1, 1]``; each backward step applies the ReLU mask and then
    scales through the incoming weights, pairing endpoints by weight sign.
    """
    if len(masks) != net.n_layers - 1:
        raise ValueError(f"expected {net.n_layers - 1} masks, got {len(masks)}")
    if not 0 <= output_index < net.n_outputs:
        raise ValueError(f"output index {output_index} out of range")
    g_lo = np.zeros(net.n_outputs)
    g_lo[output_index] = 1.0
    g_hi = g_lo.copy()
    for k in range(net.n_layers - 1, -1, -1):
        if k < net.n_layers - 1:
            m = np.asarray(masks[k])
            if m.shape != g_lo.shape:
                raise ValueError(f"mask for hidden layer {k + 1} has {m.shape[0]} entries, "
                                 f"layer has {g_lo.shape[0]}")
            dead = m == INACTIVE
            loose = m == NONLINEAR
            g_lo = np.where(dead, 0.0, np.where(loose, np.minimum(g_lo, 0.0), g_lo))
            g_hi = np.where(dead, 0.0, np.where(loose, np.maximum(g_hi, 0.0), g_hi))
        w = net.weights[k]
        a = np.hstack([np.maximum(w, 0.0), np.minimum(w, 0.0)])
        new_lo, _ = iv.matmul_bounds(a, np.concatenate([g_lo, g_hi]))
        _, new_hi = iv.matmul_bounds(a, np.concatenate([g_hi, g_lo]))
        g_lo, g_hi = new_lo, new_hi
    return GradientVector(g_lo, g_hi)


def gradient_diff(g: GradientVector, g_prime: GradientVector) -> GradientVector:
    """Entry-wise ``g_prime - g``."""
    if len(g) != len(g_prime):
        raise ValueError("gradient vectors differ in length")
    return GradientVector(iv.add_down_arrays(g_prime.lo, -g.hi), iv.add_up_arrays(g_prime.hi, -g.lo))


def smear_scores(region: InputRegion, grad: GradientVector) -> np.ndarray:
    """Input width times the largest gradient magnitude, per input."""
    if len(grad) != region.dim:
        raise ValueError(f"gradient has {len(grad)} entries, region has {region.dim} inputs")
    return region.widths() * grad.magnitude()


@dataclass(frozen=True)
class SplitDecision:
    input_index: int
    left: InputRegion
    right: InputRegion


def bisect(region: InputRegion, i: int) -> tuple[InputRegion, InputRegion]:
    """Split input ``i`` at its (rounded) midpoint."""
    lo, hi = region.lo[i], region.hi[i]
    mid = lo + 0.5 * (hi - lo)
    if not lo < mid < hi:
        mid = 0.5 * lo + 0.5 * hi
    if not lo < mid < hi:
        raise NoSplitPossible(f"input {i} interval [{lo}, {hi}] cannot be split")
    left_hi = region.hi.copy()
    left_hi[i] = mid
    right_lo = region.lo.copy()
    right_lo[i] = mid
    return InputRegion(region.lo, left_hi), InputRegion(right_lo, region.hi)


def smear_choose(region: InputRegion, grad: GradientVector) -> SplitDecision:
    """Bisect the input with the largest smear (lowest index on ties).

    When every score is zero the widest splittable input is used instead.
    """
    widths = region.widths()
    splittable = np.array([_splittable(region, i) for i in range(region.dim)])
    if not splittable.any():
        raise NoSplitPossible("all input intervals are degenerate")
    scores = np.where(splittable, smear_scores(region, grad), -1.0)
    if scores.max() <= 0.0:
        scores = np.where(splittable, widths, -1.0)
    i = int(np.argmax(scores))
    left, right = bisect(region, i)
    return SplitDecision(i, left, right)


def _splittable(region: InputRegion, i: int) -> bool:
    lo, hi = region.lo[i], region.hi[i]
    return bool(hi > lo and (np.nextafter(lo, np.inf) < hi))
