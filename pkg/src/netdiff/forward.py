"""Lock-step symbolic forward pass over two networks and their neuron deltas."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import interval as iv
from .interval import Interval
from .network import Network, NetworkPair
from .symbolic import InputRegion, SymbolicLayer, affine

# activation states; as gradient-mask intervals these are [0,0], [1,1], [0,1]
INACTIVE, ACTIVE, NONLINEAR = 0, 1, 2
MASK_INTERVALS = {INACTIVE: (0.0, 0.0), ACTIVE: (1.0, 1.0), NONLINEAR: (0.0, 1.0)}


def classify(lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Activation state of each neuron from its concrete pre-activation bounds.

    Inactive when ``ub <= 0``; otherwise active when ``lb >= 0``.  A lower
    bound of exactly 0 counts as active since ReLU is the identity there.
    """
    state = np.full(lb.shape, NONLINEAR, dtype=np.int8)
    state[(ub > 0.0) & (lb >= 0.0)] = ACTIVE
    state[ub <= 0.0] = INACTIVE
    return state


def mask_as_intervals(mask: np.ndarray) -> list[Interval]:
    return [Interval(*MASK_INTERVALS[int(s)]) for s in mask]


def relu_values(s: SymbolicLayer, region: InputRegion, bounds=None):
    """ReLU over one network's symbolic values.

    Returns ``(out, state, lb, ub)`` where ``lb``/``ub`` are the concrete
    pre-activation bounds.  Non-linear neurons are concretized to ``[0, ub]``.
    """
    lb, ub = bounds if bounds is not None else s.concretize(region)
    state = classify(lb, ub)
    relaxed = SymbolicLayer.constant(np.zeros_like(ub), np.where(state == NONLINEAR, ub, 0.0), s.dim)
    return s.select(state == ACTIVE, relaxed), state, lb, ub


def relu_delta_bounds(state, state_p, s_lb, s_ub, sp_lb, sp_ub, d_lb, d_ub):
    """Concrete output-delta bounds for the cases that need concretization.

    Rows whose case keeps a symbolic delta (cases 2, 4 and 5) get values that
    the caller overwrites.  The result is intersected with the naive
    ``ReLU(n') - ReLU(n)`` interval subtraction, which is also sound.
    """
    n_in, n_act, n_nl = state == INACTIVE, state == ACTIVE, state == NONLINEAR
    p_in, p_act, p_nl = state_p == INACTIVE, state_p == ACTIVE, state_p == NONLINEAR
    zero = np.zeros_like(s_lb)

    opt3_lo = np.where(d_lb >= 0.0, 0.0, np.maximum(d_lb, -s_ub))
    opt3_hi = np.where(d_ub <= 0.0, 0.0, np.minimum(d_ub, sp_ub))
    conds = [n_in & p_in, n_in & p_nl, n_act & p_nl, n_nl & p_in, n_nl & p_act, n_nl & p_nl]
    lo = np.select(conds, [zero, zero, np.maximum(-s_ub, d_lb), -s_ub,
                           np.minimum(sp_lb, d_lb), opt3_lo], default=0.0)
    hi = np.select(conds, [zero, sp_ub, np.maximum(-s_lb, d_ub), zero,
                           np.minimum(d_ub, sp_ub), opt3_hi], default=0.0)

    r_lo = np.where(n_act, s_lb, 0.0)
    r_hi = np.where(n_in, 0.0, s_ub)
    rp_lo = np.where(p_act, sp_lb, 0.0)
    rp_hi = np.where(p_in, 0.0, sp_ub)
    naive_lo = iv.add_down_arrays(rp_lo, -r_hi)
    naive_hi = iv.add_up_arrays(rp_hi, -r_lo)
    lo2, hi2 = np.maximum(lo, naive_lo), np.minimum(hi, naive_hi)
    ok = lo2 <= hi2
    return np.where(ok, lo2, lo), np.where(ok, hi2, hi)


@dataclass
class ReluResult:
    s: SymbolicLayer
    s_prime: SymbolicLayer
    s_delta: SymbolicLayer
    mask: np.ndarray
    mask_prime: np.ndarray


def relu_transform(s: SymbolicLayer, s_prime: SymbolicLayer, s_delta: SymbolicLayer,
                   region: InputRegion) -> ReluResult:
    """Nine-case ReLU transformer applied to every neuron of a layer."""
    s_out, state, s_lb, s_ub = relu_values(s, region)
    sp_out, state_p, sp_lb, sp_ub = relu_values(s_prime, region)
    d_lb, d_ub = s_delta.concretize(region)

    lo, hi = relu_delta_bounds(state, state_p, s_lb, s_ub, sp_lb, sp_ub, d_lb, d_ub)
    out = SymbolicLayer.constant(lo, hi, s.dim)
    out = s_prime.select((state == INACTIVE) & (state_p == ACTIVE), out)
    out = s.negate().select((state == ACTIVE) & (state_p == INACTIVE), out)
    out = s_delta.select((state == ACTIVE) & (state_p == ACTIVE), out)
    return ReluResult(s_out, sp_out, out, state, state_p)


@dataclass
class LayerState:
    """Symbolic values of one layer in both networks and their difference."""

    s: SymbolicLayer
    s_prime: SymbolicLayer
    s_delta: SymbolicLayer

    @classmethod
    def initial(cls, region: InputRegion) -> LayerState:
        n = region.dim
        ident = SymbolicLayer.identity(n)
        return cls(ident, ident, SymbolicLayer.zeros(n, n))


def affine_values(prev: SymbolicLayer, net: Network, k: int) -> SymbolicLayer:
    return affine([(prev, net.weights[k])], [net.biases[k]])


def affine_delta(prev: LayerState, pair: NetworkPair, k: int) -> SymbolicLayer:
    """Delta of the pre-activations of layer ``k`` (0-based weight index).

    Sums ``S(n) * (W' - W)`` over incoming edges (the weight change applied to
    the old value) and ``S_delta(n) * W'`` (the old delta carried forward),
    plus the bias change.
    """
    head, tail = pair.delta_weights[k]
    terms = [(prev.s, head), (prev.s_delta, pair.second.weights[k])]
    if np.any(tail):
        terms.append((prev.s, tail))
    bhead, btail = pair.delta_biases[k]
    bias = [bhead] + ([btail] if np.any(btail) else [])
    return affine(terms, bias)


@dataclass
class ForwardResult:
    """Everything the verifier and the refinement step need from one pass."""

    output_delta_lo: np.ndarray
    output_delta_hi: np.ndarray
    output_lo: np.ndarray
    output_hi: np.ndarray
    output_prime_lo: np.ndarray
    output_prime_hi: np.ndarray
    masks: list[np.ndarray] = field(default_factory=list)
    masks_prime: list[np.ndarray] = field(default_factory=list)
    # concretized deltas per hidden layer, after ReLU
    hidden_delta: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    # concretized pre-activation deltas per layer (hidden and output)
    pre_delta: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def output_delta(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.output_delta_lo, self.output_delta_hi)]

    def delta_width(self) -> float:
        return float(np.max(self.output_delta_hi - self.output_delta_lo))


def forward_pass(pair: NetworkPair, region: InputRegion) -> ForwardResult:
    """Propagate values and deltas from the input box to the output layer."""
    if region.dim != pair.first.n_inputs:
        raise ValueError(f"region has {region.dim} inputs, networks expect {pair.first.n_inputs}")
    state = LayerState.initial(region)
    result = ForwardResult(*([None] * 6))
    last = pair.first.n_layers - 1
    for k in range(pair.first.n_layers):
        s_in = affine_values(state.s, pair.first, k)
        sp_in = affine_values(state.s_prime, pair.second, k)
        d_in = affine_delta(state, pair, k)
        d_bounds = d_in.concretize(region)
        result.pre_delta.append(d_bounds)
        if k == last:
            result.output_delta_lo, result.output_delta_hi = d_bounds
            result.output_lo, result.output_hi = s_in.concretize(region)
            result.output_prime_lo, result.output_prime_hi = sp_in.concretize(region)
            return result
        relu = relu_transform(s_in, sp_in, d_in, region)
        result.masks.append(relu.mask)
        result.masks_prime.append(relu.mask_prime)
        result.hidden_delta.append(relu.s_delta.concretize(region))
        state = LayerState(relu.s, relu.s_prime, relu.s_delta)
    raise AssertionError("unreachable")


@dataclass
class SingleResult:
    output_lo: np.ndarray
    output_hi: np.ndarray
    masks: list[np.ndarray]

    @property
    def output(self) -> list[Interval]:
        return [Interval(a, b) for a, b in zip(self.output_lo, self.output_hi)]


def symbolic_pass(net: Network, region: InputRegion) -> SingleResult:
    """Symbolic interval analysis of a single network."""
    if region.dim != net.n_inputs:
        raise ValueError(f"region has {region.dim} inputs, network expects {net.n_inputs}")
    s = SymbolicLayer.identity(region.dim)
    masks = []
    for k in range(net.n_layers):
        s = affine_values(s, net, k)
        if k == net.n_layers - 1:
            lo, hi = s.concretize(region)
            return SingleResult(lo, hi, masks)
        s, state, _, _ = relu_values(s, region)
        masks.append(state)
    raise AssertionError("unreachable")
