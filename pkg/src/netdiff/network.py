"""Feed-forward ReLU networks, NNet I/O, weight quantization and composition."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from . import interval as iv
from .symbolic import InputRegion


class NNetFormatError(ValueError):
    """Malformed NNet text; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class QuantizationOverflow(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    """Fully connected ReLU network.

    ``weights[k]`` has shape ``(layer_sizes[k], layer_sizes[k + 1])``, so
    ``weights[k][i, j]`` is the edge from neuron ``i`` of one layer to neuron
    ``j`` of the next.  ReLU follows every layer except the last.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    input_mins: np.ndarray | None = None
    input_maxes: np.ndarray | None = None
    means: np.ndarray | None = None
    ranges: np.ndarray | None = None

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=np.float64, copy=True) for w in self.weights)
        bs = tuple(np.array(b, dtype=np.float64, copy=True).reshape(-1) for b in self.biases)
        if not ws:
            raise ValueError("network needs at least one layer")
        if len(ws) != len(bs):
            raise ValueError("one bias vector per layer is required")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2:
                raise ValueError(f"layer {k + 1}: weight matrix must be 2-D")
            if k and w.shape[0] != ws[k - 1].shape[1]:
                raise ValueError(
                    f"layer {k + 1}: expects {w.shape[0]} inputs, previous layer has {ws[k - 1].shape[1]}")
            if b.shape[0] != w.shape[1]:
                raise ValueError(f"layer {k + 1}: bias length {b.shape[0]} != layer size {w.shape[1]}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k + 1}: non-finite weight")
            w.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        for name in ("input_mins", "input_maxes", "means", "ranges"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=np.float64).reshape(-1)
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def replace_parameters(self, weights, biases) -> Network:
        return Network(tuple(weights), tuple(biases), self.input_mins, self.input_maxes,
                       self.means, self.ranges)

    def normalize_region(self, region: InputRegion) -> InputRegion:
        """Map a raw input region through ``(x - mean) / range``, rounded outward."""
        if self.means is None or self.ranges is None:
            raise ValueError("network carries no normalization metadata")
        n = self.n_inputs
        mean, rng = self.means[:n], self.ranges[:n]
        lo = iv.add_down_arrays(region.lo, -mean)
        hi = iv.add_up_arrays(region.hi, -mean)
        with np.errstate(divide="ignore"):
            nlo, nhi = lo / rng, hi / rng
        if not iv.fast_math_enabled():
            nlo = np.nextafter(nlo, -np.inf)
            nhi = np.nextafter(nhi, np.inf)
        return InputRegion(nlo, nhi)

    def normalize_inputs(self, x) -> np.ndarray:
        n = self.n_inputs
        return (np.asarray(x, dtype=np.float64) - self.means[:n]) / self.ranges[:n]


def random_network(layer_sizes: Sequence[int], rng: np.random.Generator,
                   bias_scale: float = 0.1) -> Network:
    """He-style random initialization; used by tests and batch comparisons."""
    ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        ws.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        bs.append(rng.normal(0.0, bias_scale, size=fan_out))
    return Network(tuple(ws), tuple(bs))


# --------------------------------------------------------------------------
# evaluation


def eval_concrete(net: Network, x, return_hidden: bool = False):
    """Plain float forward execution; accepts one input vector or a batch."""
    h = np.asarray(x, dtype=np.float64)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    if h.shape[-1] != net.n_inputs:
        raise ValueError(f"input has dimension {h.shape[-1]}, network expects {net.n_inputs}")
    hidden = []
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if k < net.n_layers - 1:
            hidden.append(h)
            h = np.maximum(h, 0.0)
    out = h[0] if single else h
    if return_hidden:
        if single:
            hidden = [a[0] for a in hidden]
        return out, hidden
    return out


# --------------------------------------------------------------------------
# pairs and derived networks


@dataclass(frozen=True)
class NetworkPair:
    """Two networks with identical shapes; ``second`` is the modified one."""

    first: Network
    second: Network
    delta_weights: tuple = field(init=False, repr=False)
    delta_biases: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.first.layer_sizes != self.second.layer_sizes:
            raise ValueError(
                f"layer sizes differ: {self.first.layer_sizes} vs {self.second.layer_sizes}")
        # W' - W as an exact (head, tail) float pair; tail is all zeros when exact
        dw = tuple(iv.two_sum_arrays(w2, -w1) for w1, w2 in zip(self.first.weights, self.second.weights))
        db = tuple(iv.two_sum_arrays(b2, -b1) for b1, b2 in zip(self.first.biases, self.second.biases))
        object.__setattr__(self, "delta_weights", dw)
        object.__setattr__(self, "delta_biases", db)

    @property
    def layer_sizes(self) -> list[int]:
        return self.first.layer_sizes

    def weight_delta_bounds(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Enclosure ``[lo, hi]`` of ``W'_k - W_k`` (0-based ``k``)."""
        head, tail = self.delta_weights[k]
        lo = np.where(tail < 0, np.nextafter(head, -np.inf), head)
        hi = np.where(tail > 0, np.nextafter(head, np.inf), head)
        return lo, hi

    def output_delta(self, x) -> np.ndarray:
        return eval_concrete(self.second, x) - eval_concrete(self.first, x)


def compose_difference(pair: NetworkPair) -> Network:
    """Single network computing ``second(x) - first(x)``.

    Hidden layers are stacked block-diagonally (``first`` on the left block),
    the output layer subtracts.
    """
    f, g = pair.first, pair.second
    ws, bs = [], []
    last = f.n_layers - 1
    for k in range(f.n_layers):
        w1, w2 = f.weights[k], g.weights[k]
        b1, b2 = f.biases[k], g.biases[k]
        if last == 0:
            ws.append(w2 - w1)
            bs.append(b2 - b1)
        elif k == 0:
            ws.append(np.hstack([w1, w2]))
            bs.append(np.concatenate([b1, b2]))
        elif k < last:
            z12 = np.zeros((w1.shape[0], w2.shape[1]))
            z21 = np.zeros((w2.shape[0], w1.shape[1]))
            ws.append(np.block([[w1, z12], [z21, w2]]))
            bs.append(np.concatenate([b1, b2]))
        else:
            ws.append(np.vstack([-w1, w2]))
            bs.append(b2 - b1)
    return Network(tuple(ws), tuple(bs), f.input_mins, f.input_maxes, f.means, f.ranges)


def truncate_f16(net: Network) -> Network:
    """Round every weight and bias to the nearest binary16 value (ties to even)."""
    limit = float(np.finfo(np.float16).max)

    def conv(arr, what, k):
        over = np.abs(arr) > limit
        if over.any():
            idx = tuple(int(i) for i in np.argwhere(over)[0])
            raise QuantizationOverflow(
                f"layer {k + 1} {what} {idx} = {arr[idx]!r} exceeds the binary16 range")
        return arr.astype(np.float16).astype(np.float64)

    ws = [conv(w, "weight", k) for k, w in enumerate(net.weights)]
    bs = [conv(b, "bias", k) for k, b in enumerate(net.biases)]
    return net.replace_parameters(ws, bs)


def quantize_round(net: Network, decimals: int = 0) -> Network:
    """Round weights and biases half away from zero at ``decimals`` places."""
    quantum = Decimal(1).scaleb(-decimals)

    def conv(arr):
        flat = [float(Decimal(float(v)).quantize(quantum, rounding=ROUND_HALF_UP))
                for v in arr.reshape(-1)]
        return np.array(flat, dtype=np.float64).reshape(arr.shape)

    return net.replace_parameters([conv(w) for w in net.weights], [conv(b) for b in net.biases])


# --------------------------------------------------------------------------
# NNet format


def _parse_numbers(text: str, lineno: int) -> list[float]:
    fields = [t.strip() for t in text.strip().rstrip(",").split(",")]
    try:
        values = [float(t) for t in fields if t != ""]
    except ValueError as exc:
        raise NNetFormatError(f"bad number ({exc})", lineno) from None
    for v in values:
        if not math.isfinite(v):
            raise NNetFormatError(f"non-finite value {v}", lineno)
    return values


def parse_nnet(source) -> Network:
    """Parse NNet text (``str``, ``bytes``, a path or a readable stream)."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("ascii")
    elif isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source
                                             and os.path.exists(source)):
        with open(source, "r", encoding="ascii") as fh:
            text = fh.read()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("ascii")

    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln.strip() and not ln.lstrip().startswith("//")]
    pos = 0

    def take(expected: int | None = None, what: str = "values"):
        nonlocal pos
        if pos >= len(lines):
            raise NNetFormatError(f"unexpected end of file while reading {what}",
                                  lines[-1][0] if lines else None)
        lineno, ln = lines[pos]
        pos += 1
        vals = _parse_numbers(ln, lineno)
        if expected is not None and len(vals) != expected:
            raise NNetFormatError(f"expected {expected} {what}, found {len(vals)}", lineno)
        return lineno, vals

    lineno, header = take(what="header")
    if len(header) < 4:
        raise NNetFormatError("header needs numLayers,inputSize,outputSize,maxLayerSize", lineno)
    n_layers, n_in, n_out, _ = (int(v) for v in header[:4])
    lineno, sizes = take(n_layers + 1, "layer sizes")
    sizes = [int(s) for s in sizes]
    if sizes[0] != n_in or sizes[-1] != n_out:
        raise NNetFormatError(f"layer sizes {sizes} disagree with header ({n_in} in, {n_out} out)",
                              lineno)
    take(what="deprecated flag")
    _, mins = take(n_in, "input minimums")
    _, maxes = take(n_in, "input maximums")
    _, means = take(n_in + 1, "means")
    _, ranges = take(n_in + 1, "ranges")

    ws, bs = [], []
    for k in range(n_layers):
        rows = [take(sizes[k], f"weights of layer {k + 1}")[1] for _ in range(sizes[k + 1])]
        bias = [take(1, f"bias of layer {k + 1}")[1][0] for _ in range(sizes[k + 1])]
        ws.append(np.array(rows, dtype=np.float64).T)
        bs.append(np.array(bias, dtype=np.float64))
    if pos != len(lines):
        raise NNetFormatError("trailing data after the last layer", lines[pos][0])
    return Network(tuple(ws), tuple(bs), mins, maxes, means, ranges)


def write_nnet(net: Network, comment: str | None = None) -> str:
    """Serialize to NNet text with round-trip exact float formatting."""
    out = io.StringIO()
    if comment:
        for line in comment.splitlines():
            out.write(f"// {line}\n")
    sizes = net.layer_sizes
    n_in = net.n_inputs
    out.write(f"{net.n_layers},{n_in},{net.n_outputs},{max(sizes)},\n")
    out.write(",".join(str(s) for s in sizes) + ",\n")
    out.write("0,\n")

    def row(vals):
        return ",".join(repr(float(v)) for v in vals) + ",\n"

    mins = net.input_mins if net.input_mins is not None else np.full(n_in, -np.finfo(float).max)
    maxes = net.input_maxes if net.input_maxes is not None else np.full(n_in, np.finfo(float).max)
    means = net.means if net.means is not None else np.zeros(n_in + 1)
    ranges = net.ranges if net.ranges is not None else np.ones(n_in + 1)
    for vals in (mins, maxes, means, ranges):
        out.write(row(vals))
    for w, b in zip(net.weights, net.biases):
        for j in range(w.shape[1]):
            out.write(row(w[:, j]))
        for v in b:
            out.write(row([v]))
    return out.getvalue()
