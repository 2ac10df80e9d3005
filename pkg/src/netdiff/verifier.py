"""Verification driver: bound, check, sample, refine, over a queue of subregions."""

from __future__ import annotations

import enum
import itertools
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .forward import forward_pass, symbolic_pass
from .network import NetworkPair, compose_difference, eval_concrete
from .refine import NoSplitPossible, gradient, gradient_diff, smear_choose
from .symbolic import InputRegion

log = logging.getLogger(__name__)

MODES = ("delta", "composed-baseline")
CORNER_CAP = 2 ** 12


class Status(str, enum.Enum):
    VERIFIED = "verified"
    FALSIFIED = "falsified"
    UNKNOWN = "unknown"


@dataclass
class VerificationQuery:
    pair: NetworkPair
    region: InputRegion
    epsilon: float
    output_indices: Sequence[int] | None = None
    max_depth: int = 40
    timeout: float = 1800.0
    sample_count: int = 1024
    rng_seed: int = 0
    mode: str = "delta"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        n_out = self.pair.first.n_outputs
        if self.output_indices is None:
            self.output_indices = tuple(range(n_out))
        self.output_indices = tuple(int(i) for i in self.output_indices)
        if not self.output_indices or any(not 0 <= i < n_out for i in self.output_indices):
            raise ValueError(f"output indices must lie in [0, {n_out})")
        if self.region.dim != self.pair.first.n_inputs:
            raise ValueError(f"region has {self.region.dim} inputs, "
                             f"networks expect {self.pair.first.n_inputs}")

    def describe(self) -> dict:
        return {
            "region": self.region.to_pairs(),
            "epsilon": self.epsilon,
            "output_indices": list(self.output_indices),
            "max_depth": self.max_depth,
            "timeout": self.timeout,
            "sample_count": self.sample_count,
            "seed": self.rng_seed,
            "mode": self.mode,
        }


@dataclass
class Witness:
    x: np.ndarray
    f: np.ndarray
    f_prime: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.f_prime - self.f

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "f": self.f.tolist(), "f_prime": self.f_prime.tolist(),
                "delta": self.delta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Witness:
        return cls(np.array(d["x"], float), np.array(d["f"], float), np.array(d["f_prime"], float))


@dataclass
class Stats:
    regions: int = 0
    splits: int = 0
    max_depth: int = 0
    wall_time: float = 0.0
    timed_out: bool = False
    first_pass_lo: list[float] | None = None
    first_pass_hi: list[float] | None = None
    delta_lo: list[float] | None = None
    delta_hi: list[float] | None = None
    leaves: list[InputRegion] | None = field(default=None, repr=False)

    @property
    def first_pass_width(self) -> float | None:
        if self.first_pass_lo is None:
            return None
        return max(h - l for l, h in zip(self.first_pass_lo, self.first_pass_hi))

    def to_dict(self) -> dict:
        return {
            "regions": self.regions, "splits": self.splits, "max_depth": self.max_depth,
            "wall_time": self.wall_time, "timed_out": self.timed_out,
            "first_pass": _pairs(self.first_pass_lo, self.first_pass_hi),
            "output_delta_hull": _pairs(self.delta_lo, self.delta_hi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Stats:
        fp = d.get("first_pass")
        hull = d.get("output_delta_hull")
        return cls(d["regions"], d["splits"], d["max_depth"], d["wall_time"], d["timed_out"],
                   [p[0] for p in fp] if fp else None, [p[1] for p in fp] if fp else None,
                   [p[0] for p in hull] if hull else None, [p[1] for p in hull] if hull else None)


def _pairs(lo, hi):
    if lo is None:
        return None
    return [[float(a), float(b)] for a, b in zip(lo, hi)]


@dataclass
class Verdict:
    status: Status
    witness: Witness | None = None
    stats: Stats = field(default_factory=Stats)

    def to_dict(self) -> dict:
        return {"status": self.status.value,
                "witness": self.witness.to_dict() if self.witness is not None else None,
                "stats": self.stats.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> Verdict:
        w = d.get("witness")
        return cls(Status(d["status"]), Witness.from_dict(w) if w else None,
                   Stats.from_dict(d["stats"]))


# --------------------------------------------------------------------------
# sampling


def sample_points(region: InputRegion, count: int, rng: np.random.Generator) -> np.ndarray:
    """Corners (capped), the center, then ``count`` uniform points."""
    n = region.dim
    if 2 ** n <= CORNER_CAP:
        bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=bool).reshape(-1, n)
    else:
        bits = rng.integers(0, 2, size=(CORNER_CAP, n)).astype(bool)
    corners = np.where(bits, region.hi, region.lo)
    uniform = region.lo + rng.random((count, n)) * (region.hi - region.lo)
    uniform = np.clip(uniform, region.lo, region.hi)
    return np.vstack([corners, region.center()[None, :], uniform])


def sample_counterexample(query: VerificationQuery, region: InputRegion,
                          rng: np.random.Generator | None = None) -> Witness | None:
    """First sampled point whose watched output delta reaches epsilon."""
    if rng is None:
        rng = np.random.default_rng(query.rng_seed)
    xs = sample_points(region, query.sample_count, rng)
    watch = list(query.output_indices)
    for start in range(0, xs.shape[0], 4096):
        chunk = xs[start:start + 4096]
        f = eval_concrete(query.pair.first, chunk)
        fp = eval_concrete(query.pair.second, chunk)
        bad = np.any(np.abs(fp[:, watch] - f[:, watch]) >= query.epsilon, axis=1)
        if bad.any():
            i = int(np.argmax(bad))
            return Witness(chunk[i].copy(), f[i].copy(), fp[i].copy())
    return None


def region_rng(seed: int, path: tuple[int, ...]) -> np.random.Generator:
    """Per-region generator, independent of the order regions are processed in."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=path))


# --------------------------------------------------------------------------
# one region


class _Analyzer:
    def __init__(self, query: VerificationQuery):
        self.query = query
        self.watch = np.array(query.output_indices)
        if query.mode == "composed-baseline":
            self.composed = compose_difference(query.pair)

    def bound(self, region: InputRegion):
        if self.query.mode == "delta":
            res = forward_pass(self.query.pair, region)
            return res.output_delta_lo, res.output_delta_hi, res
        res = symbolic_pass(self.composed, region)
        return res.output_lo, res.output_hi, res

    def split(self, region: InputRegion, lo, hi, res):
        eps = self.query.epsilon
        margin = np.maximum(hi - eps, -eps - lo)[self.watch]
        target = int(self.watch[int(np.argmax(margin))])
        if self.query.mode == "delta":
            pair = self.query.pair
            g = gradient(pair.first, res.masks, target)
            gp = gradient(pair.second, res.masks_prime, target)
            return smear_choose(region, gradient_diff(g, gp))
        return smear_choose(region, gradient(self.composed, res.masks, target))


@dataclass
class _Outcome:
    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    witness: Witness | None = None
    children: tuple | None = None


def _process(an: _Analyzer, region: InputRegion, depth: int, path: tuple[int, ...],
             out_of_time: bool = False) -> _Outcome:
    q = an.query
    lo, hi, res = an.bound(region)
    w = an.watch
    if np.all(lo[w] > -q.epsilon) and np.all(hi[w] < q.epsilon):
        return _Outcome("verified", lo, hi)
    witness = sample_counterexample(q, region, region_rng(q.rng_seed, path))
    if witness is not None:
        return _Outcome("falsified", lo, hi, witness=witness)
    if depth >= q.max_depth or out_of_time:
        return _Outcome("unknown", lo, hi)
    try:
        dec = an.split(region, lo, hi, res)
    except NoSplitPossible:
        return _Outcome("unknown", lo, hi)
    return _Outcome("split", lo, hi, children=(dec.left, dec.right))


def check_region(query: VerificationQuery, region: InputRegion | None = None, depth: int = 0,
                 _path: tuple[int, ...] = (), _analyzer: _Analyzer | None = None) -> Verdict:
    """Recursive, single-threaded form of the verification loop."""
    an = _analyzer or _Analyzer(query)
    region = query.region if region is None else region
    if depth > query.max_depth:
        raise ValueError("depth exceeds max_depth")
    out = _process(an, region, depth, _path)
    stats = Stats(regions=1, max_depth=depth, delta_lo=out.lo[an.watch].tolist(),
                  delta_hi=out.hi[an.watch].tolist())
    if out.kind != "split":
        return Verdict(Status(out.kind), out.witness, stats)
    stats.splits = 1
    status = Status.VERIFIED
    lo, hi = None, None
    for side, child in enumerate(out.children):
        sub = check_region(query, child, depth + 1, _path + (side,), an)
        stats.regions += sub.stats.regions
        stats.splits += sub.stats.splits
        stats.max_depth = max(stats.max_depth, sub.stats.max_depth)
        lo = sub.stats.delta_lo if lo is None else np.minimum(lo, sub.stats.delta_lo).tolist()
        hi = sub.stats.delta_hi if hi is None else np.maximum(hi, sub.stats.delta_hi).tolist()
        if sub.status is Status.FALSIFIED:
            stats.delta_lo, stats.delta_hi = lo, hi
            return Verdict(Status.FALSIFIED, sub.witness, stats)
        if sub.status is Status.UNKNOWN:
            status = Status.UNKNOWN
    stats.delta_lo, stats.delta_hi = lo, hi
    return Verdict(status, None, stats)


# --------------------------------------------------------------------------
# work queue


def verify(query: VerificationQuery, workers: int = 1, record_leaves: bool = False) -> Verdict:
    """Run the full verification loop with ``workers`` threads.

    Subregions live on a shared stack (depth-first).  The first
    counterexample stops every worker.  The status does not depend on the
    worker count unless the timeout fires.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    an = _Analyzer(query)
    start = time.monotonic()
    deadline = start + query.timeout
    stats = Stats(leaves=[] if record_leaves else None)
    stack = [(query.region, 0, ())]
    cond = threading.Condition()
    state = {"pending": 1, "stop": False, "unknown": False, "witness": None, "error": None}
    hull = [None, None]

    def record_leaf(region, out):
        lo, hi = out.lo[an.watch], out.hi[an.watch]
        hull[0] = lo if hull[0] is None else np.minimum(hull[0], lo)
        hull[1] = hi if hull[1] is None else np.maximum(hull[1], hi)
        if stats.leaves is not None:
            stats.leaves.append(region)

    def work():
        while True:
            with cond:
                while not stack and state["pending"] > 0 and not state["stop"]:
                    cond.wait()
                if state["stop"] or state["pending"] == 0:
                    return
                region, depth, path = stack.pop()
            try:
                out = _process(an, region, depth, path, out_of_time=time.monotonic() > deadline)
            except BaseException as exc:  # surfaced in the caller
                with cond:
                    state["error"] = exc
                    state["stop"] = True
                    cond.notify_all()
                return
            with cond:
                stats.regions += 1
                stats.max_depth = max(stats.max_depth, depth)
                if depth == 0:
                    stats.first_pass_lo = out.lo[an.watch].tolist()
                    stats.first_pass_hi = out.hi[an.watch].tolist()
                if out.kind == "split":
                    stats.splits += 1
                    left, right = out.children
                    stack.append((right, depth + 1, path + (1,)))
                    stack.append((left, depth + 1, path + (0,)))
                    state["pending"] += 2
                else:
                    record_leaf(region, out)
                    if out.kind == "falsified":
                        if state["witness"] is None:
                            state["witness"] = out.witness
                        state["stop"] = True
                    elif out.kind == "unknown":
                        state["unknown"] = True
                state["pending"] -= 1
                if time.monotonic() > deadline and state["pending"] > 0 and not state["stop"]:
                    stats.timed_out = True
                    state["unknown"] = True
                    state["stop"] = True
                cond.notify_all()

    if workers == 1:
        work()
    else:
        threads = [threading.Thread(target=work, daemon=True) for _ in range(workers)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if state["error"] is not None:
        raise state["error"]

    stats.wall_time = time.monotonic() - start
    if hull[0] is not None:
        stats.delta_lo, stats.delta_hi = hull[0].tolist(), hull[1].tolist()
    if state["witness"] is not None:
        status = Status.FALSIFIED
    elif state["unknown"]:
        status = Status.UNKNOWN
    else:
        status = Status.VERIFIED
    log.info("verify: %s after %d regions (%d splits) in %.3fs", status.value,
             stats.regions, stats.splits, stats.wall_time)
    return Verdict(status, state["witness"], stats)


def first_pass_bounds(pair: NetworkPair, region: InputRegion,
                      mode: str = "delta") -> tuple[np.ndarray, np.ndarray]:
    """Output-delta bounds from a single pass, without refinement."""
    if mode == "delta":
        res = forward_pass(pair, region)
        return res.output_delta_lo, res.output_delta_hi
    if mode == "composed-baseline":
        res = symbolic_pass(compose_difference(pair), region)
        return res.output_lo, res.output_hi
    raise ValueError(f"unknown mode {mode!r}")
