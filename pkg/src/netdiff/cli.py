"""Command-line entry point: ``netdiff verify | truncate | compare``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import interval as iv
from .network import (NNetFormatError, NetworkPair, QuantizationOverflow, parse_nnet,
                      quantize_round, random_network, truncate_f16, write_nnet)
from .symbolic import InputRegion
from .verifier import MODES, Status, VerificationQuery, first_pass_bounds, verify

log = logging.getLogger("netdiff")

EXIT_CODES = {Status.VERIFIED: 0, Status.FALSIFIED: 1, Status.UNKNOWN: 2}
EXIT_ERROR = 3


class CliError(Exception):
    pass


def load_region(path: str | Path) -> InputRegion:
    """Read a JSON array of ``[lo, hi]`` pairs."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read region file {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"region file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list) or not all(isinstance(p, list) and len(p) == 2 for p in data):
        raise CliError(f"region file {path} must hold a list of [lo, hi] pairs")
    try:
        return InputRegion.from_pairs(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad region in {path}: {exc}") from exc


def load_network(path: str | Path):
    try:
        return parse_nnet(Path(path))
    except OSError as exc:
        raise CliError(f"cannot read network {path}: {exc.strerror}") from exc
    except NNetFormatError as exc:
        raise CliError(f"{path}: {exc}") from exc


def load_pair(args) -> NetworkPair:
    try:
        return NetworkPair(load_network(args.net1), load_network(args.net2))
    except ValueError as exc:
        raise CliError(f"networks are not comparable: {exc}") from exc


def _width(lo, hi) -> float:
    return float(np.max(np.asarray(hi) - np.asarray(lo)))


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    pair = load_pair(args)
    region = load_region(args.region)
    if args.threads < 1:
        raise CliError("--threads must be at least 1")
    try:
        if args.normalize:
            region = pair.first.normalize_region(region)
        query = VerificationQuery(
            pair, region, args.epsilon, output_indices=args.output_index,
            max_depth=args.max_depth, timeout=args.timeout, sample_count=args.samples,
            rng_seed=args.seed, mode=args.mode)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    verdict = verify(query, workers=args.threads)
    report = verdict.to_dict()
    report["query"] = query.describe() | {
        "net1": str(args.net1), "net2": str(args.net2), "normalize": args.normalize,
        "fast_math": args.fast_math, "threads": args.threads}
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    print(f"{verdict.status.value}: {verdict.stats.regions} regions, "
          f"{verdict.stats.splits} splits, {verdict.stats.wall_time:.3f}s", file=sys.stderr)
    return EXIT_CODES[verdict.status]


# --------------------------------------------------------------------------
# truncate


def cmd_truncate(args) -> int:
    net = load_network(args.input)
    try:
        out = truncate_f16(net) if args.decimals is None else quantize_round(net, args.decimals)
    except QuantizationOverflow as exc:
        raise CliError(str(exc)) from exc
    how = "binary16" if args.decimals is None else f"{args.decimals} decimal places"
    Path(args.output).write_text(write_nnet(out, comment=f"weights rounded to {how}"))
    return 0


# --------------------------------------------------------------------------
# compare


CSV_FIELDS = ["query", "delta_width", "baseline_width", "width_ratio",
              "delta_status", "baseline_status", "delta_time", "baseline_time",
              "delta_splits", "baseline_splits"]


def compare_one(name: str, pair: NetworkPair, region: InputRegion, args) -> dict:
    row = {"query": name}
    for mode, key in (("delta", "delta"), ("composed-baseline", "baseline")):
        start = time.perf_counter()
        lo, hi = first_pass_bounds(pair, region, mode)
        row[f"{key}_width"] = _width(lo, hi)
        if args.epsilon is not None:
            q = VerificationQuery(pair, region, args.epsilon, max_depth=args.max_depth,
                                  timeout=args.timeout, sample_count=args.samples,
                                  rng_seed=args.seed, mode=mode)
            v = verify(q, workers=args.threads)
            row[f"{key}_status"] = v.status.value
            row[f"{key}_splits"] = v.stats.splits
        else:
            row[f"{key}_status"] = ""
            row[f"{key}_splits"] = ""
        row[f"{key}_time"] = time.perf_counter() - start
    d, b = row["delta_width"], row["baseline_width"]
    row["width_ratio"] = b / d if d > 0 else float("inf")
    return row


def _queries(args):
    if args.random:
        sizes = [int(s) for s in args.layers.split(",")]
        rng = np.random.default_rng(args.seed)
        region = InputRegion(-np.ones(sizes[0]), np.ones(sizes[0]))
        for i in range(args.random):
            f = random_network(sizes, rng)
            yield f"random-{i}", NetworkPair(f, truncate_f16(f)), region
        return
    if not (args.net1 and args.net2 and args.region):
        raise CliError("compare needs --net1, --net2 and --region, or --random N")
    pair = load_pair(args)
    for path in args.region:
        yield Path(path).stem, pair, load_region(path)


def cmd_compare(args) -> int:
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=CSV_FIELDS)
        writer.writeheader()
        ratios = []
        for name, pair, region in _queries(args):
            row = compare_one(name, pair, region, args)
            writer.writerow(row)
            ratios.append(row["width_ratio"])
    finally:
        if out is not sys.stdout:
            out.close()
    if ratios:
        dominated = sum(r >= 1.0 for r in ratios)
        print(f"queries: {len(ratios)}  delta <= baseline: {dominated}/{len(ratios)}  "
              f"median width ratio (baseline/delta): {statistics.median(ratios):.4g}",
              file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-depth", type=int, default=40)
    p.add_argument("--timeout", type=float, default=1800.0, help="seconds")
    p.add_argument("--threads", type=int, default=10)
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fast-math", action="store_true",
                   help="skip outward rounding (results may be unsound)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netdiff",
                                     description="Bound the output difference of two ReLU networks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="prove or refute |f'(x) - f(x)| < epsilon")
    p.add_argument("--net1", required=True)
    p.add_argument("--net2", required=True)
    p.add_argument("--region", required=True, help="JSON list of [lo, hi] pairs")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--output-index", type=int, action="append", default=None)
    p.add_argument("--mode", choices=MODES, default="delta")
    p.add_argument("--normalize", action="store_true",
                   help="map the region through the first network's input normalization")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    _add_search_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("truncate", help="round a network's parameters")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--decimals", type=int, default=None,
                   help="round to this many decimal places instead of binary16")
    p.set_defaults(fast_math=False)
    p.set_defaults(func=cmd_truncate)

    p = sub.add_parser("compare", help="delta analysis vs the composed-network baseline")
    p.add_argument("--net1")
    p.add_argument("--net2")
    p.add_argument("--region", action="append", help="repeatable")
    p.add_argument("--random", type=int, default=0, help="use N random truncated pairs")
    p.add_argument("--layers", default="5,50,50,50,1", help="layer sizes for --random")
    p.add_argument("--epsilon", type=float, default=None,
                   help="also run full verification at this epsilon")
    p.add_argument("--csv", help="write rows here instead of stdout")
    _add_search_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with iv.fast_math(args.fast_math):
            return args.func(args)
    except CliError as exc:
        print(f"netdiff: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"netdiff: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
