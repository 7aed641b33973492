"""Command-line interface.

Exit codes: 0 on success, 1 on usage, input or validation errors, 2 when a
divergent quantity was emitted (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import _backend, distributions
from ._errors import DepthCapExceeded
from .engine import DEFAULT_DIM_MAX, evaluate
from .index import build_index, local_query
from .model import Dataset, ModelParams, load_dataset, dump_dataset
from .moments import Indicator, Power, moment
from .numerics import DivergenceMismatch
from .skeleton import DEFAULT_SKELETON_DEPTH, map_skeleton

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGENT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Divergent:
    """Marker for an infinite quantity, optionally with its scaled log."""

    def __init__(self, scaled_log: float | None = None):
        self.scaled_log = scaled_log


def _json_value(v):
    if isinstance(v, Divergent):
        return {"divergent": True, "scaled_log": v.scaled_log}
    if isinstance(v, float) and math.isinf(v) and v > 0:
        return {"divergent": True, "scaled_log": None}
    if isinstance(v, np.ndarray):
        return [_json_value(float(e)) for e in v]
    if isinstance(v, (list, tuple)):
        return [_json_value(e) for e in v]
    if isinstance(v, dict):
        return {k: _json_value(e) for k, e in v.items()}
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _csv_value(v) -> str:
    if isinstance(v, Divergent):
        return "inf"
    if isinstance(v, (float, np.floating)):
        return "inf" if math.isinf(v) and v > 0 else repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_csv_value(e) for e in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def _has_divergent(v) -> bool:
    if isinstance(v, Divergent):
        return True
    if isinstance(v, (float, np.floating)):
        return math.isinf(v) and v > 0
    if isinstance(v, dict):
        return any(_has_divergent(e) for e in v.values())
    if isinstance(v, (list, tuple)):
        return any(_has_divergent(e) for e in v)
    return False


def _emit(rows: list[dict], fmt: str, out, single: bool = False, extra: dict | None = None) -> None:
    if fmt == "json":
        if single:
            payload = _json_value(rows[0])
        else:
            payload = dict(extra or {})
            payload["rows"] = _json_value(rows)
        out.write(json.dumps(payload, allow_nan=False) + "\n")
        return
    writer = csv.writer(out, lineterminator="\n")
    keys = list(rows[0]) if rows else []
    writer.writerow(keys)
    for row in rows:
        writer.writerow([_csv_value(row[k]) for k in keys])


# ---------------------------------------------------------------- inputs


def _params(args) -> ModelParams:
    try:
        params = ModelParams(s=args.s, alpha=args.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if params.u == 0.0:
        raise UsageError("s = 1 leaves no uniform mass; choose s < 1")
    return params


def _dataset(args) -> Dataset:
    if args.data is not None and args.dist is not None:
        raise UsageError("--data and --dist are mutually exclusive")
    if args.data is not None:
        if args.n is not None:
            raise UsageError("--n only applies to a sampled dataset (--dist)")
        if args.data == "-":
            return load_dataset(sys.stdin, args.compactify)
        with open(args.data, encoding="utf-8") as fh:
            return load_dataset(fh, args.compactify)
    if args.dist is not None:
        if args.n is None:
            raise UsageError("--dist needs --n")
        return distributions.sample(args.dist, args.n, args.seed)
    raise UsageError("no input: give --data FILE or --dist NAME --n COUNT")


def _grid(args) -> np.ndarray:
    if args.grid < 1:
        raise UsageError(f"--grid must be >= 1, got {args.grid}")
    return distributions.grid(args.grid)


# ---------------------------------------------------------------- commands


def cmd_evidence(args, out) -> int:
    params = _params(args)
    data = _dataset(args)
    res = evaluate(data, x=args.x, N=args.dim_max, params=params, min_depth=args.min_depth)
    lv = res.log_evidence
    log_ev = Divergent(lv.log) if lv.is_divergent else lv.log
    height = res.height_at_x
    if height is not None and math.isinf(height):
        height = Divergent()
    row = {
        "log_evidence": log_ev,
        "split_prob_root": res.split_prob,
        "height_at_x": height,
        "avg_height": res.avg_height,
        "dim_dist": [float(v) for v in res.dim_dist],
        "dim_tail": res.tail_mass,
        "recursion_count": res.recursion_count,
        "divergent": res.divergent,
        "divergence_class": res.divergence_class.to_list(),
    }
    if args.format == "csv":
        row["divergence_class"] = ";".join(f"{v!r}:{m}" for v, m in res.divergence_class.heavy_points)
    _emit([row], args.format, out, single=True)
    return EXIT_DIVERGENT if _has_divergent(row) else EXIT_OK


def cmd_density(args, out) -> int:
    params = _params(args)
    data = _dataset(args)
    idx = build_index(data, params, min_depth=args.min_depth)
    rows = []
    for x in _grid(args):
        x = float(x)
        rows.append({
            "x": x,
            "density": local_query(idx, x, "density"),
            "variance": local_query(idx, x, "variance"),
            "height": local_query(idx, x, "height"),
        })
    _emit(rows, args.format, out, extra={"grid": args.grid})
    return EXIT_DIVERGENT if _has_divergent(rows) else EXIT_OK


def cmd_moments(args, out) -> int:
    params = _params(args)
    data = _dataset(args)
    powers = args.power or [1]
    for k in powers:
        if k < 1:
            raise UsageError(f"--power must be >= 1, got {k}")
    idx = build_index(data, params, min_depth=args.min_depth)
    rows = [{"power": k, "moment": moment(data, Power(k), index=idx)} for k in powers]
    _emit(rows, args.format, out)
    return EXIT_OK


def cmd_cdf(args, out) -> int:
    params = _params(args)
    data = _dataset(args)
    points = args.at if args.at else [float(x) for x in _grid(args)]
    try:
        specs = [Indicator(a) for a in points]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    idx = build_index(data, params, min_depth=args.min_depth)
    rows = [{"a": sp.a, "cdf": moment(data, sp, index=idx)} for sp in specs]
    _emit(rows, args.format, out)
    return EXIT_OK


def cmd_skeleton(args, out) -> int:
    params = _params(args)
    data = _dataset(args)
    idx = build_index(data, params, min_depth=args.min_depth)
    tree = map_skeleton(data, params, max_depth=args.max_depth, index=idx)
    fmt = args.format
    if fmt == "json":
        out.write(tree.to_json() + "\n")
    elif fmt == "text":
        out.write(tree.to_text() + "\n")
    else:
        rows = []
        for nd in tree.walk():
            lo, hi = nd.address.interval()
            rows.append({"address": nd.address.bits, "lo": float(lo), "hi": float(hi), "n": nd.n,
                         "g": nd.g, "kind": nd.kind, "truncated": nd.truncated})
        _emit(rows, "csv", out)
    return EXIT_OK


def cmd_sample(args, out) -> int:
    if args.dist is None or args.n is None:
        raise UsageError("sample needs --dist and --n")
    data = distributions.sample(args.dist, args.n, args.seed)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_dataset(data, fh)
    else:
        dump_dataset(data, out)
    return EXIT_OK


def cmd_bench(args, out) -> int:
    params = _params(args)
    dist = args.dist or "Linear"
    sizes = args.n_list
    rows = []
    prev = None
    for n in sizes:
        data = distributions.sample(dist, n, args.seed)
        best = math.inf
        count = 0
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            res = evaluate(data, N=args.dim_max, params=params, min_depth=args.min_depth)
            best = min(best, time.perf_counter() - t0)
            count = res.recursion_count
        rows.append({
            "n": n,
            "wall_time": best,
            "recursion_count": count,
            "count_ratio": (count / prev) if prev else None,
            "backend": _backend.BACKEND,
        })
        prev = count
    _emit(rows, args.format, out, extra={"dist": dist})
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _n_list(text: str) -> list[int]:
    try:
        sizes = [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated sizes, got {text!r}") from None
    if not sizes or min(sizes) < 0:
        raise argparse.ArgumentTypeError("sizes must be nonnegative")
    return sizes


def _common(formats=("json", "csv"), default_format="json") -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--s", type=float, default=0.5, help="split probability (default 0.5)")
    common.add_argument("--alpha", type=float, default=1.0, help="Beta concentration (default 1)")
    common.add_argument("--dim-max", type=int, default=DEFAULT_DIM_MAX,
                        help="number of dimension probabilities to report (default 16)")
    common.add_argument("--grid", type=int, default=1000, help="grid size (default 1000)")
    common.add_argument("--seed", type=int, default=0, help="sampler seed (default 0)")
    common.add_argument("--dist", help="sample from a reference distribution: "
                        + ", ".join(distributions.DISTRIBUTIONS))
    common.add_argument("--n", type=int, help="sample size for --dist")
    common.add_argument("--data", help="dataset file, one value per line ('-' for stdin)")
    common.add_argument("--format", choices=formats, default=default_format)
    common.add_argument("--min-depth", type=int, default=0,
                        help="force recursion to this depth before closed forms")
    common.add_argument("--compactify", choices=("reciprocal", "rational"),
                        help="map input values from an unbounded domain into [0,1)")
    common.add_argument("--backend", choices=("compiled", "python"),
                        help="kernel to use (default: compiled when available)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="bayestree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evidence", parents=[common], help="evidence, heights and dimension")
    p.add_argument("--x", type=float, help="query point for the expected height E[h(x)|D]")
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("density", parents=[common], help="predictive density on a grid")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("moments", parents=[common], help="posterior moments E[x^k|D]")
    p.add_argument("--power", type=int, action="append", help="power k >= 1 (repeatable)")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("cdf", parents=[common], help="posterior distribution function")
    p.add_argument("--at", type=float, action="append", help="threshold a in [0,1) (repeatable; "
                   "default: the grid)")
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("skeleton", parents=[_common(("text", "json", "csv"), "text")],
                       help="MAP-like partition tree")
    p.add_argument("--max-depth", type=int, default=DEFAULT_SKELETON_DEPTH,
                   help="cut infinite splitting chains at this depth")
    p.set_defaults(func=cmd_skeleton)

    p = sub.add_parser("sample", parents=[common], help="draw a dataset from a reference density")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("bench", parents=[common], help="time the recursion over sample sizes")
    p.add_argument("--n-list", type=_n_list, default=[10_000, 20_000, 40_000, 80_000],
                   help="comma-separated sample sizes")
    p.add_argument("--repeat", type=int, default=3, help="timing repetitions (best is kept)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = out if out is not None else sys.stdout
    if args.dim_max < 1:
        parser.error(f"--dim-max must be >= 1, got {args.dim_max}")
    if args.min_depth < 0:
        parser.error(f"--min-depth must be >= 0, got {args.min_depth}")
    saved = _backend.kernel, _backend.BACKEND
    if args.backend is not None:
        try:
            kernel = _backend.get_kernel(args.backend)
        except ValueError as exc:
            parser.error(str(exc))
        _backend.kernel, _backend.BACKEND = kernel, kernel.BACKEND
    buf = io.StringIO()
    try:
        code = args.func(args, buf)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError, DepthCapExceeded, DivergenceMismatch) as exc:
        sys.stderr.write(f"bayestree: error: {exc}\n")
        return EXIT_USAGE
    finally:
        _backend.kernel, _backend.BACKEND = saved
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
