"""Command-line interface: ``rise test | diagnose | simulate | sweep``.

Exit codes: 0 success, 2 invalid input or usage, 3 singular covariance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import DegenerateCovarianceError, InfeasibleMatchingError, RiseError
from .geometry import ObservationSet, distance_matrix, read_csv_matrix, read_distance_csv
from .graphseq import KINDS, build_graph, resolve_k
from .inference import (STATISTICS, SampleSplit, condition_diagnostics, degeneracy_check,
                        permutation_moments, permutation_pvalue, rank_sums, rise_test)
from .rankweights import KERNELS, SCHEMES, rank_matrix
from .simbench import (MethodConfig, SimSetting, estimate_power, power_vs_k_sweep,
                       reports_to_csv, reports_to_json)

EXIT_OK, EXIT_INVALID, EXIT_DEGENERATE = 0, 2, 3


class _Usage(RiseError):
    pass


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _shape(s):
    try:
        r, c = (int(p) for p in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWS,COLS, got {s!r}") from None
    return r, c


def _add_method(p, k_default="10"):
    p.add_argument("--graph", choices=KINDS, default="knn")
    p.add_argument("--rank", choices=SCHEMES, default="induced")
    p.add_argument("--k", default=k_default, help="integer, or n065 for floor(N^0.65)")
    p.add_argument("--kernel", choices=KERNELS, default="gaussian")
    p.add_argument("--sigma", type=float, default=None,
                   help="gaussian bandwidth (default: median edge distance)")
    p.add_argument("--approx-matching", action="store_true",
                   help="greedy pairing instead of exact matching for --graph mdp")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: RISE_THREADS, else all cores)")
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_inputs(p):
    p.add_argument("--x", help="CSV of sample X, one observation per row")
    p.add_argument("--y", help="CSV of sample Y")
    p.add_argument("--dist", help="CSV of a precomputed N x N distance matrix")
    p.add_argument("--m", type=int, help="size of sample X (first m rows) with --dist")
    p.add_argument("--metric", choices=("euclidean", "frobenius"), default="euclidean")
    p.add_argument("--shape", type=_shape, default=None,
                   help="ROWS,COLS of matrix-valued observations (needed for frobenius)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rise", description="Graph-based rank two-sample tests.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run the two-sample test")
    _add_inputs(t)
    _add_method(t)
    t.add_argument("--pvalue", choices=("asymptotic", "permutation", "both"), default="asymptotic")
    t.add_argument("--statistic", choices=STATISTICS, default="t_r",
                   help="statistic for the permutation p-value")
    t.add_argument("--budget", type=_positive_int, default=2000,
                   help="Monte Carlo permutations when exact enumeration is too large")
    t.add_argument("--alpha", type=float, default=0.05)
    _add_common(t)

    g = sub.add_parser("diagnose", help="moment, degeneracy and condition diagnostics")
    _add_inputs(g)
    _add_method(g)
    _add_common(g)

    for name, helptext in (("simulate", "estimate size or power"),
                           ("sweep", "power across k = N^lambda")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--setting", required=True, help="e.g. I-a, II-null, IV-c")
        s.add_argument("--d", type=_positive_int, required=True)
        s.add_argument("--m", type=_positive_int, default=50)
        s.add_argument("--n", type=_positive_int, default=50)
        s.add_argument("--reps", type=_positive_int, default=1000)
        s.add_argument("--alpha", type=float, default=0.05)
        _add_method(s)
        if name == "sweep":
            s.add_argument("--lambda-grid", default="0.2,0.4,0.65,0.8")
        s.add_argument("--timing", action="store_true",
                       help="fill the seconds column (output is then not reproducible)")
        _add_common(s)
    return ap


def _config(args) -> dict:
    # threads and output destination do not affect results
    skip = {"threads", "out"}
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k not in skip}


def _load(args):
    if args.dist:
        if args.x or args.y:
            raise _Usage("--dist cannot be combined with --x/--y")
        if args.m is None:
            raise _Usage("--dist requires --m (size of sample X)")
        dist = read_distance_csv(args.dist)
        N = dist.n
        if not 2 <= args.m <= N - 2:
            raise _Usage(f"--m must leave at least 2 observations per sample, N={N}, m={args.m}")
        return dist, SampleSplit(args.m, N - args.m)
    if not (args.x and args.y):
        raise _Usage("provide both --x and --y, or --dist with --m")
    if args.m is not None:
        raise _Usage("--m is only used with --dist")
    x = read_csv_matrix(args.x)
    y = read_csv_matrix(args.y)
    if x.shape[1] != y.shape[1]:
        raise _Usage(f"--x has {x.shape[1]} columns but --y has {y.shape[1]}")
    obs = ObservationSet(np.vstack([x, y]), shape_hint=args.shape)
    return distance_matrix(obs, args.metric), SampleSplit(x.shape[0], y.shape[0])


def _graph_and_rank(args, dist):
    k = resolve_k(args.k, dist.n)
    g = build_graph(dist, args.graph, k, approx_matching=args.approx_matching)
    opts = {"kernel": args.kernel, "sigma": args.sigma} if args.rank == "kernel" else {}
    return k, g, rank_matrix(g, args.rank, **opts)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _flat_csv(d: dict) -> str:
    flat = {}

    def walk(prefix, v):
        if isinstance(v, dict):
            for k2, v2 in v.items():
                walk(f"{prefix}{k2}.", v2)
        else:
            flat[prefix[:-1]] = "" if v is None else (json.dumps(v) if isinstance(v, list) else v)

    walk("", d)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(flat.keys())
    w.writerow(flat.values())
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_doc(args, doc: dict) -> None:
    doc = _clean(doc)
    if args.format == "csv":
        _emit(args, _flat_csv(doc))
    else:
        _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _degenerate_doc(args, r, split, ms, k, exc):
    """Partial result when only a permutation p-value for z_w survives the degeneracy."""
    ux, uy = rank_sums(r, split)
    doc = {"u_x": ux, "u_y": uy, "t_r": None, "z_w": None, "z_diff": None, "r_max": None,
           "p_chi2": None, "p_zw": None, "p_max": None, "p_perm": None, "perm_mode": None,
           "perm_statistic": None, "diagnostics": ms.__dict__.copy(), "condition_ratios": {},
           "degenerate": exc.condition}
    if args.pvalue != "asymptotic" and args.statistic == "z_w" and not ms.c2_degenerate:
        sd = math.sqrt(ms.sigma_w_sq)
        n_, m_, N = split.n, split.m, split.N
        doc["z_w"] = (((n_ - 1) * ux + (m_ - 1) * uy) / (N - 2) - ms.mu_w) / sd
        doc["p_perm"], doc["perm_mode"] = permutation_pvalue(
            r, split, "z_w", args.budget, args.seed, args.threads)
        doc["perm_statistic"] = "z_w"
        return doc, True
    return doc, False


def cmd_test(args) -> int:
    dist, split = _load(args)
    k, g, r = _graph_and_rank(args, dist)
    perm = args.statistic if args.pvalue != "asymptotic" else None
    cfg = _config(args) | {"k_resolved": k, "N": split.N, "n": split.n, "m": split.m}
    try:
        res = rise_test(r, split, permutation=perm, budget=args.budget, seed=args.seed,
                        threads=args.threads)
    except DegenerateCovarianceError as exc:
        ms = permutation_moments(r, split.m, split.n)
        doc, usable = _degenerate_doc(args, r, split, ms, k, exc)
        doc["config"] = cfg
        _emit_doc(args, doc)
        if usable:
            return EXIT_OK
        print(f"rise: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    doc = res.to_dict()
    if args.pvalue == "permutation":
        for key in ("p_chi2", "p_zw", "p_max"):
            doc[key] = None
    doc["degenerate"] = None
    doc["reject"] = bool((doc["p_perm"] if args.pvalue == "permutation" else doc["p_chi2"])
                         < args.alpha)
    doc["config"] = cfg
    _emit_doc(args, doc)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    dist, split = _load(args)
    k, g, r = _graph_and_rank(args, dist)
    ms = permutation_moments(r, split.m, split.n)
    deg = degeneracy_check(ms)
    try:
        cond = condition_diagnostics(r)
    except DegenerateCovarianceError:
        cond = {"a3": None, "a5": None, "king": None}
    degrees = g.degrees()
    hist = np.bincount(degrees)
    doc = {
        "moments": ms.__dict__.copy(),
        "status": deg.status,
        "c1_degenerate": ms.c1_degenerate,
        "c2_degenerate": ms.c2_degenerate,
        "c1_ratio": deg.c1_ratio,
        "c2_ratio": deg.c2_ratio,
        "condition_ratios": cond,
        "graph": {"kind": g.kind, "k": k, "n_edges": g.n_edges,
                  "degree_histogram": {str(i): int(c) for i, c in enumerate(hist) if c}},
        "config": _config(args) | {"k_resolved": k, "N": split.N, "n": split.n, "m": split.m},
    }
    _emit_doc(args, doc)
    if deg.status != "ok":
        print(f"rise: covariance is singular ({deg.status})", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


def _method(args) -> MethodConfig:
    return MethodConfig(graph=args.graph, rank=args.rank, k=args.k,
                        approx_matching=args.approx_matching, kernel=args.kernel,
                        sigma=args.sigma)


def _emit_reports(args, reports) -> None:
    if args.format == "csv":
        _emit(args, reports_to_csv(reports, timing=args.timing))
    else:
        _emit(args, reports_to_json(reports, timing=args.timing, config=_config(args)))


def cmd_simulate(args) -> int:
    s = SimSetting.parse(args.setting, args.d)
    rep = estimate_power(s, _method(args), args.m, args.n, args.alpha, args.reps,
                         args.seed, args.threads)
    _emit_reports(args, [rep])
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = SimSetting.parse(args.setting, args.d)
    try:
        grid = [float(v) for v in args.lambda_grid.split(",") if v.strip()]
    except ValueError:
        raise _Usage(f"--lambda-grid must be comma-separated numbers, got {args.lambda_grid!r}") \
            from None
    reports = power_vs_k_sweep(s, _method(args), args.m, args.n, args.alpha, args.reps, grid,
                               args.seed, args.threads)
    _emit_reports(args, reports)
    return EXIT_OK


COMMANDS = {"test": cmd_test, "diagnose": cmd_diagnose, "simulate": cmd_simulate,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DegenerateCovarianceError as exc:
        print(f"rise: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (RiseError, OSError) as exc:
        hint = " (try a smaller --k)" if isinstance(exc, InfeasibleMatchingError) else ""
        print(f"rise: error: {exc}{hint}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
