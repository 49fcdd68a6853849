"""Command-line interface: ``epr {synth,run,autotune,eval}``.

Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .autotune import P_INTRA_DB, P_RELOC, autotune
from .engine import EprConfig, Strategy, run
from .errors import DataError, ValidationError
from .evaluation import REPORT_COLUMNS, evaluate, write_report_csv
from .io import (
    load_descriptors,
    load_ground_truth,
    load_sparse_csv,
    save_descriptors,
    save_ground_truth,
    save_sparse_csv,
)
from .similarity import intra_db_matrix, upper_triangle
from .synthetic import SyntheticSpec, generate_synthetic, parse_route

log = logging.getLogger("epr")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4
MANIFEST_VERSION = 1

STRATEGIES = {
    "pr": Strategy.PERIODIC,
    "er": Strategy.EVENT_BASED,
    "full": Strategy.FULL_BASELINE,
    "pr-no-sdb": Strategy.NO_SDB,
}


class UsageError(Exception):
    pass


def _probability(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < p < 1.0:
        raise argparse.ArgumentTypeError(f"probability must lie in (0, 1), got {text}")
    return p


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _nonneg_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {n}")
    return n


def _nonneg_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x >= 0.0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epr",
        description="Sparse sequence-based place recognition with intra-database loop expansion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "synth",
        help="generate a synthetic dataset",
        description=(
            "Write <prefix>_db.eprd, <prefix>_q.eprd and <prefix>_gt.csv. Routes are "
            "comma-separated tokens: a place index, X (exploration frame), a half-open "
            "range a:b, each optionally repeated with *n (e.g. 'X*100,0:200')."
        ),
    )
    p.add_argument("--places", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--db-route", required=True)
    p.add_argument("--query-route", required=True)
    p.add_argument("--noise", type=_nonneg_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser(
        "run",
        help="run a matcher and write the sparse similarity CSV",
        description=(
            "Strategies: pr (periodic relocalization), er (event-based relocalization), "
            "full (compare every pair), pr-no-sdb (periodic, no intra-database expansion). "
            "Writes --out as db_index,query_index,similarity and a JSON manifest next to it."
        ),
    )
    p.add_argument("--db", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--strategy", choices=sorted(STRATEGIES), default="pr")
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--v", type=_nonneg_int, default=5)
    p.add_argument("--t-reloc", type=_positive_int, default=100)
    p.add_argument("--p-db", type=_probability, default=P_INTRA_DB)
    p.add_argument("--p-reloc", type=_probability, default=P_RELOC)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="manifest path (default: <out stem>.manifest.json)")

    p = sub.add_parser("autotune", help="fit the intra-database threshold and print mu, sigma, theta")
    p.add_argument("--db", required=True)
    p.add_argument("--p", type=_probability, default=P_INTRA_DB)
    p.add_argument("--no-standardize", action="store_true")

    p = sub.add_parser(
        "eval",
        help="precision-recall evaluation of a similarity CSV",
        description=(
            "Writes a CSV with columns " + ",".join(REPORT_COLUMNS) + ". rel_auc_vs_full "
            "is filled when --baseline names the full-comparison similarity CSV."
        ),
    )
    p.add_argument("--sim", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--db-count", type=_positive_int, required=True)
    p.add_argument("--q-count", type=_positive_int, required=True)
    p.add_argument("--mode", choices=("single", "multi"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="epr")
    p.add_argument("--baseline")
    return parser


def cmd_synth(args) -> int:
    try:
        db_route = parse_route(args.db_route)
        q_route = parse_route(args.query_route)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        spec = SyntheticSpec(args.places, args.dim, db_route, q_route, args.noise, args.seed)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    db, q, gt = generate_synthetic(spec)
    prefix = args.out_prefix
    save_descriptors(db, f"{prefix}_db.eprd")
    save_descriptors(q, f"{prefix}_q.eprd")
    save_ground_truth(gt, f"{prefix}_gt.csv")
    print(f"db={db.count} query={q.count} dim={db.dim} hard={len(gt.hard)} soft={len(gt.soft)}")
    return EXIT_OK


def _manifest_path(args) -> Path:
    if args.manifest:
        return Path(args.manifest)
    out = Path(args.out)
    return out.with_name(out.stem + ".manifest.json")


def cmd_run(args) -> int:
    tic = time.perf_counter()
    config = EprConfig(
        k=args.k,
        v=args.v,
        strategy=STRATEGIES[args.strategy],
        t_reloc=args.t_reloc,
        p_db=args.p_db,
        p_reloc=args.p_reloc,
        standardize_db=not args.no_standardize,
    )
    db = load_descriptors(args.db, "database")
    query = load_descriptors(args.query, "query")
    load_s = time.perf_counter() - tic

    matrix, report = run(db, query, config)

    write_tic = time.perf_counter()
    save_sparse_csv(matrix, args.out)
    manifest_path = _manifest_path(args)
    write_s = time.perf_counter() - write_tic

    config_echo = config.to_dict()
    config_echo["strategy"] = args.strategy
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "config": config_echo,
        "inputs": {"db": args.db, "query": args.query},
        "outputs": {"similarities": args.out, "manifest": str(manifest_path)},
        "db_count": report.db_count,
        "q_count": report.q_count,
        "evaluated_pairs": report.evaluated_pairs,
        "density": report.percentage,
        "reloc_events": report.reloc_events,
        "theta_db": report.theta_db,
        "theta_reloc": report.theta_reloc,
        "timing": {
            "load": load_s,
            "init": report.timings["init"],
            "sdb": report.timings["sdb"],
            "query_loop": report.timings["query_loop"],
            "write": write_s,
        },
    }
    manifest["timing"]["total"] = time.perf_counter() - tic
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(
        f"strategy={args.strategy} pairs={report.evaluated_pairs} density={report.percentage:.3f}% "
        f"relocs={len(report.reloc_events)} time={manifest['timing']['total']:.2f}s"
    )
    return EXIT_OK


def cmd_autotune(args) -> int:
    db = load_descriptors(args.db, "database")
    sdb = intra_db_matrix(db, use_standardization=not args.no_standardize)
    samples = upper_triangle(sdb) if db.count > 1 else sdb.ravel()
    model = autotune(samples, args.p)
    print(f"mu={model.mu:.9g}")
    print(f"sigma={model.sigma:.9g}")
    print(f"theta={model.theta:.9g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    gt = load_ground_truth(args.gt, args.db_count, args.q_count)
    matrix = load_sparse_csv(args.sim, args.db_count, args.q_count)
    report = evaluate(matrix, gt, args.mode, method=args.method)
    baseline = None
    if args.baseline:
        base_matrix = load_sparse_csv(args.baseline, args.db_count, args.q_count)
        baseline = evaluate(base_matrix, gt, args.mode, method="full")
    reports = [report] + ([baseline] if baseline else [])
    write_report_csv(args.out, reports, baseline)
    print(f"mode={args.mode} auc={report.auc:.3f} density={report.evaluated_pair_percentage:.3f}%")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "autotune": cmd_autotune, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"epr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"epr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
