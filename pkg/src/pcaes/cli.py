"""Command line: ``pcaes {run,stats,suite,selftest}``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

from . import bench
from .errors import MalformedTraces, PcaesError
from .objectives import FUNCTIONS, list_suite
from .selftest import run_selftest
from .strategy import VariantSpec

SUITES = ("paper-multimodal", "sanity", "all")
VARIANTS = ("plain", "pca", "pca-random")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="pcaes", description="CMA-ES with online PCA: experiments and statistics.",
                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment and write the report", formatter_class=fmt)
    run.add_argument("--variants", default="plain,pca,pca-random",
                     help="comma list of variants: plain, pca, pca-random")
    run.add_argument("--rho", type=float, default=0.5, help="PCA gate probability for pca-random")
    run.add_argument("--functions", default="paper-multimodal",
                     help="comma list of suite names (paper-multimodal, sanity, all) or function ids")
    run.add_argument("--dims", default="10,20,30", help="comma list of dimensions (each >= 2)")
    run.add_argument("--reps", type=int, default=30, help="runs per (variant, function, dim)")
    run.add_argument("--budget-mult", type=int, default=20, help="evaluation budget per dimension")
    run.add_argument("--seed", type=int, default=0, help="base seed")
    run.add_argument("--out", default=bench.env_out_dir(),
                     help="output directory (env PCAES_OUT_DIR overrides the default)")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.add_argument("--pca-tau", type=float, default=None,
                     help="explained-variance threshold for k; 0.95 when neither --pca-tau nor --pca-k is given")
    run.add_argument("--pca-k", type=int, default=None, help="fixed retained dimension (excludes --pca-tau)")
    run.add_argument("--theta", type=int, default=None,
                     help="reduced-space sample count; the population size Lambda when omitted")
    run.add_argument("--window", type=int, default=1, help="recent elite sets used to fit the PCA")
    run.add_argument("--sigma0", type=float, default=2.0, help="initial step size")

    stats = sub.add_parser("stats", help="recompute statistics from traces.csv", formatter_class=fmt)
    stats.add_argument("--in", dest="in_dir", required=True, help="directory containing traces.csv")
    stats.add_argument("--out", default=None, help="output directory; the --in directory when omitted")
    stats.add_argument("--reference-file", default=None,
                       help="ert.csv-format baseline used as the loss-ratio reference; "
                            "per-cell best of the compared variants when omitted")

    suite = sub.add_parser("suite", help="list test-function ids", formatter_class=fmt)
    suite.add_argument("--which", default="paper-multimodal", choices=SUITES, help="which suite")

    sub.add_parser("selftest", help="run the embedded oracle checks", formatter_class=fmt)
    return parser


def _csv_ints(text: str, flag: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected a comma list of integers, got {text!r}") from None


def resolve_functions(text: str) -> list[str]:
    out: list[str] = []
    for item in (p.strip() for p in text.split(",")):
        if not item:
            continue
        ids = list_suite(item) if item in SUITES else [item]
        for fid in ids:
            if fid not in FUNCTIONS:
                raise UsageError(f"--functions: unknown function id {fid!r}")
            if fid not in out:
                out.append(fid)
    if not out:
        raise UsageError("--functions: no functions selected")
    return out


def config_from_args(args) -> bench.ExperimentConfig:
    if args.pca_tau is not None and args.pca_k is not None:
        raise UsageError("--pca-tau and --pca-k are mutually exclusive")
    if not 0.0 <= args.rho <= 1.0:
        raise UsageError(f"--rho must be in [0, 1], got {args.rho}")
    if args.pca_tau is not None and not 0.0 < args.pca_tau <= 1.0:
        raise UsageError(f"--pca-tau must be in (0, 1], got {args.pca_tau}")
    if args.pca_k is not None and args.pca_k < 1:
        raise UsageError("--pca-k must be >= 1")
    if args.theta is not None and args.theta < 1:
        raise UsageError("--theta must be >= 1")
    for flag, value in (("--reps", args.reps), ("--budget-mult", args.budget_mult),
                        ("--workers", args.workers), ("--window", args.window)):
        if value < 1:
            raise UsageError(f"{flag} must be >= 1, got {value}")
    if not args.sigma0 > 0:
        raise UsageError("--sigma0 must be positive")
    dims = _csv_ints(args.dims, "--dims")
    if not dims or any(d < 2 for d in dims):
        raise UsageError(f"--dims: every dimension must be >= 2, got {args.dims!r}")
    names = [v.strip() for v in args.variants.split(",") if v.strip()]
    bad = [v for v in names if v not in VARIANTS]
    if bad or not names or len(set(names)) != len(names):
        raise UsageError(f"--variants: expected distinct names from {', '.join(VARIANTS)}, got {args.variants!r}")
    variants = [
        VariantSpec(kind=v, rho=args.rho, pca_k=args.pca_k, pca_tau=args.pca_tau,
                    theta=args.theta, window=args.window)
        for v in names
    ]
    return bench.ExperimentConfig(
        variants=variants, function_ids=resolve_functions(args.functions), dims=dims,
        reps=args.reps, budget_multiplier=args.budget_mult, base_seed=args.seed,
        sigma0=args.sigma0, workers=args.workers,
    )


def read_reference(path) -> dict[tuple, float]:
    ref: dict[tuple, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for line, row in enumerate(reader, start=2):
            try:
                key = (row["function_id"], int(row["dim"]), float(row["target"]))
                ref[key] = min(ref.get(key, math.inf), float(row["ert"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedTraces(f"bad reference row: {exc}", line) from None
    return ref


def cmd_run(args) -> int:
    config = config_from_args(args)
    traces = bench.run_experiment(config)
    stats = bench.compute_stats(traces)
    bench.write_report(traces, stats, args.out, config=config)
    for line in bench.summary_lines(traces):
        print(line)
    print(f"wrote {len(traces)} runs to {args.out}")
    return 0


def cmd_stats(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out) if args.out else in_dir
    traces = bench.read_traces(in_dir / "traces.csv")
    reference = read_reference(args.reference_file) if args.reference_file else None
    stats = bench.compute_stats(traces, reference)
    bench.write_report(traces, stats, out_dir, include_traces=False)
    print(f"recomputed statistics for {len(traces)} runs into {out_dir}")
    return 0


def cmd_suite(args) -> int:
    for fid in list_suite(args.which):
        print(fid)
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 2


COMMANDS = {"run": cmd_run, "stats": cmd_stats, "suite": cmd_suite, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except MalformedTraces as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return 2
    except (PcaesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
