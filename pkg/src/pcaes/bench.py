"""Experiment runner and run-length statistics (ERT, ECDF, ERT loss ratios).

Statistics are pure functions of the traces, so every derived file can be
recomputed from ``traces.csv`` alone.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCell, MalformedTraces, ReportError
from .es import EsParams, RunTrace
from .numerics import RngStream, stable_hash
from .objectives import list_suite, make_instance
from .strategy import VariantSpec, run_variant

DEFAULT_TARGETS = tuple(10.0 ** e for e in range(2, -9, -1))
DEFAULT_FE_GRID = (2.0, 10.0, 100.0, 1e3, 1e4)
QUANTILES = (0.10, 0.25, 0.50, 0.75, 0.90)

TRACES_HEADER = ["variant", "function_id", "dim", "rep", "seed", "evals", "best_f_gap"]
RUNS_HEADER = ["variant", "function_id", "dim", "rep", "seed", "evals_used", "pca_generations", "diverged"]
ERT_HEADER = ["variant", "function_id", "dim", "target", "successes", "total_evals", "ert"]
ECDF_HEADER = ["variant", "dim", "budget_per_dim", "proportion"]
LOSS_HEADER = ["variant", "dim", "fes_per_dim", "best", "q10", "q25", "median", "q75", "q90"]
MEAN_TRACE_HEADER = ["variant", "dim", "evals", "mean_best_f_gap", "median_best_f_gap"]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------- experiment

@dataclass(frozen=True)
class ExperimentConfig:
    variants: tuple[VariantSpec, ...] = (VariantSpec("plain"), VariantSpec("pca"), VariantSpec("pca-random"))
    function_ids: tuple[str, ...] = tuple(list_suite("paper-multimodal"))
    dims: tuple[int, ...] = (10, 20, 30)
    reps: int = 30
    budget_multiplier: int = 20
    base_seed: int = 0
    sigma0: float = 2.0
    # execution setting only: excluded from equality and from config.json
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "function_ids", tuple(self.function_ids))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if any(d < 2 for d in self.dims):
            raise ValueError("every dimension must be >= 2")
        if self.budget_multiplier < 1 or self.workers < 1:
            raise ValueError("budget_multiplier and workers must be positive")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError(f"variant names must be unique, got {names}")

    def to_dict(self) -> dict:
        return {
            "variants": [v.to_dict() for v in self.variants],
            "function_ids": list(self.function_ids),
            "dims": list(self.dims),
            "reps": self.reps,
            "budget_multiplier": self.budget_multiplier,
            "base_seed": self.base_seed,
            "sigma0": self.sigma0,
        }

    @classmethod
    def from_dict(cls, d: dict, workers: int = 1) -> "ExperimentConfig":
        d = dict(d)
        d["variants"] = tuple(VariantSpec.from_dict(v) for v in d["variants"])
        return cls(workers=workers, **d)


def run_seed(base_seed: int, function_id: str, dim: int, rep: int) -> int:
    """Seed shared by the problem instance and the optimizer streams of one run.

    The variant is deliberately not part of the key: all variants face the same
    instance with the same sampling stream (common random numbers).
    """
    return stable_hash("run", int(base_seed), function_id, int(dim), int(rep))


def _tasks(config: ExperimentConfig) -> list[tuple]:
    tasks = []
    for spec in config.variants:
        for fid in config.function_ids:
            for dim in config.dims:
                for rep in range(config.reps):
                    tasks.append((spec, fid, dim, rep, config.budget_multiplier * dim,
                                  config.base_seed, config.sigma0))
    tasks.sort(key=lambda t: (t[0].name, t[1], t[2], t[3]))
    return tasks


def _run_task(task) -> RunTrace:
    spec, fid, dim, rep, budget, base_seed, sigma0 = task
    seed = run_seed(base_seed, fid, dim, rep)
    problem = make_instance(fid, dim, seed)
    params = EsParams.default(dim, budget, sigma0=sigma0)
    _, trace, _ = run_variant(problem, params, spec, RngStream(seed))
    trace.function_id, trace.rep = fid, rep
    return trace


def run_experiment(config: ExperimentConfig) -> list[RunTrace]:
    """One trace per (variant, function, dim, rep), sorted by that key."""
    tasks = _tasks(config)
    if config.workers == 1 or len(tasks) <= 1:
        traces = [_run_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            traces = list(pool.map(_run_task, tasks, chunksize=chunk))
    return sorted(traces, key=RunTrace.key)


# ---------------------------------------------------------------- statistics

@dataclass(frozen=True)
class ErtEstimate:
    target: float
    total_evals: int
    successes: int
    ert: float


@dataclass(frozen=True)
class EcdfCurve:
    points: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class LossRatioRow:
    variant: str
    dim: int
    fes_per_dim: str
    values: tuple[float, ...]  # best, q10, q25, median, q75, q90
    count: int
    missing_reference: int


def first_hit(trace: RunTrace, target: float) -> int | None:
    for e, g in zip(trace.evals, trace.best_f_gap):
        if g <= target:
            return e
    return None


def compute_ert(traces: Sequence[RunTrace], target: float) -> ErtEstimate:
    if not traces:
        raise EmptyCell("no traces in cell")
    total, successes = 0, 0
    for tr in traces:
        hit = first_hit(tr, target)
        if hit is None:
            total += tr.evals_used
        else:
            total += hit
            successes += 1
    ert = total / successes if successes else math.inf
    return ErtEstimate(target=target, total_evals=total, successes=successes, ert=ert)


def default_budget_grid(traces: Iterable[RunTrace], per_decade: int = 5) -> list[float]:
    """Log-spaced budgets per dimension from 1 up to the largest run length."""
    top = max((tr.evals_used / tr.dim for tr in traces if tr.dim), default=1.0)
    steps = int(math.ceil(per_decade * math.log10(max(top, 1.0)) - 1e-9))
    return [10.0 ** (j / per_decade) for j in range(steps + 1)]


def compute_ecdf(traces: Sequence[RunTrace], targets: Sequence[float] = DEFAULT_TARGETS,
                 budget_grid: Sequence[float] | None = None) -> EcdfCurve:
    """Fraction of (trace, target) pairs whose first hit is within ``b * dim`` evaluations."""
    if budget_grid is None:
        budget_grid = default_budget_grid(traces)
    pairs = []
    for tr in traces:
        for t in targets:
            h = first_hit(tr, t)
            pairs.append((math.inf if h is None else h, tr.dim))
    points = []
    for b in budget_grid:
        solved = sum(1 for h, d in pairs if h <= b * d)
        points.append((float(b), solved / len(pairs) if pairs else 0.0))
    return EcdfCurve(points=tuple(points))


def quantile(values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics; infinite entries are allowed."""
    xs = sorted(values)
    if not xs:
        return math.nan
    pos = q * (len(xs) - 1)
    lo = int(math.floor(pos))
    frac = pos - lo
    if frac == 0.0 or lo + 1 >= len(xs):
        return xs[lo]
    a, b = xs[lo], xs[lo + 1]
    if a == b:
        return a
    return a + (b - a) * frac


def _group(traces: Iterable[RunTrace], key) -> dict:
    out: dict = {}
    for tr in traces:
        out.setdefault(key(tr), []).append(tr)
    return out


def ert_table(traces: Sequence[RunTrace], targets=DEFAULT_TARGETS) -> dict[tuple, ErtEstimate]:
    """ERT per (variant, function_id, dim, target)."""
    table = {}
    for (v, f, d), cell in sorted(_group(traces, lambda t: (t.variant, t.function_id, t.dim)).items()):
        for target in targets:
            table[(v, f, d, target)] = compute_ert(cell, target)
    return table


def best_reference(ert: dict[tuple, ErtEstimate]) -> dict[tuple, float]:
    """Per (function_id, dim, target): smallest ERT among the variants present."""
    ref: dict[tuple, float] = {}
    for (_, f, d, target), est in ert.items():
        key = (f, d, target)
        ref[key] = min(ref.get(key, math.inf), est.ert)
    return ref


def compute_loss_ratios(traces: Sequence[RunTrace], reference: dict[tuple, float] | None = None,
                        fe_grid: Sequence[float] = DEFAULT_FE_GRID,
                        targets: Sequence[float] = DEFAULT_TARGETS) -> list[LossRatioRow]:
    """Quantiles of ERT_alg / ERT_ref over the (function, target) pairs the
    reference reaches within each budget, plus an unsuccessful-run-length row.

    ``reference`` maps ``(function_id, dim, target)`` to an ERT; by default it is
    the per-cell best among the variants in ``traces``.
    """
    ert = ert_table(traces, targets)
    if reference is None:
        reference = best_reference(ert)
    rows = []
    finest = min(targets)
    for (v, d), cell in sorted(_group(traces, lambda t: (t.variant, t.dim)).items()):
        functions = sorted({t.function_id for t in cell})
        for fes in fe_grid:
            ratios, missing = [], 0
            for f in functions:
                for target in targets:
                    ref = reference.get((f, d, target))
                    if ref is None:
                        missing += 1
                        continue
                    if not ref <= fes * d:
                        continue
                    ratios.append(ert[(v, f, d, target)].ert / ref)
            rows.append(_loss_row(v, d, fmt(fes), ratios, missing))
        unsuccessful = [t.evals_used / d for t in cell if first_hit(t, finest) is None]
        rows.append(_loss_row(v, d, "RL_US/D", unsuccessful, 0))
    return rows


def _loss_row(variant, dim, label, values, missing) -> LossRatioRow:
    stats = (min(values) if values else math.nan,) + tuple(quantile(values, q) for q in QUANTILES)
    return LossRatioRow(variant, dim, label, stats, len(values), missing)


def mean_traces(traces: Sequence[RunTrace], per_decade: int = 10) -> dict[str, list[tuple]]:
    """Per function: rows (variant, dim, evals, mean gap, median gap) on a log grid of evaluations."""
    out: dict[str, list[tuple]] = {}
    by_fd = _group(traces, lambda t: (t.function_id, t.dim))
    for (f, d), cell in sorted(by_fd.items()):
        top = max(t.evals_used for t in cell)
        grid = sorted({min(top, int(round(d * 10.0 ** (j / per_decade))))
                       for j in range(int(per_decade * math.log10(max(top / d, 1.0))) + 2)})
        rows = out.setdefault(f, [])
        for v, runs in sorted(_group(cell, lambda t: t.variant).items()):
            for e in grid:
                gaps = [_gap_at(t, e) for t in runs]
                gaps = [g for g in gaps if g is not None]
                if gaps:
                    rows.append((v, d, e, float(np.mean(gaps)), float(np.median(gaps))))
    for f in out:
        out[f].sort(key=lambda r: (r[0], r[1], r[2]))
    return out


def _gap_at(trace: RunTrace, evals: int) -> float | None:
    idx = int(np.searchsorted(np.asarray(trace.evals), evals, side="right")) - 1
    return None if idx < 0 else trace.best_f_gap[idx]


@dataclass
class Stats:
    ert: dict[tuple, ErtEstimate]
    ecdf: dict[tuple, EcdfCurve]
    loss_ratios: list[LossRatioRow]
    mean_traces: dict[str, list[tuple]]


def compute_stats(traces: Sequence[RunTrace], reference: dict[tuple, float] | None = None) -> Stats:
    traces = sorted(traces, key=RunTrace.key)
    grid = default_budget_grid(traces)
    ecdf = {
        key: compute_ecdf(cell, DEFAULT_TARGETS, grid)
        for key, cell in sorted(_group(traces, lambda t: (t.variant, t.dim)).items())
    }
    return Stats(
        ert=ert_table(traces),
        ecdf=ecdf,
        loss_ratios=compute_loss_ratios(traces, reference),
        mean_traces=mean_traces(traces),
    )


# ------------------------------------------------------------------- files

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([r if isinstance(r, str) else fmt(r) for r in row])
    return buf.getvalue()


def traces_csv(traces: Sequence[RunTrace]) -> str:
    rows = []
    for tr in sorted(traces, key=RunTrace.key):
        for e, g in zip(tr.evals, tr.best_f_gap):
            rows.append((tr.variant, tr.function_id, tr.dim, tr.rep, tr.seed, e, g))
    return _csv_text(TRACES_HEADER, rows)


def runs_csv(traces: Sequence[RunTrace]) -> str:
    rows = [(t.variant, t.function_id, t.dim, t.rep, t.seed, t.evals_used, t.pca_generations, t.diverged)
            for t in sorted(traces, key=RunTrace.key)]
    return _csv_text(RUNS_HEADER, rows)


def stats_files(stats: Stats) -> dict[str, str]:
    files = {}
    files["ert.csv"] = _csv_text(ERT_HEADER, [
        (v, f, d, target, e.successes, e.total_evals, e.ert)
        for (v, f, d, target), e in stats.ert.items()
    ])
    files["ecdf.csv"] = _csv_text(ECDF_HEADER, [
        (v, d, b, p) for (v, d), curve in stats.ecdf.items() for b, p in curve.points
    ])
    files["loss_ratios.csv"] = _csv_text(LOSS_HEADER, [
        (r.variant, r.dim, r.fes_per_dim) + r.values for r in stats.loss_ratios
    ])
    for f, rows in stats.mean_traces.items():
        files[f"mean_traces/{f}.csv"] = _csv_text(MEAN_TRACE_HEADER, rows)
    return files


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_files(out_dir: Path, files: dict[str, str]) -> None:
    """Write all files or none: on failure the files written so far are removed."""
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out_dir / name
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            written.append(path)
    except OSError as exc:
        for path in written:
            try:
                path.unlink()
            except OSError:
                pass
        raise ReportError(f"failed writing report to {out_dir}: {exc}") from exc


def write_report(traces: Sequence[RunTrace], stats: Stats, out_dir, config: ExperimentConfig | None = None,
                 include_traces: bool = True) -> dict[str, str]:
    """Write the report files and ``manifest.json``; returns the manifest (name -> sha256).

    The manifest covers every file of this report, including ones already in
    ``out_dir`` from an earlier write (e.g. traces written by a run, stats
    recomputed later).
    """
    out_dir = Path(out_dir)
    files: dict[str, str] = {}
    if include_traces:
        files["traces.csv"] = traces_csv(traces)
        files["runs.csv"] = runs_csv(traces)
    if config is not None:
        files["config.json"] = json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
    files.update(stats_files(stats))
    stale = out_dir / "mean_traces"
    if stale.is_dir():
        for p in stale.glob("*.csv"):
            if f"mean_traces/{p.name}" not in files:
                p.unlink()
    _write_files(out_dir, files)

    manifest = {}
    for name in _report_file_names(out_dir):
        manifest[name] = _digest((out_dir / name).read_bytes())
    text = json.dumps({"files": manifest}, indent=2, sort_keys=True) + "\n"
    _write_files(out_dir, {"manifest.json": text})
    return manifest


def _report_file_names(out_dir: Path) -> list[str]:
    names = [n for n in ("config.json", "traces.csv", "runs.csv", "ert.csv", "ecdf.csv", "loss_ratios.csv")
             if (out_dir / n).is_file()]
    names += sorted(f"mean_traces/{p.name}" for p in (out_dir / "mean_traces").glob("*.csv"))
    return names


def read_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def read_traces(path) -> list[RunTrace]:
    """Parse ``traces.csv``; raises MalformedTraces naming the offending line."""
    traces: dict[tuple, RunTrace] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedTraces("missing header", 1) from None
        if header != TRACES_HEADER:
            raise MalformedTraces(f"unexpected header {header}", 1)
        for line, row in enumerate(reader, start=2):
            if len(row) != len(TRACES_HEADER):
                raise MalformedTraces(f"expected {len(TRACES_HEADER)} fields, got {len(row)}", line)
            try:
                variant, fid = row[0], row[1]
                dim, rep, seed, evals = int(row[2]), int(row[3]), int(row[4]), int(row[5])
                gap = float(row[6])
            except ValueError as exc:
                raise MalformedTraces(str(exc), line) from None
            key = (variant, fid, dim, rep)
            tr = traces.get(key)
            if tr is None:
                tr = traces[key] = RunTrace(variant=variant, function_id=fid, dim=dim, rep=rep, seed=seed)
            elif tr.seed != seed:
                raise MalformedTraces("seed changes within a run", line)
            if tr.evals and evals <= tr.evals[-1]:
                raise MalformedTraces("evaluation counts must increase within a run", line)
            tr.evals.append(evals)
            tr.best_f_gap.append(gap)
    return sorted(traces.values(), key=RunTrace.key)


def summary_lines(traces: Sequence[RunTrace], target: float = 1e-8) -> list[str]:
    lines = []
    for (v, d), cell in sorted(_group(traces, lambda t: (t.variant, t.dim)).items()):
        solved = sum(first_hit(t, target) is not None for t in cell)
        med = quantile([t.final_gap for t in cell], 0.5)
        lines.append(f"{v:<11} dim={d:<3} runs={len(cell):<5} solved@{target:g}={solved:<4} "
                     f"median_final_gap={med:.3g}")
    return lines


def env_out_dir(default: str = "results") -> str:
    return os.environ.get("PCAES_OUT_DIR", default)
