import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pcaes import bench
from pcaes.bench import ExperimentConfig, compute_ecdf, compute_ert, compute_loss_ratios, quantile
from pcaes.errors import EmptyCell, ReportError
from pcaes.es import RunTrace
from pcaes.strategy import VariantSpec


def tr(evals, gaps, dim=10, variant="v", fid="f", rep=0):
    return RunTrace(evals=list(evals), best_f_gap=list(gaps), dim=dim, variant=variant, function_id=fid, rep=rep)


SMALL = dict(function_ids=("sphere", "rastrigin-rotated"), dims=(3, 5), reps=2, budget_multiplier=40)


def test_ert_fixture():
    cell = [tr([1, 100], [5, 0]), tr([1, 200], [5, 0]), tr([1, 500], [5, 4])]
    est = compute_ert(cell, 1e-8)
    assert est.ert == 400.0 and est.total_evals == 800 and est.successes == 2


def test_ert_all_hit_same():
    assert compute_ert([tr([50], [0.0]), tr([50], [0.0])], 1e-8).ert == 50.0


def test_ert_no_success():
    est = compute_ert([tr([1, 500], [5, 4])], 1e-8)
    assert math.isinf(est.ert) and est.successes == 0


def test_ert_empty():
    with pytest.raises(EmptyCell):
        compute_ert([], 1.0)


@given(st.integers(1, 10_000), st.integers(1, 20))
def test_ert_self_consistency(e, count):
    assert compute_ert([tr([e], [0.0]) for _ in range(count)], 1e-8).ert == e


def test_ecdf_fixture():
    a = tr([10, 30], [0.5, 0.05])
    b = tr([1, 100], [7.0, 7.0])
    curve = compute_ecdf([a, b], targets=(1.0, 0.1), budget_grid=(1.0, 3.0, 50.0))
    assert [p for _, p in curve.points] == [0.25, 0.5, 0.5]


def test_ecdf_extremes():
    solved = compute_ecdf([tr([1], [0.0])], budget_grid=(1.0, 10.0))
    assert [p for _, p in solved.points] == [1.0, 1.0]
    none = compute_ecdf([tr([1, 100], [1e9, 1e9])], budget_grid=(1.0, 10.0, 100.0))
    assert [p for _, p in none.points] == [0.0, 0.0, 0.0]


def test_ecdf_monotone_on_real_runs():
    traces = bench.run_experiment(ExperimentConfig(**SMALL))
    for curve in bench.compute_stats(traces).ecdf.values():
        props = [p for _, p in curve.points]
        assert all(b >= a for a, b in zip(props, props[1:]))


def test_quantile_convention():
    assert quantile([1, 2, 3, 4], 0.5) == 2.5
    assert quantile([4, 1, 3, 2], 0.0) == 1 and quantile([1, 2, 3, 4], 1.0) == 4
    assert quantile([1.0, math.inf], 0.5) == math.inf
    assert quantile([math.inf, math.inf], 0.3) == math.inf
    assert math.isnan(quantile([], 0.5))


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30), st.floats(0, 1))
def test_quantile_matches_numpy(xs, q):
    assert quantile(xs, q) == pytest.approx(float(np.quantile(xs, q)), rel=1e-9, abs=1e-9)


def test_loss_ratio_fixture():
    traces = [tr([100], [0.0], fid="f1"), tr([50], [0.0], fid="f2")]
    ref = {("f1", 10, 1e-8): 50.0, ("f2", 10, 1e-8): 50.0}
    rows = compute_loss_ratios(traces, ref, fe_grid=(1e4,), targets=(1e-8,))
    row = rows[0]
    assert row.count == 2 and row.values[0] == 1.0 and row.values[3] == 1.5
    assert rows[-1].fes_per_dim == "RL_US/D" and rows[-1].count == 0


def test_loss_ratio_missing_reference_counted():
    traces = [tr([100], [0.0], fid="f1"), tr([50], [0.0], fid="f2")]
    rows = compute_loss_ratios(traces, {("f1", 10, 1e-8): 50.0}, fe_grid=(1e4,), targets=(1e-8,))
    assert rows[0].count == 1 and rows[0].missing_reference == 1


def test_loss_ratio_self_reference_all_one():
    traces = bench.run_experiment(ExperimentConfig(variants=(VariantSpec("plain"),), **SMALL))
    for row in compute_loss_ratios(traces):
        if row.fes_per_dim != "RL_US/D" and row.count:
            assert all(v == 1.0 for v in row.values)


def test_loss_ratio_best_reference_minimum_is_one():
    traces = bench.run_experiment(ExperimentConfig(**SMALL))
    ert = bench.ert_table(traces)
    ref = bench.best_reference(ert)
    for (v, f, d, t), est in ert.items():
        assert est.ert >= ref[(f, d, t)]
    for key, value in ref.items():
        if math.isfinite(value):
            assert min(est.ert / value for (v, f, d, t), est in ert.items() if (f, d, t) == key) == 1.0


def test_trace_count_and_order():
    cfg = ExperimentConfig(variants=(VariantSpec("plain"),), function_ids=("sphere",), dims=(10,), reps=2)
    traces = bench.run_experiment(cfg)
    assert len(traces) == 2 and [t.rep for t in traces] == [0, 1]


def test_seed_shared_across_variants():
    assert bench.run_seed(0, "sphere", 5, 1) == bench.run_seed(0, "sphere", 5, 1)
    assert bench.run_seed(0, "sphere", 5, 1) != bench.run_seed(0, "sphere", 5, 2)
    assert bench.run_seed(0, "sphere", 5, 1) != bench.run_seed(1, "sphere", 5, 1)


@pytest.mark.slow
def test_worker_count_independence():
    a = bench.run_experiment(ExperimentConfig(**SMALL, workers=1))
    b = bench.run_experiment(ExperimentConfig(**SMALL, workers=3))
    assert bench.traces_csv(a) == bench.traces_csv(b)


def test_traces_invariants():
    traces = bench.run_experiment(ExperimentConfig(**SMALL))
    assert len(traces) == 3 * 2 * 2 * 2
    for t in traces:
        assert all(b > a for a, b in zip(t.evals, t.evals[1:]))
        assert all(b <= a for a, b in zip(t.best_f_gap, t.best_f_gap[1:]))
        assert t.evals_used <= 40 * t.dim


def test_config_validation_and_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(reps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(dims=(1,))
    cfg = ExperimentConfig(variants=(VariantSpec("pca-random", rho=0.3, pca_k=2),), function_ids=("sphere",),
                           dims=(4,), reps=1, budget_multiplier=10, base_seed=2 ** 63, workers=4)
    traces = bench.run_experiment(cfg)
    bench.write_report(traces, bench.compute_stats(traces), tmp_path, config=cfg)
    back = bench.read_config(tmp_path / "config.json")
    assert back == cfg
    assert "workers" not in json.loads((tmp_path / "config.json").read_text())
    rerun = bench.run_experiment(back)
    assert bench.traces_csv(rerun) == (tmp_path / "traces.csv").read_bytes().decode()


def test_report_manifest(tmp_path):
    cfg = ExperimentConfig(**SMALL)
    traces = bench.run_experiment(cfg)
    manifest = bench.write_report(traces, bench.compute_stats(traces), tmp_path, config=cfg)
    on_disk = json.loads((tmp_path / "manifest.json").read_text())["files"]
    assert on_disk == manifest
    for name in ("config.json", "traces.csv", "ert.csv", "ecdf.csv", "loss_ratios.csv",
                 "mean_traces/sphere.csv", "mean_traces/rastrigin-rotated.csv"):
        assert name in manifest
    import hashlib
    for name, digest in manifest.items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


def test_report_headers(tmp_path):
    bench.write_report([], bench.compute_stats([]), tmp_path)
    assert (tmp_path / "traces.csv").read_bytes().decode() == ",".join(bench.TRACES_HEADER) + "\r\n"
    assert (tmp_path / "ert.csv").read_bytes().decode() == ",".join(bench.ERT_HEADER) + "\r\n"
    assert (tmp_path / "ecdf.csv").read_bytes().decode() == ",".join(bench.ECDF_HEADER) + "\r\n"
    assert (tmp_path / "loss_ratios.csv").read_bytes().decode() == ",".join(bench.LOSS_HEADER) + "\r\n"
    assert json.loads((tmp_path / "manifest.json").read_text())["files"]


def test_report_write_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportError):
        bench.write_report([], bench.compute_stats([]), blocker / "sub")


def test_report_rollback(tmp_path, monkeypatch):
    real_open = open
    calls = {"n": 0}

    def flaky(path, *a, **k):
        if str(path).endswith("ecdf.csv"):
            raise OSError("disk full")
        calls["n"] += 1
        return real_open(path, *a, **k)

    monkeypatch.setattr("builtins.open", flaky)
    with pytest.raises(ReportError):
        bench.write_report([tr([1], [1.0])], bench.compute_stats([tr([1], [1.0])]), tmp_path)
    monkeypatch.undo()
    assert calls["n"] > 0
    assert not list(tmp_path.glob("*.csv")) and not (tmp_path / "manifest.json").exists()


def test_read_traces_roundtrip(tmp_path):
    traces = bench.run_experiment(ExperimentConfig(**SMALL))
    (tmp_path / "t.csv").write_text(bench.traces_csv(traces), newline="")
    back = bench.read_traces(tmp_path / "t.csv")
    assert bench.traces_csv(back) == bench.traces_csv(traces)


def test_float_format_is_exact():
    x = 0.1 + 0.2
    assert float(bench.fmt(x)) == x
    assert bench.fmt(math.inf) == "inf"
