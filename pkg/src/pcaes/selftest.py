"""Embedded oracle checks run by ``pcaes selftest``."""
from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from . import bench
from .es import RunTrace
from .numerics import eig_sym
from .pca import transform_covariance
from .strategy import VariantSpec


def double_sum_transform(p, c):
    """Literal ``C_new[i, j] = sum_a sum_b P[i, a] P[j, b] C[a, b]``."""
    k, n = len(p), len(p[0])
    out = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            s = 0.0
            for a in range(n):
                for b in range(n):
                    s += p[i][a] * p[j][b] * c[a][b]
            out[i][j] = s
    return np.array(out)


def random_orthonormal_rows(k: int, n: int, rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return q.T


def random_psd(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return a @ a.T / n


def _check_transform(transform) -> tuple[bool, str]:
    rng = np.random.default_rng(20240101)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 13))
        k = int(rng.integers(1, n))
        p = random_orthonormal_rows(k, n, rng)
        c = random_psd(n, rng)
        got = transform(c, p)
        want = double_sum_transform(p.tolist(), c.tolist())
        if got.shape != want.shape:
            return False, f"shape {got.shape} != {want.shape}"
        worst = max(worst, float(np.max(np.abs(got - want))))
    return worst <= 1e-12, f"max deviation {worst:.3g}"


def _check_worked_example(transform) -> tuple[bool, str]:
    p = np.array([[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
    c = np.array([[4.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    got = transform(c, p)
    return bool(got[0, 1] == -3.0), f"cov(y1, y2) = {got[0, 1]!r}"


def _strip_variant(text: str) -> list[str]:
    return [line.split(",", 1)[1] for line in text.splitlines()]


def _check_collapse() -> tuple[bool, str]:
    base = dict(function_ids=("sphere",), dims=(5,), reps=2, budget_multiplier=50, base_seed=3)

    def csv_for(spec):
        traces = bench.run_experiment(bench.ExperimentConfig(variants=(spec,), **base))
        return _strip_variant(bench.traces_csv(traces))

    same0 = csv_for(VariantSpec("pca-random", rho=0.0)) == csv_for(VariantSpec("plain"))
    same1 = csv_for(VariantSpec("pca-random", rho=1.0)) == csv_for(VariantSpec("pca"))
    return same0 and same1, f"rho=0~plain {same0}, rho=1~pca {same1}"


def _trace(evals, gaps, dim=10) -> RunTrace:
    return RunTrace(evals=list(evals), best_f_gap=list(gaps), dim=dim)


def _check_ert() -> tuple[bool, str]:
    cell = [_trace([1, 100], [5.0, 0.0]), _trace([1, 200], [5.0, 0.0]), _trace([1, 500], [5.0, 4.0])]
    est = bench.compute_ert(cell, 1e-8)
    none = bench.compute_ert([_trace([1, 500], [5.0, 4.0])], 1e-8)
    ok = est.ert == 400.0 and math.isinf(none.ert) and none.successes == 0
    return ok, f"ert={est.ert}, no-success ert={none.ert}"


def _check_ecdf() -> tuple[bool, str]:
    a = _trace([10, 30], [0.5, 0.05])
    b = _trace([1, 100], [7.0, 7.0])
    curve = bench.compute_ecdf([a, b], targets=(1.0, 0.1), budget_grid=(1.0, 3.0, 50.0))
    props = [p for _, p in curve.points]
    return props == [0.25, 0.5, 0.5], f"proportions {props}"


def _check_eig() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    m = random_psd(25, rng)
    e = eig_sym(m)
    err = float(np.max(np.abs(e.basis @ np.diag(e.values) @ e.basis.T - m)))
    orth = float(np.max(np.abs(e.basis.T @ e.basis - np.eye(25))))
    return err < 1e-9 and orth < 1e-10, f"reconstruction {err:.3g}, orthogonality {orth:.3g}"


def run_selftest(transform: Callable = transform_covariance) -> list[tuple[str, bool, str]]:
    """Run every check; ``transform`` can be swapped to exercise the negative control."""
    checks = [
        ("covariance-transform double sum", lambda: _check_transform(transform)),
        ("covariance-transform worked 3->2 example", lambda: _check_worked_example(transform)),
        ("variant collapse", _check_collapse),
        ("ERT fixtures", _check_ert),
        ("ECDF fixture", _check_ecdf),
        ("symmetric eigensolver", _check_eig),
    ]
    results = []
    for name, check in checks:
        start = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), f"{detail} ({time.perf_counter() - start:.2f}s)"))
    return results
