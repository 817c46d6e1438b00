"""The three optimizer variants: plain CMA-ES, PCA in every generation, and PCA
behind a random gate.

In a PCA generation the previous elites are fitted with PCA, the search
covariance is transformed into the reduced space, displacements are drawn
there and lifted back with ``P^T`` before the usual full-dimensional updates.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import es
from .errors import DegenerateData, DimensionTooSmallForPca
from .es import EsParams, EsState, GenerationLog, RunTrace
from .numerics import RngStream, sample_mvn
from .pca import fit_pca, lift_displacement, transform_covariance


class Kind(str, Enum):
    PLAIN = "plain"
    ALWAYS_PCA = "pca"
    RANDOM_PCA = "pca-random"


@dataclass(frozen=True)
class VariantSpec:
    kind: Kind = Kind.PLAIN
    rho: float = 0.5
    pca_k: int | None = None
    pca_tau: float | None = None
    theta: int | None = None  # reduced-space sample count, defaults to Lambda
    window: int = 1  # number of recent elite sets the PCA is fitted on

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} not in [0, 1]")
        if self.pca_k is not None and self.pca_tau is not None:
            raise ValueError("pca_k and pca_tau are mutually exclusive")
        if self.pca_k is not None and self.pca_k < 1:
            raise ValueError("pca_k must be >= 1")
        if self.pca_tau is not None and not 0.0 < self.pca_tau <= 1.0:
            raise ValueError("pca_tau must be in (0, 1]")
        if self.theta is not None and self.theta < 1:
            raise ValueError("theta must be positive")
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def name(self) -> str:
        return self.kind.value

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "rho": self.rho, "pca_k": self.pca_k,
                "pca_tau": self.pca_tau, "theta": self.theta, "window": self.window}

    @classmethod
    def from_dict(cls, d: dict) -> "VariantSpec":
        return cls(**d)


def _reduced_displacements(state: EsState, spec: VariantSpec, count: int,
                           rng: np.random.Generator, points: np.ndarray):
    """PCA sampling: returns ``(ys, k)``; raises DegenerateData when PCA cannot be fitted."""
    pmap = fit_pca(points, k=spec.pca_k, tau=spec.pca_tau)
    c_reduced = transform_covariance(state.cov, pmap)
    y_reduced = sample_mvn(np.zeros(pmap.k), 1.0, c_reduced, count, rng)
    return lift_displacement(y_reduced, pmap), pmap.k


def _theta(params: EsParams, spec: VariantSpec) -> int:
    theta = params.lambda_sample if spec.theta is None else spec.theta
    if theta < params.lambda_elite:
        raise ValueError(f"theta={theta} is below lambda_elite={params.lambda_elite}")
    return theta


def _pca_or_plain(state, params, spec, remaining, rng, points):
    if points is not None and state.dim >= 3:
        try:
            ys, k = _reduced_displacements(state, spec, min(_theta(params, spec), remaining), rng, points)
            return ys, True, k
        except (DegenerateData, DimensionTooSmallForPca):
            pass
    return es.draw_displacements(state, min(params.lambda_sample, remaining), rng), False, None


def _finish(state, params, pop, used_pca, k, t):
    log = GenerationLog(t=t, used_pca=used_pca, k=k, evals=len(pop),
                        best_f=min((c.f for c in pop), default=float("inf")))
    es.tell(state, params, pop)
    return state, log


def pca_step(state: EsState, params: EsParams, spec: VariantSpec, objective,
             rng: np.random.Generator) -> tuple[EsState, GenerationLog]:
    """One PCA generation fitted on ``state.last_elites``; falls back to plain
    sampling when there are no elites, ``n < 3`` or the elites are degenerate."""
    t = state.t
    ys, used, k = _pca_or_plain(state, params, spec, params.budget - state.evals_used, rng,
                                state.last_elites)
    pop = es.evaluate_displacements(state, ys, objective)
    return _finish(state, params, pop, used, k, t)


def gated_step(state: EsState, params: EsParams, spec: VariantSpec, objective,
               rng: np.random.Generator, gate: np.random.Generator) -> tuple[EsState, GenerationLog]:
    if spec.kind is not Kind.RANDOM_PCA:
        raise ValueError("gated_step needs a pca-random variant")
    if gate.random() < spec.rho:
        return pca_step(state, params, spec, objective, rng)
    t = state.t
    ys = es.draw_displacements(state, min(params.lambda_sample, params.budget - state.evals_used), rng)
    pop = es.evaluate_displacements(state, ys, objective)
    return _finish(state, params, pop, False, None, t)


def variant_proposal(params: EsParams, spec: VariantSpec, rng: RngStream, n: int) -> es.Proposal:
    """Per-generation sampler for ``run_loop``. The gate has its own stream so
    the sampling draws do not depend on how often it fires."""
    gate = rng.child("gate").generator()
    history: deque = deque(maxlen=spec.window)
    seen = {"t": -1}

    def propose(state, remaining, sampler):
        if state.last_elites is not None and state.t != seen["t"]:
            history.append(state.last_elites)
            seen["t"] = state.t
        use = spec.kind is not Kind.PLAIN and n >= 3 and state.t > 0 and len(history) > 0
        if use and spec.kind is Kind.RANDOM_PCA:
            use = gate.random() < spec.rho
        points = np.vstack(history) if use else None
        return _pca_or_plain(state, params, spec, remaining, sampler, points)

    return propose


def run_variant(problem, params: EsParams, spec: VariantSpec,
                rng: RngStream) -> tuple[EsState, RunTrace, list[GenerationLog]]:
    if spec.kind is not Kind.PLAIN:
        _theta(params, spec)
    state, trace, logs = es.run_loop(
        problem, params, rng, lambda r: variant_proposal(params, spec, r, problem.dim)
    )
    trace.variant = spec.name
    return state, trace, logs
