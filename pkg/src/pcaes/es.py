"""CMA-ES engine with uniform elite weights.

One generation is: sample Lambda displacements ``y ~ N(0, C)``, evaluate
``x = mean + sigma * y``, keep the ``lambda`` best, then update in this order:
mean, step-size path, step size, covariance path, covariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionTooSmall
from .numerics import RngStream, inv_sqrt, sample_mvn, symmetrize

SIGMA_MIN = 1e-300
SIGMA_MAX = 1e300
START_BOX = 4.0


@dataclass(frozen=True)
class EsParams:
    lambda_sample: int
    lambda_elite: int
    alpha_mu: float
    alpha_sigma: float
    alpha_cp: float
    alpha_c1: float
    alpha_clambda: float
    d_sigma: float
    sigma0: float
    budget: int
    target_gap: float | None = 1e-8

    def __post_init__(self):
        if not 1 <= self.lambda_elite <= self.lambda_sample:
            raise ValueError("need 1 <= lambda_elite <= lambda_sample")
        for name in ("alpha_mu", "alpha_sigma", "alpha_cp", "alpha_c1", "alpha_clambda"):
            rate = getattr(self, name)
            if name in ("alpha_c1", "alpha_clambda"):
                ok = 0.0 <= rate <= 1.0
            else:
                ok = 0.0 < rate <= 1.0
            if not ok:
                raise ValueError(f"{name}={rate} out of range")
        if self.alpha_c1 + self.alpha_clambda > 1.0 + 1e-15:
            raise ValueError("alpha_c1 + alpha_clambda must not exceed 1")
        if self.d_sigma <= 0 or self.sigma0 <= 0 or self.budget < 1:
            raise ValueError("d_sigma, sigma0 and budget must be positive")

    @classmethod
    def default(cls, n: int, budget: int, sigma0: float = 2.0, **overrides) -> "EsParams":
        """Standard CMA-ES population sizes and rates for dimension ``n``."""
        lam_sample = 4 + int(math.floor(3 * math.log(n)))
        lam = lam_sample // 2
        alpha_sigma = min(1.0, (lam + 2) / (n + lam + 5))
        alpha_c1 = 2.0 / ((n + 1.3) ** 2 + lam)
        values = dict(
            lambda_sample=lam_sample,
            lambda_elite=lam,
            alpha_mu=1.0,
            alpha_sigma=alpha_sigma,
            alpha_cp=4.0 / (n + 4),
            alpha_c1=alpha_c1,
            alpha_clambda=min(1.0 - alpha_c1, lam / n ** 2),
            d_sigma=1.0 + alpha_sigma,
            sigma0=sigma0,
            budget=budget,
        )
        values.update(overrides)
        return cls(**values)


@dataclass
class EsState:
    mean: np.ndarray
    sigma: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    t: int = 0
    evals_used: int = 0
    best_x: np.ndarray | None = None
    best_f: float = math.inf
    diverged: bool = False
    last_elites: np.ndarray | None = None  # x of the most recent elite set

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def copy(self) -> "EsState":
        return EsState(
            mean=self.mean.copy(), sigma=self.sigma, cov=self.cov.copy(),
            p_sigma=self.p_sigma.copy(), p_c=self.p_c.copy(), t=self.t,
            evals_used=self.evals_used,
            best_x=None if self.best_x is None else self.best_x.copy(),
            best_f=self.best_f, diverged=self.diverged,
            last_elites=None if self.last_elites is None else self.last_elites.copy(),
        )


@dataclass
class ScoredCandidate:
    x: np.ndarray
    y: np.ndarray
    f: float


@dataclass
class GenerationLog:
    t: int
    used_pca: bool
    k: int | None
    evals: int
    best_f: float


@dataclass
class RunTrace:
    """Best-so-far history: ``evals[i]`` evaluations reached gap ``best_f_gap[i]``.

    A point is appended at the first evaluation, at every strict improvement
    and once more at the final evaluation count.
    """

    evals: list[int] = field(default_factory=list)
    best_f_gap: list[float] = field(default_factory=list)
    variant: str = ""
    function_id: str = ""
    dim: int = 0
    rep: int = 0
    seed: int = 0
    diverged: bool = False
    pca_generations: int = 0

    def record(self, evals: int, gap: float) -> None:
        if not self.best_f_gap or gap < self.best_f_gap[-1]:
            self.evals.append(evals)
            self.best_f_gap.append(gap)

    def finalize(self, evals_used: int) -> None:
        if self.evals and self.evals[-1] != evals_used:
            self.evals.append(evals_used)
            self.best_f_gap.append(self.best_f_gap[-1])

    @property
    def evals_used(self) -> int:
        return self.evals[-1] if self.evals else 0

    @property
    def final_gap(self) -> float:
        return self.best_f_gap[-1] if self.best_f_gap else math.inf

    def key(self) -> tuple:
        return (self.variant, self.function_id, self.dim, self.rep)


def expected_norm(n: int) -> float:
    """Approximation of E||N(0, I_n)||."""
    return math.sqrt(n) * (1.0 - 1.0 / (4 * n) + 1.0 / (21 * n * n))


def init(n: int, params: EsParams, start_mean) -> EsState:
    if n < 2:
        raise DimensionTooSmall(f"dimension {n} < 2")
    start_mean = np.array(start_mean, dtype=float)
    if start_mean.shape != (n,):
        raise ValueError(f"start mean has shape {start_mean.shape}, expected ({n},)")
    return EsState(
        mean=start_mean,
        sigma=float(params.sigma0),
        cov=np.eye(n),
        p_sigma=np.zeros(n),
        p_c=np.zeros(n),
    )


def _safe_eval(objective: Callable, x: np.ndarray) -> float:
    if not np.all(np.isfinite(x)):
        return math.inf
    f = float(objective(x))
    return math.inf if math.isnan(f) else f


def evaluate_displacements(state: EsState, ys: np.ndarray, objective: Callable) -> list[ScoredCandidate]:
    """Evaluate ``x = mean + sigma * y`` for each row of ``ys``; updates evals and best-seen."""
    pop = []
    for y in ys:
        x = state.mean + state.sigma * y
        f = _safe_eval(objective, x)
        pop.append(ScoredCandidate(x=x, y=y, f=f))
        if f < state.best_f:
            state.best_f = f
            state.best_x = x.copy()
    state.evals_used += len(pop)
    return pop


def draw_displacements(state: EsState, count: int, rng: np.random.Generator) -> np.ndarray:
    if count <= 0:
        return np.empty((0, state.dim))
    return sample_mvn(np.zeros(state.dim), 1.0, state.cov, count, rng)


def sample_generation(state: EsState, params: EsParams, objective: Callable,
                      rng: np.random.Generator) -> list[ScoredCandidate]:
    """Draw and evaluate one generation, truncated to the remaining budget."""
    ys = draw_displacements(state, min(params.lambda_sample, params.budget - state.evals_used), rng)
    return evaluate_displacements(state, ys, objective)


def select_elites(pop: list[ScoredCandidate], lambda_elite: int) -> list[ScoredCandidate]:
    # sorted() is stable, so ties keep sampling order
    return sorted(pop, key=lambda c: c.f)[:lambda_elite]


def update_mean(state: EsState, elites: list[ScoredCandidate], params: EsParams) -> np.ndarray:
    steps = np.array([c.x for c in elites]) - state.mean
    return state.mean + params.alpha_mu * steps.sum(axis=0) / len(elites)


def update_sigma(state: EsState, params: EsParams, new_mean: np.ndarray) -> tuple[np.ndarray, float]:
    a = params.alpha_sigma
    lam = params.lambda_elite
    shift = (new_mean - state.mean) / state.sigma
    p_sigma = (1 - a) * state.p_sigma + math.sqrt(a * (2 - a) * lam) * (inv_sqrt(state.cov) @ shift)
    exponent = (a / params.d_sigma) * (np.linalg.norm(p_sigma) / expected_norm(state.dim) - 1.0)
    try:
        sigma = state.sigma * math.exp(exponent)
    except OverflowError:
        sigma = math.inf
    return p_sigma, sigma


def update_cov(state: EsState, params: EsParams, new_mean: np.ndarray,
               elite_ys) -> tuple[np.ndarray, np.ndarray]:
    a_cp, a_c1, a_cl = params.alpha_cp, params.alpha_c1, params.alpha_clambda
    lam = params.lambda_elite
    shift = (new_mean - state.mean) / state.sigma
    p_c = (1 - a_cp) * state.p_c + math.sqrt(a_cp * (2 - a_cp) * lam) * shift
    ys = np.asarray(elite_ys, dtype=float)
    rank_mu = ys.T @ ys / len(ys)
    cov = (1 - a_c1 - a_cl) * state.cov + a_c1 * np.outer(p_c, p_c) + a_cl * rank_mu
    return p_c, symmetrize(cov)


def tell(state: EsState, params: EsParams, pop: list[ScoredCandidate]) -> bool:
    """Apply selection and all updates in place. Returns False when too few candidates were scored."""
    if len(pop) < params.lambda_elite:
        return False
    elites = select_elites(pop, params.lambda_elite)
    new_mean = update_mean(state, elites, params)
    p_sigma, sigma = update_sigma(state, params, new_mean)
    p_c, cov = update_cov(state, params, new_mean, [c.y for c in elites])
    state.mean, state.p_sigma, state.sigma, state.p_c, state.cov = new_mean, p_sigma, sigma, p_c, cov
    state.last_elites = np.array([c.x for c in elites])
    state.t += 1
    if not (SIGMA_MIN <= sigma <= SIGMA_MAX):
        state.diverged = True
    return True


# A proposal draws the displacements for one generation:
# propose(state, remaining_budget, sampler) -> (ys, used_pca, k)
Proposal = Callable[[EsState, int, np.random.Generator], tuple[np.ndarray, bool, "int | None"]]


def plain_proposal(params: EsParams) -> Proposal:
    def propose(state, remaining, sampler):
        return draw_displacements(state, min(params.lambda_sample, remaining), sampler), False, None
    return propose


def run_loop(problem, params: EsParams, rng: RngStream,
             make_proposal: Callable[[RngStream], Proposal]) -> tuple[EsState, RunTrace, list[GenerationLog]]:
    """Drive generations until the budget is spent, the target is hit or sigma leaves its range.

    ``problem`` needs ``dim``, ``f_opt`` (or None) and ``__call__``. The start
    mean is uniform in [-4, 4]^n from the ``init`` child stream; candidates
    come from the ``sample`` child stream.
    """
    n = problem.dim
    start = rng.child("init").generator().uniform(-START_BOX, START_BOX, n)
    state = init(n, params, start)
    sampler = rng.child("sample").generator()
    propose = make_proposal(rng)
    f_opt = getattr(problem, "f_opt", None)
    offset = 0.0 if f_opt is None else f_opt
    trace = RunTrace(dim=n, seed=rng.seed)
    logs: list[GenerationLog] = []

    while state.evals_used < params.budget:
        before = state.evals_used
        ys, used_pca, k = propose(state, params.budget - before, sampler)
        pop = evaluate_displacements(state, ys, problem)
        for i, cand in enumerate(pop):
            trace.record(before + i + 1, cand.f - offset)
        logs.append(GenerationLog(
            t=state.t, used_pca=used_pca, k=k, evals=len(pop),
            best_f=min((c.f for c in pop), default=math.inf),
        ))
        trace.pca_generations += int(used_pca)
        if not tell(state, params, pop):
            break
        if state.diverged:
            break
        if (params.target_gap is not None and f_opt is not None
                and state.best_f - f_opt <= params.target_gap):
            break

    trace.finalize(state.evals_used)
    trace.diverged = state.diverged
    return state, trace, logs


def run(problem, params: EsParams, rng: RngStream) -> tuple[EsState, RunTrace]:
    """Plain CMA-ES on ``problem``."""
    state, trace, _ = run_loop(problem, params, rng, lambda _rng: plain_proposal(params))
    return state, trace
