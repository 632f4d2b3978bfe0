"""The optimization loop: LHS bootstrap, iterative selection, simulated job
execution with timeout policies (including the truncated-Gaussian feedback),
budget accounting, stopping, and the final recommendation. Also hosts the
random and greedy-BO baselines.

A run is cancelled once its spend reaches the cost of the best feasible
configuration found so far, i.e. at wall-clock time t = C(x*) / U(x); what the
model is then told about the cancelled configuration depends on the policy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtri
from scipy.stats import norm

from . import regressor, seeds
from .acquisition import ei_constrained_at, incumbent
from .oracle import Dataset
from .planner import PlanContext, PlannerConfig, PlanState, next_config
from .space import ConfigSpace, Configuration


class TimeoutPolicy(str, Enum):
    TRUNCATED_GAUSSIAN = "tg"
    NO_INFO_2X = "no-info-2x"
    IDEAL = "ideal"
    MAX_COST = "max-cost"
    NONE = "none"
    LINEAR = "linear"


@dataclass(frozen=True)
class RunOutcome:
    config_index: int
    spent_cost: float
    observed_cost: float | None  # None only for NO_INFO_2X timeouts
    runtime: float | None
    runtime_known: bool
    feasible: bool
    timed_out: bool


@dataclass(frozen=True)
class TrajectoryStep:
    phase: str  # "bootstrap" or "explore"
    iteration: int
    config_index: int
    spent_cost: float
    observed_cost: float | None
    timed_out: bool
    budget_after: float
    best_feasible_cost: float | None
    cno: float | None


@dataclass
class OptimizerState:
    """State maintained across iterations: training set S (with annotations),
    untested pool T, remaining budget beta, and the currently deployed config."""

    entry_idx: list
    entry_cost: list
    entry_eligible: list  # fully run, finished, runtime within constraint
    entry_timed_out: list
    untested: np.ndarray
    budget: float
    beta: float
    spends: list
    chi: int | None = None

    @classmethod
    def fresh(cls, space: ConfigSpace, budget: float) -> "OptimizerState":
        return cls([], [], [], [], np.arange(space.cardinality, dtype=np.int64),
                   budget, budget, [])

    def apply(self, outcome: RunOutcome) -> None:
        self.spends.append(outcome.spent_cost)
        self.beta = self.budget - math.fsum(self.spends)
        pos = int(np.searchsorted(self.untested, outcome.config_index))
        self.untested = np.delete(self.untested, pos)
        self.chi = outcome.config_index
        if outcome.observed_cost is not None:
            self.entry_idx.append(outcome.config_index)
            self.entry_cost.append(outcome.observed_cost)
            self.entry_eligible.append(outcome.feasible and not outcome.timed_out)
            self.entry_timed_out.append(outcome.timed_out)

    def incumbent_cost(self) -> float | None:
        eligible = [c for c, ok in zip(self.entry_cost, self.entry_eligible) if ok]
        return min(eligible) if eligible else None

    def plan_state(self) -> PlanState:
        return PlanState(
            train_idx=np.array(self.entry_idx, dtype=np.int64),
            train_y=np.array(self.entry_cost, dtype=np.float64),
            untested=self.untested,
            beta=self.beta,
            best_eligible_cost=self.incumbent_cost(),
            max_train_cost=max(self.entry_cost) if self.entry_cost else 0.0,
        )


@dataclass(frozen=True)
class OptimizeResult:
    status: str  # "ok" or "no-feasible"
    recommendation: int | None
    recommendation_cost: float | None
    recommendation_runtime: float | None
    total_spent: float
    trajectory: tuple
    n_explored: int


def default_bootstrap_count(space: ConfigSpace) -> int:
    """max(ceil(3% of the cardinality), number of dimensions)."""
    return max(math.ceil(0.03 * space.cardinality), space.n_dims)


def lhs_bootstrap(space: ConfigSpace, n: int, seed: int) -> list[Configuration]:
    """Latin hypercube sample of n distinct configurations.

    Per dimension the n samples are spread over n equal strata of the level
    range (stratum centers mapped to the nearest discrete level) and then
    randomly permuted; colliding tuples are re-drawn.
    """
    if n > space.cardinality:
        raise ValueError(f"cannot draw {n} distinct configs from {space.cardinality}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    cols = []
    for dim in space.dimensions:
        size = dim.n_levels
        strata = np.minimum(((np.arange(n) + 0.5) * size / n).astype(np.int64), size - 1)
        cols.append(rng.permutation(strata))
    levels = np.stack(cols, axis=1)
    chosen: list[int] = []
    seen = set()
    for s in range(n):
        cfg = space.encode(levels[s])
        attempts = 0
        while cfg.index in seen:
            attempts += 1
            if attempts > 10000:
                # fall back to the first unused index (n <= cardinality guarantees one)
                free = next(i for i in range(space.cardinality) if i not in seen)
                cfg = space.decode(free)
                break
            redraw = [int(rng.integers(0, dim.n_levels)) for dim in space.dimensions]
            cfg = space.encode(redraw)
        seen.add(cfg.index)
        chosen.append(cfg.index)
    return [space.decode(i) for i in chosen]


def truncated_gaussian_mean(mu: float, sigma: float, cutoff: float) -> float:
    """E[c | c > cutoff] for c ~ N(mu, sigma^2): mu + sigma * pdf(a)/(1 - cdf(a)).

    Computed via log-pdf/log-sf for numerical stability far in the tail; the
    result is strictly greater than the cutoff by construction.
    """
    alpha = (cutoff - mu) / sigma
    lam = math.exp(norm.logpdf(alpha) - norm.logsf(alpha))
    est = mu + sigma * lam
    return max(est, math.nextafter(cutoff, math.inf))


def run_with_timeout(dataset: Dataset, x_idx: int, policy: TimeoutPolicy,
                     incumbent_cost: float | None, model, t_max: float,
                     max_cost_seen: float | None = None) -> RunOutcome:
    """Simulate running configuration x under the given timeout policy.

    Timeouts are armed only when a feasible incumbent exists; until then (and
    under the NONE policy) the job runs to completion.
    """
    x = dataset.space.decode(x_idx)
    runtime, price, cost, finished = dataset.query(x)
    feasible = finished and runtime <= t_max

    armed = policy != TimeoutPolicy.NONE and incumbent_cost is not None
    if not armed:
        return RunOutcome(x_idx, cost, cost, runtime, True, feasible, False)

    cstar = incumbent_cost
    if policy == TimeoutPolicy.NO_INFO_2X:
        if cost > 2.0 * cstar:
            return RunOutcome(x_idx, 2.0 * cstar, None, None, False, False, True)
        return RunOutcome(x_idx, cost, cost, runtime, True, feasible, False)

    if cost <= cstar:
        return RunOutcome(x_idx, cost, cost, runtime, True, feasible, False)

    # cancelled at t = C(x*)/U(x); spend equals the incumbent cost exactly
    t_cut = cstar / price
    if policy == TimeoutPolicy.TRUNCATED_GAUSSIAN:
        mu, sd = model.predict_rows(np.array([x_idx]))
        estimate = truncated_gaussian_mean(float(mu[0]), float(sd[0]), cstar)
    elif policy == TimeoutPolicy.IDEAL:
        estimate = cost
    elif policy == TimeoutPolicy.MAX_COST:
        if max_cost_seen is None:
            raise ValueError("max-cost policy needs the highest cost seen so far")
        estimate = max_cost_seen
    elif policy == TimeoutPolicy.LINEAR:
        _, prog = dataset.query_partial(x, t_cut)
        if prog is None:
            raise ValueError("linear policy needs progress curves in the dataset")
        estimate = (t_cut / max(prog, 1e-9)) * price
    else:
        raise ValueError(f"unhandled policy {policy}")
    return RunOutcome(x_idx, cstar, estimate, None, False, False, True)


def _record_step(state: OptimizerState, outcome: RunOutcome, phase: str,
                 iteration: int, opt_cost: float, trajectory: list) -> None:
    best = state.incumbent_cost()
    trajectory.append(TrajectoryStep(
        phase=phase,
        iteration=iteration,
        config_index=outcome.config_index,
        spent_cost=outcome.spent_cost,
        observed_cost=outcome.observed_cost,
        timed_out=outcome.timed_out,
        budget_after=state.beta,
        best_feasible_cost=best,
        cno=(best / opt_cost) if best is not None else None,
    ))


def _finish(state: OptimizerState, dataset: Dataset, trajectory: list) -> OptimizeResult:
    best_idx = None
    best_cost = None
    best_runtime = None
    for idx, cost, ok in zip(state.entry_idx, state.entry_cost, state.entry_eligible):
        if ok and (best_cost is None or cost < best_cost):
            best_idx, best_cost = idx, cost
            best_runtime = float(dataset.runtimes[idx])
    return OptimizeResult(
        status="ok" if best_idx is not None else "no-feasible",
        recommendation=best_idx,
        recommendation_cost=best_cost,
        recommendation_runtime=best_runtime,
        total_spent=math.fsum(state.spends),
        trajectory=tuple(trajectory),
        n_explored=len(state.spends),
    )


def _bootstrap(dataset: Dataset, state: OptimizerState, n_bootstrap: int, seed: int,
               t_max: float, opt_cost: float, trajectory: list) -> None:
    # no timeout during bootstrap: the incumbent is still forming
    for b, cfg in enumerate(lhs_bootstrap(dataset.space, n_bootstrap, seeds.derive(seed, "boot"))):
        runtime, price, cost, finished = dataset.query(cfg)
        outcome = RunOutcome(cfg.index, cost, cost, runtime, True,
                             finished and runtime <= t_max, False)
        state.apply(outcome)
        _record_step(state, outcome, "bootstrap", b, opt_cost, trajectory)


def _true_optimum(dataset: Dataset, t_max: float) -> float:
    best = dataset.best_feasible(t_max)
    if best is None:
        raise ValueError("no configuration in the dataset satisfies the constraint")
    return best[1]


def optimize(dataset: Dataset, t_max: float, budget: float, planner_cfg: PlannerConfig,
             policy: TimeoutPolicy, seed: int, n_bootstrap: int | None = None,
             max_explorations: int | None = None, trainer=None) -> OptimizeResult:
    """Full look-ahead optimization run against a tabular oracle.

    `trainer` overrides model fitting for both the per-iteration model and the
    planner's speculative retrains (used by tests to inject stub models).
    `max_explorations` caps post-bootstrap explorations; None leaves stopping
    to the budget filter and the marginal-reward rule.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive (math.inf for unbounded)")
    if policy == TimeoutPolicy.LINEAR and not dataset.has_progress:
        raise ValueError("linear policy needs progress curves in the dataset")
    space = dataset.space
    opt_cost = _true_optimum(dataset, t_max)
    n_boot = default_bootstrap_count(space) if n_bootstrap is None else n_bootstrap
    if trainer is None:
        table = regressor.FeatureTable.for_space(space)
        iter_trainer = lambda idx, y, s: regressor.train_arrays(table, idx, y, s)
        trainer_batch = regressor.make_batch_trainer(table)
    else:
        iter_trainer = trainer
        trainer_batch = regressor.batch_adapter(trainer)
    tmax_cost = t_max * dataset.unit_prices

    state = OptimizerState.fresh(space, budget)
    trajectory: list = []
    _bootstrap(dataset, state, n_boot, seed, t_max, opt_cost, trajectory)

    iteration = 0
    while True:
        if state.beta <= 0 and not math.isinf(budget):
            break
        if state.untested.size == 0:
            break
        if max_explorations is not None and iteration >= max_explorations:
            break
        model = iter_trainer(np.array(state.entry_idx, dtype=np.int64),
                             np.array(state.entry_cost, dtype=np.float64),
                             seeds.derive(seed, "model", iteration))
        ctx = PlanContext(trainer_batch, tmax_cost, planner_cfg, seed, iteration)
        sel = next_config(state.plan_state(), model, ctx)
        if sel is None:
            break
        outcome = run_with_timeout(dataset, sel, policy, state.incumbent_cost(), model,
                                   t_max, max(state.entry_cost, default=None))
        state.apply(outcome)
        _record_step(state, outcome, "explore", iteration, opt_cost, trajectory)
        iteration += 1
    return _finish(state, dataset, trajectory)


def optimize_greedy(dataset: Dataset, t_max: float, budget: float, policy: TimeoutPolicy,
                    seed: int, n_bootstrap: int | None = None,
                    max_explorations: int | None = None,
                    reward_stop_fraction: float = 0.01,
                    budget_confidence: float = 0.99) -> OptimizeResult:
    """Greedy BO baseline: maximize EI_c per predicted dollar, no look-ahead.

    Written as its own loop (rather than the planner at depth zero) so the
    collapse property of the planner can be checked against it.
    """
    if t_max <= 0 or budget <= 0:
        raise ValueError("t_max and budget must be positive")
    if policy == TimeoutPolicy.LINEAR and not dataset.has_progress:
        raise ValueError("linear policy needs progress curves in the dataset")
    space = dataset.space
    opt_cost = _true_optimum(dataset, t_max)
    n_boot = default_bootstrap_count(space) if n_bootstrap is None else n_bootstrap
    trainer = regressor.make_trainer(space)
    tmax_cost = t_max * dataset.unit_prices
    z99 = float(ndtri(budget_confidence))

    state = OptimizerState.fresh(space, budget)
    trajectory: list = []
    _bootstrap(dataset, state, n_boot, seed, t_max, opt_cost, trajectory)

    iteration = 0
    while True:
        if state.beta <= 0 and not math.isinf(budget):
            break
        cand = state.untested
        if cand.size == 0:
            break
        if max_explorations is not None and iteration >= max_explorations:
            break
        model = trainer(np.array(state.entry_idx, dtype=np.int64),
                        np.array(state.entry_cost, dtype=np.float64),
                        seeds.derive(seed, "model", iteration))
        mu, sd = model.predict_rows(cand)
        mask = mu + z99 * sd <= state.beta
        if not mask.any():
            break
        inc_cost = state.incumbent_cost()
        if inc_cost is not None:
            y_star = inc_cost
        else:
            y_star = float(incumbent(np.array(state.entry_cost),
                                     np.array(state.entry_eligible), sd).value)
        eic = ei_constrained_at(mu, sd, y_star, tmax_cost[cand])
        ratio = np.where(mask, eic / np.maximum(mu, model.sigma_floor), -np.inf)
        pos = int(np.argmax(ratio))
        if float(eic[pos]) < reward_stop_fraction * y_star:
            break
        sel = int(cand[pos])
        outcome = run_with_timeout(dataset, sel, policy, inc_cost, model, t_max,
                                   max(state.entry_cost, default=None))
        state.apply(outcome)
        _record_step(state, outcome, "explore", iteration, opt_cost, trajectory)
        iteration += 1
    return _finish(state, dataset, trajectory)


def optimize_random(dataset: Dataset, t_max: float, budget: float, seed: int,
                    max_explorations: int | None = None) -> OptimizeResult:
    """Uniform sampling without replacement until the budget is exhausted."""
    if t_max <= 0 or budget <= 0:
        raise ValueError("t_max and budget must be positive")
    opt_cost = _true_optimum(dataset, t_max)
    rng = np.random.Generator(np.random.PCG64(seeds.derive(seed, "rnd")))
    state = OptimizerState.fresh(dataset.space, budget)
    trajectory: list = []
    iteration = 0
    while state.untested.size > 0 and state.beta > 0:
        if max_explorations is not None and iteration >= max_explorations:
            break
        sel = int(rng.choice(state.untested))
        x = dataset.space.decode(sel)
        runtime, price, cost, finished = dataset.query(x)
        outcome = RunOutcome(sel, cost, cost, runtime, True,
                             finished and runtime <= t_max, False)
        state.apply(outcome)
        _record_step(state, outcome, "explore", iteration, opt_cost, trajectory)
        iteration += 1
    return _finish(state, dataset, trajectory)
