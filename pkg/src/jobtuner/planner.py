"""Long-sighted, budget-aware selection of the next configuration.

For every budget-viable untested configuration the planner simulates an
exploration path: the immediate reward is the configuration's constrained EI
and its cost the predicted mean; deeper steps branch over a Gauss-Hermite
discretization of the predicted cost, retrain the model on each speculated
outcome, greedily pick the in-depth follow-up by constrained EI, and fold the
sub-path in weighted by the quadrature weight (rewards discounted). The first
configuration of the best reward/cost path wins. With zero look-ahead this
collapses to greedy EI_c-per-dollar selection.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from . import seeds
from .acquisition import Incumbent, FEASIBLE_BEST, ei_constrained_at, incumbent

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class QuadratureRule:
    """Standardized Gauss-Hermite nodes with weights normalized to sum 1."""

    nodes: tuple
    weights: tuple


@lru_cache(maxsize=16)
def gauss_hermite_rule(k: int) -> QuadratureRule:
    if k < 1:
        raise ValueError("quadrature needs at least one node")
    nodes, weights = np.polynomial.hermite.hermgauss(k)
    weights = weights / np.sqrt(np.pi)
    return QuadratureRule(tuple(nodes.tolist()), tuple(weights.tolist()))


def gauss_hermite(k: int, mean: float, std: float) -> list[tuple[float, float]]:
    """Discretize N(mean, std^2) into k (cost, weight) pairs.

    Weights sum to 1; for k >= 2 the discretization reproduces the Gaussian
    mean and variance exactly (and all polynomial moments up to degree 2k-1).
    """
    rule = gauss_hermite_rule(k)
    return [(mean + _SQRT2 * std * n, w) for n, w in zip(rule.nodes, rule.weights)]


@dataclass(frozen=True)
class PathScore:
    reward: float
    cost: float


@dataclass(frozen=True)
class PlannerConfig:
    lookahead: int = 2
    quad_nodes: int = 3
    discount: float = 0.9
    budget_confidence: float = 0.99
    reward_stop_fraction: float = 0.01

    def __post_init__(self):
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")
        if self.quad_nodes < 1:
            raise ValueError("quad_nodes must be >= 1")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must be in [0, 1]")
        if not 0.0 < self.budget_confidence < 1.0:
            raise ValueError("budget_confidence must be in (0, 1)")
        if self.reward_stop_fraction < 0.0:
            raise ValueError("reward_stop_fraction must be >= 0")


@dataclass(frozen=True)
class PlanState:
    """Training set, untested pool and remaining budget, as seen by one path.

    Speculated observations extend the training set and reduce the budget,
    but the incumbent is frozen at its real value for the whole planning
    round: path rewards measure improvement over the best configuration
    actually found so far, not over hypothetical ones.
    """

    train_idx: np.ndarray
    train_y: np.ndarray
    untested: np.ndarray  # ascending config indices
    beta: float
    best_eligible_cost: float | None
    max_train_cost: float

    def speculate(self, x_idx: int, cost: float) -> "PlanState":
        n = self.train_idx.size
        idx = np.empty(n + 1, dtype=np.int64)
        idx[:n] = self.train_idx
        idx[n] = x_idx
        y = np.empty(n + 1)
        y[:n] = self.train_y
        y[n] = cost
        pos = int(np.searchsorted(self.untested, x_idx))
        untested = np.empty(self.untested.size - 1, dtype=np.int64)
        untested[:pos] = self.untested[:pos]
        untested[pos:] = self.untested[pos + 1:]
        return PlanState(
            train_idx=idx,
            train_y=y,
            untested=untested,
            beta=self.beta - cost,
            best_eligible_cost=self.best_eligible_cost,
            max_train_cost=self.max_train_cost,
        )


class PlanContext:
    """Per-iteration constants shared by all paths (immutable during planning)."""

    def __init__(self, trainer_batch, tmax_cost: np.ndarray, cfg: PlannerConfig,
                 master_seed: int, iteration: int):
        # trainer_batch: (train_idx, ys (K, n), seeds (K,)) -> batch with
        # .predict_rows(cand) -> ((K, m) mu, (K, m) sigma) and .sigma_floors
        self.trainer_batch = trainer_batch
        self.tmax_cost = tmax_cost  # per-config cost threshold T_max * U(x)
        self.cfg = cfg
        self.master_seed = master_seed
        self.iteration = iteration
        self.z_budget = float(ndtri(cfg.budget_confidence))
        rule = gauss_hermite_rule(cfg.quad_nodes)
        self.gh_scaled = _SQRT2 * np.array(rule.nodes)  # c_i = mu + sigma * scaled_i
        self.gh_weights = np.array(rule.weights)


def _incumbent(state: PlanState, model, cand_stats=None) -> Incumbent:
    if state.best_eligible_cost is not None:
        return Incumbent(state.best_eligible_cost, FEASIBLE_BEST)
    if cand_stats is None:
        if state.untested.size:
            cand_stats = model.predict_rows(state.untested)
        else:
            cand_stats = (np.empty(0), np.empty(0))
    return incumbent(
        np.array([state.max_train_cost]), np.array([False]), cand_stats[1]
    )


def next_config(state: PlanState, model, ctx: PlanContext) -> int | None:
    """Pick the next configuration to actually run, or None to stop.

    Configurations likely to exceed the remaining budget (at the configured
    confidence) are excluded up front; None is also returned when the best
    path's reward falls below reward_stop_fraction of the incumbent.
    """
    cand = state.untested
    if cand.size == 0:
        return None
    mu, sd = model.predict_rows(cand)
    mask = mu + ctx.z_budget * sd <= state.beta
    if not mask.any():
        return None
    inc = _incumbent(state, model, (mu, sd))
    if ctx.cfg.lookahead == 0:
        eic = ei_constrained_at(mu, sd, inc.value, ctx.tmax_cost[cand])
        ratio = np.where(mask, eic / np.maximum(mu, model.sigma_floor), -np.inf)
        pos = int(np.argmax(ratio))  # first max = lowest config index on ties
        reward = float(eic[pos])
    else:
        pos = -1
        best_ratio = -np.inf
        reward = 0.0
        floor = model.sigma_floor
        for p in np.flatnonzero(mask):
            x = int(cand[p])
            score = _explore(state, x, ctx.cfg.lookahead, ctx, (x,), inc.value,
                             float(mu[p]), float(sd[p]), floor)
            ratio = score.reward / score.cost
            if ratio > best_ratio:
                best_ratio = ratio
                pos = int(p)
                reward = score.reward
        if pos < 0:
            return None
    if reward < ctx.cfg.reward_stop_fraction * inc.value:
        return None
    return int(cand[pos])


def explore_paths(state: PlanState, model, x_idx: int, depth: int,
                  ctx: PlanContext, key: tuple, y_star: float) -> PathScore:
    """Reward and cost of the exploration path rooted at x_idx.

    Depth 0 returns (EI_c(x), mu(x)). Otherwise each Gauss-Hermite branch
    appends the speculated (x, c_i) pair, retrains the model (seeded by the
    branch path so results are schedule-independent), greedily picks the
    in-depth follow-up by EI_c, and accumulates cost += w_i * c and
    reward += discount * w_i * r. `y_star` is the incumbent at planning time,
    frozen along the path.
    """
    mu1, sd1 = model.predict_rows(np.array([x_idx]))
    return _explore(state, x_idx, depth, ctx, key, y_star,
                    float(mu1[0]), float(sd1[0]), model.sigma_floor)


def _explore(state: PlanState, x_idx: int, depth: int, ctx: PlanContext,
             key: tuple, y_star: float, mu_x: float, sd_x: float,
             sigma_floor: float) -> PathScore:
    # (mu_x, sd_x, sigma_floor) describe x under the model of this path step;
    # the K sibling branches are fit and evaluated in one batched call.
    reward = float(ei_constrained_at(mu_x, sd_x, y_star, ctx.tmax_cost[x_idx]))
    cost = mu_x
    if depth == 0:
        return PathScore(reward, cost)
    # Gaussian tails can speculate negative costs; clamp at the model floor
    branch_costs = np.maximum(mu_x + sd_x * ctx.gh_scaled, sigma_floor)
    n = state.train_idx.size
    child_idx = np.empty(n + 1, dtype=np.int64)
    child_idx[:n] = state.train_idx
    child_idx[n] = x_idx
    k = branch_costs.size
    ys = np.empty((k, n + 1))
    ys[:, :n] = state.train_y
    ys[:, n] = branch_costs
    seed_list = [seeds.derive(ctx.master_seed, "model", ctx.iteration, *key, i)
                 for i in range(k)]
    drop = int(np.searchsorted(state.untested, x_idx))
    untested = np.empty(state.untested.size - 1, dtype=np.int64)
    untested[:drop] = state.untested[:drop]
    untested[drop:] = state.untested[drop + 1:]
    if untested.size == 0:
        return PathScore(reward, cost)
    batch = ctx.trainer_batch(child_idx, ys, seed_list)
    betas = state.beta - branch_costs
    mu2, sd2 = batch.predict_rows(untested)
    # in-depth follow-up per branch: budget-viable config maximizing EI_c
    eic2 = ei_constrained_at(mu2, sd2, y_star, ctx.tmax_cost[untested][None, :])
    eic2 = np.where(mu2 + ctx.z_budget * sd2 <= betas[:, None], eic2, -np.inf)
    best = np.argmax(eic2, axis=1)
    for i in range(k):
        p = int(best[i])
        if not np.isfinite(eic2[i, p]):
            continue  # no budget-viable continuation on this branch
        nstate = PlanState(child_idx, ys[i], untested, float(betas[i]),
                           state.best_eligible_cost, state.max_train_cost)
        sub = _explore(nstate, int(untested[p]), depth - 1, ctx, key + (i,),
                       y_star, float(mu2[i, p]), float(sd2[i, p]),
                       float(batch.sigma_floors[i]))
        w_i = ctx.gh_weights[i]
        cost += w_i * sub.cost
        reward += ctx.cfg.discount * w_i * sub.reward
    return PathScore(reward, cost)


def next_step(state: PlanState, model, ctx: PlanContext, y_star: float):
    """In-depth follow-up: budget-viable untested config maximizing EI_c.

    Single-state reference form of the selection done row-wise inside
    _explore; returns (config index, (mu, sigma)) or None.
    """
    cand = state.untested
    if cand.size == 0:
        return None
    mu, sd = model.predict_rows(cand)
    mask = mu + ctx.z_budget * sd <= state.beta
    if not mask.any():
        return None
    eic = ei_constrained_at(mu, sd, y_star, ctx.tmax_cost[cand])
    eic[~mask] = -np.inf
    pos = int(np.argmax(eic))
    return int(cand[pos]), (float(mu[pos]), float(sd[pos]))
