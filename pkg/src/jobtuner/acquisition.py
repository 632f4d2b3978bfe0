"""Acquisition math: EI, constraint probability, constrained EI, EI per dollar,
and the incumbent (best feasible cost, with a fallback when nothing feasible
has been sampled yet). All functions are pure and vectorize over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_INV_SQRT_2 = 1.0 / np.sqrt(2.0)

FEASIBLE_BEST = "feasible-best"
FALLBACK = "fallback"


def norm_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


def expected_improvement(mu, sigma, y_star):
    """Closed-form E[max(y* - c, 0)] for c ~ N(mu, sigma^2). Requires sigma > 0."""
    z = (y_star - mu) / sigma
    ei = (y_star - mu) * ndtr(z) + sigma * norm_pdf(z)
    return np.maximum(ei, 0.0)


def _ei_scalar(mu: float, sigma: float, y_star: float) -> float:
    z = (y_star - mu) / sigma
    phi_c = 0.5 * math.erfc(-z * _INV_SQRT_2)
    ei = (y_star - mu) * phi_c + sigma * _INV_SQRT_2PI * math.exp(-0.5 * z * z)
    return ei if ei > 0.0 else 0.0


def prob_cost_below(mu, sigma, threshold):
    return ndtr((threshold - mu) / sigma)


def constraint_probability(mu, sigma, t_max, unit_price):
    """P(runtime <= t_max), computed on the cost scale as P(cost <= t_max * price)."""
    return prob_cost_below(mu, sigma, t_max * unit_price)


def ei_constrained_at(mu, sigma, y_star, cost_threshold):
    """EI_c with the constraint threshold already on the cost scale."""
    if isinstance(mu, float):  # scalar fast path (hot in the planner recursion)
        pc = 0.5 * math.erfc((mu - cost_threshold) / sigma * _INV_SQRT_2)
        return _ei_scalar(mu, sigma, y_star) * pc
    return expected_improvement(mu, sigma, y_star) * prob_cost_below(mu, sigma, cost_threshold)


def ei_constrained(mu, sigma, y_star, t_max, unit_price):
    return ei_constrained_at(mu, sigma, y_star, t_max * unit_price)


def ei_per_dollar(mu, sigma, y_star, t_max, unit_price, mu_floor):
    """EI_c divided by the predicted mean cost (guarded against degenerate mu <= 0)."""
    eic = ei_constrained(mu, sigma, y_star, t_max, unit_price)
    return eic / np.maximum(mu, mu_floor)


@dataclass(frozen=True)
class Incumbent:
    value: float
    source: str  # FEASIBLE_BEST or FALLBACK


def incumbent(entry_costs, entry_eligible, unexplored_sigma) -> Incumbent:
    """Best-feasible cost among sampled entries, or the optimistic fallback.

    `entry_eligible` marks fully-run entries with runtime within the constraint;
    timed-out entries are never eligible. The fallback is the most expensive
    sampled cost plus three times the largest predictive std over the points
    not yet sampled.
    """
    costs = np.asarray(entry_costs, dtype=np.float64)
    eligible = np.asarray(entry_eligible, dtype=bool)
    if costs.size == 0:
        raise ValueError("incumbent needs a non-empty training set")
    if eligible.any():
        return Incumbent(float(costs[eligible].min()), FEASIBLE_BEST)
    sig = np.asarray(unexplored_sigma, dtype=np.float64)
    spread = float(sig.max()) if sig.size else 0.0
    return Incumbent(float(costs.max()) + 3.0 * spread, FALLBACK)
