import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jobtuner.acquisition import (
    FALLBACK,
    FEASIBLE_BEST,
    constraint_probability,
    ei_constrained,
    ei_per_dollar,
    expected_improvement,
    incumbent,
)


def mc_expected_improvement(mu, sigma, y_star, n=200_000, seed=0):
    """Monte-Carlo oracle: E[max(y* - c, 0)], c ~ N(mu, sigma^2), antithetic."""
    z = np.random.Generator(np.random.PCG64(seed)).standard_normal(n // 2)
    lo = np.maximum(y_star - mu - sigma * z, 0.0)
    hi = np.maximum(y_star - mu + sigma * z, 0.0)
    return float((lo.mean() + hi.mean()) / 2.0)


def test_ei_matches_monte_carlo_spot():
    # frozen from the MC oracle: mu=1.0 sigma=0.5 y*=1.2 -> ~0.31522
    assert expected_improvement(1.0, 0.5, 1.2) == pytest.approx(0.3152194184737265, abs=1e-12)
    assert expected_improvement(1.0, 0.5, 1.2) == pytest.approx(
        mc_expected_improvement(1.0, 0.5, 1.2), abs=2e-3)


def test_ei_tiny_sigma_limits():
    floor = 1e-9
    assert expected_improvement(1.0, floor, 2.0) == pytest.approx(1.0)
    assert expected_improvement(2.0, floor, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_ei_nonnegative_grid():
    for mu in (0.5, 1.0, 2.0):
        for sigma in (1e-6, 0.1, 1.0):
            for y_star in (0.1, 1.0, 3.0):
                assert expected_improvement(mu, sigma, y_star) >= 0.0


def test_ei_increasing_in_sigma():
    sigmas = np.linspace(0.01, 2.0, 40)
    vals = expected_improvement(np.full_like(sigmas, 1.5), sigmas, 1.0)
    assert np.all(np.diff(vals) > 0)


def test_constraint_probability_symmetry():
    # predicted mean exactly at the threshold cost
    assert constraint_probability(6.0, 1.0, 3.0, 2.0) == pytest.approx(0.5)
    assert constraint_probability(1.0, 2.0, 1.0 + 3 * 2.0, 1.0) == pytest.approx(
        0.9986501019683699)


def test_constraint_threshold_product_invariance():
    a = constraint_probability(5.0, 1.3, 10.0, 0.8)
    b = constraint_probability(5.0, 1.3, 20.0, 0.4)
    assert a == pytest.approx(b)


def test_ei_constrained_annihilation_and_identity():
    # P_C ~ 0: threshold far below the mean
    assert ei_constrained(1.0, 0.01, 2.0, 0.0001, 1.0) == pytest.approx(0.0, abs=1e-12)
    # P_C ~ 1: threshold far above the mean
    full = expected_improvement(1.0, 0.5, 1.2)
    assert ei_constrained(1.0, 0.5, 1.2, 1e9, 1.0) == pytest.approx(full, rel=1e-9)


def test_ei_constrained_product_example():
    # P_C = 0.5 at threshold == mu, so EI_c is half the EI
    eic = ei_constrained(1.0, 0.5, 1.2, 1.0, 1.0)
    assert eic == pytest.approx(0.5 * 0.3152194184737265, abs=1e-12)


def test_ei_constrained_le_ei():
    rng = np.random.default_rng(1)
    for _ in range(200):
        mu, sigma = rng.uniform(0.2, 3.0), rng.uniform(0.05, 1.0)
        y_star, thr = rng.uniform(0.2, 3.0), rng.uniform(0.1, 5.0)
        assert ei_constrained(mu, sigma, y_star, thr, 1.0) <= \
            expected_improvement(mu, sigma, y_star) + 1e-15


def test_ei_per_dollar():
    eic = ei_constrained(1.0, 0.5, 1.2, 1.0, 1.0)
    assert ei_per_dollar(1.0, 0.5, 1.2, 1.0, 1.0, 1e-9) == pytest.approx(eic / 1.0)
    # halving mu doubles the ratio for fixed EI_c values
    r1 = 0.3 / np.maximum(2.0, 1e-9)
    r2 = 0.3 / np.maximum(1.0, 1e-9)
    assert r2 == pytest.approx(2 * r1)
    # degenerate mean guarded by the floor
    assert np.isfinite(ei_per_dollar(0.0, 0.5, 1.2, 1.0, 1.0, 1e-9))


def test_incumbent_feasible_best():
    inc = incumbent([5.0, 3.0], [True, False], [])
    assert inc.value == 5.0
    assert inc.source == FEASIBLE_BEST


def test_incumbent_fallback():
    inc = incumbent([8.0, 2.0], [False, False], [0.1, 0.7, 0.3])
    assert inc.value == pytest.approx(8.0 + 3 * 0.7)
    assert inc.source == FALLBACK


@given(st.lists(st.tuples(st.floats(min_value=0.01, max_value=100.0), st.booleans()),
                min_size=1, max_size=20))
@settings(max_examples=100, deadline=None)
def test_incumbent_never_increases_with_cheaper_feasible(entries):
    costs = [c for c, _ in entries]
    eligible = [e for _, e in entries]
    if not any(eligible):
        return
    before = incumbent(costs, eligible, []).value
    after = incumbent(costs + [before / 2], eligible + [True], []).value
    assert after < before
    assert after == pytest.approx(before / 2)
