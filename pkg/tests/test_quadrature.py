import math

import numpy as np
import pytest

from jobtuner.planner import gauss_hermite, gauss_hermite_rule


def gaussian_moment(mu, sigma, p):
    """Closed-form E[(mu + sigma Z)^p]: binomial over even normal moments."""
    total = 0.0
    for j in range(0, p + 1, 2):
        double_fact = 1.0
        for v in range(j - 1, 0, -2):
            double_fact *= v
        total += math.comb(p, j) * (sigma ** j) * (mu ** (p - j)) * double_fact
    return total


def test_k1_is_midpoint():
    pairs = gauss_hermite(1, 2.5, 0.7)
    assert pairs == [(2.5, pytest.approx(1.0))]


def test_k3_nodes_and_weights():
    pairs = gauss_hermite(3, 1.0, 0.5)
    costs = [c for c, _ in pairs]
    weights = [w for _, w in pairs]
    root3 = math.sqrt(3.0)
    assert costs == pytest.approx([1.0 - root3 * 0.5, 1.0, 1.0 + root3 * 0.5])
    assert weights == pytest.approx([1 / 6, 2 / 3, 1 / 6])


@pytest.mark.parametrize("k", [1, 2, 3, 5, 7])
def test_weights_sum_to_one(k):
    rule = gauss_hermite_rule(k)
    assert abs(sum(rule.weights) - 1.0) <= 1e-12


@pytest.mark.parametrize("k", [2, 3, 5, 7])
def test_mean_and_variance_exact(k):
    mu, sigma = 1.3, 0.62
    pairs = gauss_hermite(k, mu, sigma)
    m1 = sum(w * c for c, w in pairs)
    m2 = sum(w * (c - mu) ** 2 for c, w in pairs)
    assert m1 == pytest.approx(mu, abs=1e-10)
    assert m2 == pytest.approx(sigma ** 2, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 5, 7])
def test_polynomial_moments_exact_to_degree(k):
    mu, sigma = 1.0, 0.5
    pairs = gauss_hermite(k, mu, sigma)
    for p in range(0, 2 * k):
        got = sum(w * c ** p for c, w in pairs)
        assert got == pytest.approx(gaussian_moment(mu, sigma, p), abs=1e-8), f"degree {p}"


def test_k5_gaussian_kurtosis():
    mu, sigma = 0.8, 0.33
    pairs = gauss_hermite(5, mu, sigma)
    m4 = sum(w * (c - mu) ** 4 for c, w in pairs)
    assert m4 == pytest.approx(3 * sigma ** 4, rel=1e-10)


def test_invalid_k():
    with pytest.raises(ValueError):
        gauss_hermite_rule(0)
