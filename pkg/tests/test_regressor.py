import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jobtuner import _kernels, regressor, seeds
from jobtuner.regressor import (
    FeatureTable,
    InsufficientDataError,
    SpeculativeModel,
    TrainingSet,
    predict,
    prob_below,
    train,
    train_arrays,
)
from jobtuner.space import ConfigSpace, Dimension


@pytest.fixture(scope="module")
def table(space384):
    return FeatureTable.for_space(space384)


def _training_set(space, idx, costs):
    return TrainingSet(tuple(space.decode(i) for i in idx), tuple(costs))


def test_constant_target_predicts_constant(space384):
    idx = [0, 50, 100, 150, 200, 383]
    model = train(_training_set(space384, idx, [4.0] * 6), space384, seed=1)
    for i in (0, 100, 250):
        pred = predict(model, space384.decode(i))
        assert pred.mean == pytest.approx(4.0)
        assert pred.std == model.sigma_floor
    assert model.sigma_floor == pytest.approx(1e-6 * 4.0)


def test_train_deterministic(space384, table):
    rng = np.random.default_rng(5)
    idx = rng.choice(384, 30, replace=False).astype(np.int64)
    y = rng.uniform(1.0, 10.0, 30)
    rows = np.arange(384, dtype=np.int64)
    a = train_arrays(table, idx, y, seed=99).predict_rows(rows)
    b = train_arrays(table, idx, y, seed=99).predict_rows(rows)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = train_arrays(table, idx, y, seed=100).predict_rows(rows)
    assert not np.array_equal(a[0], c[0])


def test_insufficient_data(space384):
    with pytest.raises(InsufficientDataError):
        train(_training_set(space384, [3], [1.0]), space384, seed=0)


def test_training_set_validation(space384):
    with pytest.raises(ValueError, match="duplicate"):
        _training_set(space384, [1, 1], [1.0, 2.0])
    with pytest.raises(ValueError, match="positive"):
        _training_set(space384, [1, 2], [1.0, -2.0])


def test_mean_within_observed_range_1d():
    # single-feature toy set: ensemble mean at a training point stays inside
    # the observed cost range (reference check against any single-tree fit)
    space = ConfigSpace([Dimension("x", tuple(float(i) for i in range(10)))])
    tset = _training_set(space, list(range(10)), [float(1 + i) for i in range(10)])
    model = train(tset, space, seed=7)
    for i in range(10):
        pred = predict(model, space.decode(i))
        assert 1.0 <= pred.mean <= 10.0


def test_ensemble_aggregation_matches_sample_std(space384, table):
    rng = np.random.default_rng(0)
    idx = rng.choice(384, 40, replace=False).astype(np.int64)
    y = rng.uniform(0.5, 8.0, 40)
    model = train_arrays(table, idx, y, seed=3)
    rows = np.arange(0, 384, 17, dtype=np.int64)
    per_tree = model.tree_predictions(rows)
    mu, sd = model.predict_rows(rows)
    assert mu == pytest.approx(per_tree.mean(axis=1))
    expected_sd = np.maximum(per_tree.std(axis=1, ddof=1), model.sigma_floor)
    assert sd == pytest.approx(expected_sd)


def test_half_and_half_tree_outputs():
    # five trees answering 1 and five answering 3: mean 2, sample std of
    # {1 x5, 3 x5} = sqrt(10/9) ~= 1.054
    X = np.array([[0.0], [1.0]])
    values = [1.0] * 5 + [3.0] * 5
    feat = np.full((10, 1), -1, dtype=np.int64)
    thr = np.zeros((10, 1))
    left = np.zeros((10, 1), dtype=np.int64)
    right = np.zeros((10, 1), dtype=np.int64)
    val = np.array([[v] for v in values])
    mu, sd = _kernels.forest_mean_std(feat, thr, left, right, val, X)
    assert mu == pytest.approx([2.0, 2.0])
    assert sd == pytest.approx([1.0540925533894598] * 2)


def test_prob_below_examples(space384):
    idx = [0, 50, 100, 150, 200, 383]
    model = train(_training_set(space384, idx, [4.0] * 6), space384, seed=1)
    x = space384.decode(10)
    pred = predict(model, x)
    assert prob_below(model, x, pred.mean) == pytest.approx(0.5)
    assert prob_below(model, x, pred.mean + 3 * pred.std) == pytest.approx(0.9986501019683699)
    assert prob_below(model, x, -1e12) == pytest.approx(0.0)
    assert prob_below(model, x, 1e12) == pytest.approx(1.0)


@given(st.floats(min_value=-100, max_value=100), st.floats(min_value=-100, max_value=100))
@settings(max_examples=25, deadline=None)
def test_prob_below_monotone(space384, t1, t2):
    idx = [0, 60, 120, 180, 240, 300]
    model = train(_training_set(space384, idx, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
                  space384, seed=2)
    x = space384.decode(33)
    lo, hi = sorted((t1, t2))
    assert prob_below(model, x, lo) <= prob_below(model, x, hi)


def test_bootstrap_only_from_training_rows():
    boot = seeds.bootstrap_indices(123, 10, 17)
    assert boot.shape == (10, 17)
    assert boot.min() >= 0 and boot.max() < 17
    assert np.array_equal(boot, seeds.bootstrap_indices(123, 10, 17))


def test_speculative_matches_ensemble(space384, table):
    rng = np.random.default_rng(2)
    idx = rng.choice(384, 25, replace=False).astype(np.int64)
    y = rng.uniform(1.0, 5.0, 25)
    cand = np.setdiff1d(np.arange(384), idx)
    em = train_arrays(table, idx, y, seed=777)
    sm = SpeculativeModel(table, idx, y, 777, 10, 2)
    mu_e, sd_e = em.predict_rows(cand)
    mu_s, sd_s = sm.predict_rows(cand)
    assert np.array_equal(mu_e, mu_s)
    assert np.array_equal(sd_e, sd_s)


def test_batch_matches_individual_models(space384, table):
    rng = np.random.default_rng(3)
    idx = rng.choice(384, 20, replace=False).astype(np.int64)
    ys = np.stack([rng.uniform(1.0, 5.0, 20) for _ in range(3)])
    seed_list = [11, 22, 33]
    cand = np.setdiff1d(np.arange(384), idx)[:100]
    batch = regressor.make_batch_trainer(table)(idx, ys, seed_list)
    mu_b, sd_b = batch.predict_rows(cand)
    for b in range(3):
        em = train_arrays(table, idx, ys[b], seed=seed_list[b])
        mu_e, sd_e = em.predict_rows(cand)
        assert np.array_equal(mu_b[b], mu_e)
        assert np.array_equal(sd_b[b], sd_e)
