"""Black-box cost model: bagging ensemble of CART regression trees.

Per-point predictions from the 10 trees are summarized as a Gaussian
N(mu(x), sigma(x)); sigma is floored at a small fraction of the largest
training cost so downstream acquisition expressions stay well defined.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from . import _kernels, seeds
from .space import ConfigSpace, Configuration

N_TREES = 10
MIN_LEAF = 2
SIGMA_FLOOR_FRACTION = 1e-6

# instrumentation: total ensemble fits, used by planner complexity tests
train_call_count = 0


class InsufficientDataError(ValueError):
    """Fewer than two observations: a variance estimate needs at least two."""


class GaussianPrediction(NamedTuple):
    mean: float
    std: float


@dataclass(frozen=True)
class TrainingSet:
    """Observed (configuration, cost) pairs. No duplicates, costs positive."""

    configs: tuple
    costs: tuple

    def __post_init__(self):
        idx = [c.index for c in self.configs]
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate configurations in training set")
        if any(c <= 0 for c in self.costs):
            raise ValueError("training costs must be positive")
        if len(self.configs) != len(self.costs):
            raise ValueError("configs/costs length mismatch")

    def __len__(self):
        return len(self.configs)


class FeatureTable:
    """Feature matrix of a space plus its per-column rank encoding.

    Built once per space; every model fit for that space reuses it, which
    keeps the per-fit work proportional to the training set only.
    """

    def __init__(self, feats: np.ndarray):
        self.feats = np.ascontiguousarray(feats, dtype=np.float64)
        self.ranks, self.values, self.n_distinct = _kernels.rank_encode(self.feats)

    @classmethod
    def for_space(cls, space: ConfigSpace) -> "FeatureTable":
        return cls(space.feature_matrix())


class EnsembleModel:
    """Trained forest over featurized configurations; immutable, predictions pure."""

    def __init__(self, forest, sigma_floor: float, table: FeatureTable, training_seed: int):
        self._forest = forest
        self.sigma_floor = sigma_floor
        self._table = table
        self.training_seed = training_seed

    @property
    def n_trees(self) -> int:
        return self._forest[0].shape[0]

    def predict_rows(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mu, sigma) for the given config indices; sigma floored."""
        rows = np.asarray(rows, dtype=np.int64)
        mu, sd = _kernels.forest_mean_std_rows(*self._forest, self._table.feats, rows)
        return mu, np.maximum(sd, self.sigma_floor)

    def predict_features(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu, sd = _kernels.forest_mean_std(*self._forest, np.atleast_2d(np.asarray(X, float)))
        return mu, np.maximum(sd, self.sigma_floor)

    def tree_predictions(self, rows: np.ndarray) -> np.ndarray:
        """(n_rows, n_trees) raw per-tree outputs (no floor)."""
        rows = np.asarray(rows, dtype=np.int64)
        return _kernels.tree_predictions(*self._forest, self._table.feats[rows])


def train_arrays(table: FeatureTable, train_idx: np.ndarray, train_y: np.ndarray,
                 seed: int, n_trees: int = N_TREES, min_leaf: int = MIN_LEAF) -> EnsembleModel:
    """Fit the ensemble on rows `train_idx` of the feature table.

    Each tree is grown on a bootstrap resample (with replacement, size |S|)
    of the training rows; resamples depend only on (seed, tree index).
    """
    global train_call_count
    train_call_count += 1
    n = len(train_idx)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    train_idx = np.ascontiguousarray(train_idx, dtype=np.int64)
    train_y = np.ascontiguousarray(train_y, dtype=np.float64)
    boot = seeds.bootstrap_indices(seed, n_trees, n)
    forest = _kernels.fit_forest(table.ranks, table.values, table.n_distinct,
                                 train_idx, train_y, boot, min_leaf)
    sigma_floor = SIGMA_FLOOR_FRACTION * float(np.max(train_y))
    return EnsembleModel(forest, sigma_floor, table, seed)


class SpeculativeModel:
    """Ensemble fit whose trees are fit and discarded inside one fused kernel call.

    Used for the thousands of single-use models the planner trains along
    speculated paths: for the same (training set, seed) its predictions are
    bit-identical to EnsembleModel's, but nothing survives the predict call.
    """

    def __init__(self, table: FeatureTable, train_idx, train_y, seed: int,
                 n_trees: int, min_leaf: int):
        global train_call_count
        train_call_count += 1
        n = len(train_idx)
        if n < 2:
            raise InsufficientDataError(f"need at least 2 observations, got {n}")
        self._table = table
        self._idx = np.ascontiguousarray(train_idx, dtype=np.int64)
        self._y = np.ascontiguousarray(train_y, dtype=np.float64)
        self._seed = np.uint64(seed)
        self._n_trees = n_trees
        self._min_leaf = min_leaf
        self.sigma_floor = SIGMA_FLOOR_FRACTION * float(np.max(self._y))
        self.training_seed = seed

    def predict_rows(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t = self._table
        return _kernels.fit_predict_rows(t.ranks, t.values, t.n_distinct,
                                         self._idx, self._y, self._seed,
                                         self._n_trees, self._min_leaf, t.feats,
                                         np.asarray(rows, dtype=np.int64),
                                         self.sigma_floor)


class SpeculativeBatch:
    """K sibling speculative models fit and predicted in one fused kernel call.

    Row b of `ys` is one branch's training target vector; predictions for the
    same (targets, seed) are bit-identical to fitting each model separately.
    """

    def __init__(self, table: FeatureTable, train_idx, ys, seed_list,
                 n_trees: int, min_leaf: int):
        global train_call_count
        train_call_count += len(seed_list)
        self._table = table
        self._idx = np.ascontiguousarray(train_idx, dtype=np.int64)
        self._ys = np.ascontiguousarray(ys, dtype=np.float64)
        self._seeds = np.asarray(seed_list, dtype=np.uint64)
        self._n_trees = n_trees
        self._min_leaf = min_leaf
        self.sigma_floors = SIGMA_FLOOR_FRACTION * self._ys.max(axis=1)

    def predict_rows(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """((K, m) mu, (K, m) sigma) over the given config indices."""
        t = self._table
        return _kernels.fit_predict_batch(t.ranks, t.values, t.n_distinct,
                                          self._idx, self._ys, self._seeds,
                                          self._n_trees, self._min_leaf, t.feats,
                                          np.asarray(rows, dtype=np.int64),
                                          self.sigma_floors)


def make_trainer(space: ConfigSpace, n_trees: int = N_TREES, min_leaf: int = MIN_LEAF):
    """Trainer closure (train_idx, train_y, seed) -> EnsembleModel for one space."""
    table = FeatureTable.for_space(space)
    return lambda idx, y, seed: train_arrays(table, idx, y, seed, n_trees, min_leaf)


def make_speculative_trainer(table: FeatureTable, n_trees: int = N_TREES,
                             min_leaf: int = MIN_LEAF):
    """Trainer closure producing fused-fit SpeculativeModels (planner hot path)."""
    return lambda idx, y, seed: SpeculativeModel(table, idx, y, seed, n_trees, min_leaf)


def make_batch_trainer(table: FeatureTable, n_trees: int = N_TREES,
                       min_leaf: int = MIN_LEAF):
    """Batch trainer closure (train_idx, ys, seeds) -> SpeculativeBatch."""
    return lambda idx, ys, seed_list: SpeculativeBatch(table, idx, ys, seed_list,
                                                       n_trees, min_leaf)


def batch_adapter(trainer):
    """Wrap a single-model trainer as a batch trainer (stub-injection path)."""

    class _Adapter:
        def __init__(self, idx, ys, seed_list):
            self.models = [trainer(idx, ys[b], seed_list[b]) for b in range(len(seed_list))]
            self.sigma_floors = np.array([m.sigma_floor for m in self.models])

        def predict_rows(self, rows):
            outs = [m.predict_rows(rows) for m in self.models]
            return (np.stack([o[0] for o in outs]), np.stack([o[1] for o in outs]))

    return _Adapter


def train(training: TrainingSet, space: ConfigSpace, seed: int) -> EnsembleModel:
    idx = np.array([c.index for c in training.configs], dtype=np.int64)
    y = np.array(training.costs, dtype=np.float64)
    return train_arrays(FeatureTable.for_space(space), idx, y, seed)


def predict(model: EnsembleModel, x: Configuration) -> GaussianPrediction:
    mu, sd = model.predict_rows(np.array([x.index]))
    return GaussianPrediction(float(mu[0]), float(sd[0]))


def prob_below(model: EnsembleModel, x: Configuration, threshold: float) -> float:
    """P(cost(x) <= threshold) under the Gaussian predictive."""
    pred = predict(model, x)
    return float(ndtr((threshold - pred.mean) / pred.std))
