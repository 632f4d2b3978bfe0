import warnings

import numpy as np
import pytest

from jobtuner import _kernels
from jobtuner.oracle import Dataset
from jobtuner.space import ConfigSpace, Dimension
from jobtuner.synthetic import default_spec, generate_synthetic


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    _kernels.warmup()


@pytest.fixture(scope="session")
def space384():
    """Five dimensions of sizes [3, 2, 2, 4, 8] (384 configurations)."""
    return ConfigSpace(default_spec().dims)


@pytest.fixture(scope="session")
def small_space():
    return ConfigSpace([
        Dimension("alpha", (0.1, 0.2, 0.3)),
        Dimension("mode", ("a", "b"), numeric=False),
        Dimension("nodes", (1.0, 2.0, 4.0, 8.0)),
    ])


@pytest.fixture(scope="session")
def bench_dataset():
    """Default synthetic dataset used across optimizer/harness tests."""
    return generate_synthetic(default_spec(), 0)


def make_toy_dataset(runtimes, prices_per_s, finished=None, n_levels=None):
    """1-D dataset with one configuration per runtime entry."""
    n = len(runtimes)
    space = ConfigSpace([Dimension("x", tuple(float(i) for i in range(n)))])
    if finished is None:
        finished = [True] * n
    return Dataset(space, np.asarray(runtimes, float), np.asarray(prices_per_s, float),
                   np.asarray(finished, bool), name="toy")
