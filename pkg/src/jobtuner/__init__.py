"""Budget-aware look-ahead Bayesian optimization for cloud job configurations,
replayed against tabular performance datasets."""

from ._kernels import BACKEND
from .acquisition import (
    Incumbent,
    constraint_probability,
    ei_constrained,
    ei_per_dollar,
    expected_improvement,
    incumbent,
)
from .harness import (
    ExperimentReport,
    ExperimentSpec,
    disjoint_analysis,
    resolve_tmax,
    run_experiment,
    write_report,
)
from .oracle import Dataset, DatasetError, JobRecord, load_dataset, save_dataset
from .optimizer import (
    OptimizeResult,
    RunOutcome,
    TimeoutPolicy,
    default_bootstrap_count,
    lhs_bootstrap,
    optimize,
    optimize_greedy,
    optimize_random,
    run_with_timeout,
    truncated_gaussian_mean,
)
from .planner import (
    PathScore,
    PlannerConfig,
    QuadratureRule,
    gauss_hermite,
    gauss_hermite_rule,
)
from .regressor import EnsembleModel, GaussianPrediction, TrainingSet, predict, prob_below, train
from .space import ConfigSpace, Configuration, Dimension, SpaceError, decode, encode, featurize
from .synthetic import SyntheticSpec, default_spec, generate_synthetic, separable_spec

__version__ = "0.1.0"
