"""Experiment runner: seeded batches of optimizer runs, CNO/exploration-cost
aggregation (percentile curves, cost-to-threshold CDFs), and the disjoint
app-vs-cloud optimization analysis. Reports are machine-readable (JSON plus
CSV tables) and deterministic for a given spec and master seed, regardless of
how many worker processes execute the runs.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import optimizer, seeds
from .oracle import Dataset, load_dataset
from .planner import PlannerConfig
from .synthetic import SyntheticSpec, default_spec, generate_synthetic

METHODS = ("lynceus", "bo-la", "bo", "rnd")
CDF_THRESHOLDS = (2.0, 1.1, 1.0)

CONVENTIONS = {
    "report_percentiles": "linear interpolation",
    "t_max_quantile": "nearest-rank",
    "disjoint_references": "one per full assignment of the cloud dimensions",
    "bootstrap_cost": "folded into step 0 of every cost axis",
}


class ExperimentError(ValueError):
    """Invalid experiment spec or infeasible setup."""


@dataclass(frozen=True)
class ExperimentSpec:
    method: str
    dataset_path: str | None = None
    synthetic: dict | None = None  # SyntheticSpec.to_dict payload
    synthetic_seed: int = 0
    lookahead: int = 2
    quad_nodes: int = 3
    discount: float = 0.9
    reward_stop_fraction: float = 0.01
    budget_confidence: float = 0.99
    policy: str | None = None
    t_max_seconds: float | None = None
    t_max_fraction: float | None = None
    budget: float | None = None  # None -> unbounded
    n_bootstrap: int | None = None
    max_explorations: int | None = None
    runs: int = 100
    master_seed: int = 0
    name: str = "experiment"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ExperimentError(f"unknown method {self.method!r} (one of {METHODS})")
        if (self.dataset_path is None) == (self.synthetic is None):
            raise ExperimentError("specify exactly one of dataset_path or synthetic")
        if self.runs < 1:
            raise ExperimentError("runs must be >= 1")
        if self.t_max_seconds is not None and self.t_max_fraction is not None:
            raise ExperimentError("specify at most one of t_max_seconds/t_max_fraction")
        if self.t_max_fraction is not None and not 0.0 < self.t_max_fraction <= 1.0:
            raise ExperimentError("t_max_fraction must be in (0, 1]")
        if self.budget is not None and self.budget <= 0:
            raise ExperimentError("budget must be positive (omit for unbounded)")
        if self.max_explorations is not None and self.max_explorations < 0:
            raise ExperimentError("max_explorations must be >= 0")
        self.effective_policy()  # validates the method/policy combination

    def effective_policy(self) -> optimizer.TimeoutPolicy:
        raw = self.policy
        if self.method == "rnd":
            if raw not in (None, "none"):
                raise ExperimentError("rnd takes no timeout policy")
            return optimizer.TimeoutPolicy.NONE
        if self.method == "bo-la":
            if raw not in (None, "none"):
                raise ExperimentError("bo-la is the no-timeout look-ahead baseline")
            return optimizer.TimeoutPolicy.NONE
        if raw is None:
            return (optimizer.TimeoutPolicy.TRUNCATED_GAUSSIAN
                    if self.method == "lynceus" else optimizer.TimeoutPolicy.NONE)
        try:
            return optimizer.TimeoutPolicy(raw)
        except ValueError:
            valid = ", ".join(p.value for p in optimizer.TimeoutPolicy)
            raise ExperimentError(f"unknown policy {raw!r} (one of {valid})")

    def planner_config(self) -> PlannerConfig:
        return PlannerConfig(
            lookahead=self.lookahead,
            quad_nodes=self.quad_nodes,
            discount=self.discount,
            budget_confidence=self.budget_confidence,
            reward_stop_fraction=self.reward_stop_fraction,
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset_path": self.dataset_path,
            "synthetic": self.synthetic,
            "synthetic_seed": self.synthetic_seed,
            "lookahead": self.lookahead,
            "quad_nodes": self.quad_nodes,
            "discount": self.discount,
            "reward_stop_fraction": self.reward_stop_fraction,
            "budget_confidence": self.budget_confidence,
            "policy": self.policy,
            "t_max_seconds": self.t_max_seconds,
            "t_max_fraction": self.t_max_fraction,
            "budget": self.budget,
            "n_bootstrap": self.n_bootstrap,
            "max_explorations": self.max_explorations,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ExperimentError(f"unknown experiment spec fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def load_for_spec(spec: ExperimentSpec) -> Dataset:
    if spec.dataset_path is not None:
        return load_dataset(spec.dataset_path)
    return generate_synthetic(SyntheticSpec.from_dict(spec.synthetic), spec.synthetic_seed)


def resolve_tmax(dataset: Dataset, seconds: float | None = None,
                 fraction: float | None = None) -> float:
    """Runtime constraint: absolute seconds, or the nearest-rank quantile of the
    dataset runtimes so that (roughly) `fraction` of configurations satisfy it."""
    if seconds is not None and fraction is not None:
        raise ExperimentError("specify at most one of seconds/fraction")
    if seconds is not None:
        if seconds <= 0:
            raise ExperimentError("t_max must be positive")
        return float(seconds)
    if fraction is None:
        fraction = 0.5
    if not 0.0 < fraction <= 1.0:
        raise ExperimentError("t_max fraction must be in (0, 1]")
    runtimes = np.sort(dataset.runtimes)
    rank = max(1, math.ceil(fraction * runtimes.size))
    return float(runtimes[rank - 1])


def _spec_tmax(spec: ExperimentSpec, dataset: Dataset) -> float:
    t_max = resolve_tmax(dataset, spec.t_max_seconds, spec.t_max_fraction)
    if dataset.best_feasible(t_max) is None:
        raise ExperimentError(f"no configuration satisfies t_max={t_max}")
    return t_max


def execute_run(spec: ExperimentSpec, dataset: Dataset, t_max: float,
                run_index: int) -> dict:
    """One seeded optimizer run, reduced to a JSON-friendly record."""
    seed = seeds.derive(spec.master_seed, "run", run_index)
    budget = math.inf if spec.budget is None else spec.budget
    policy = spec.effective_policy()
    if spec.method == "lynceus" or spec.method == "bo-la":
        result = optimizer.optimize(dataset, t_max, budget, spec.planner_config(),
                                    policy, seed, spec.n_bootstrap,
                                    spec.max_explorations)
    elif spec.method == "bo":
        result = optimizer.optimize_greedy(
            dataset, t_max, budget, policy, seed, spec.n_bootstrap,
            spec.max_explorations,
            reward_stop_fraction=spec.reward_stop_fraction,
            budget_confidence=spec.budget_confidence)
    else:
        result = optimizer.optimize_random(dataset, t_max, budget, seed,
                                           spec.max_explorations)

    opt_cost = dataset.best_feasible(t_max)[1]
    # per-step series with the bootstrap folded into the first point
    cum = 0.0
    series_cost: list[float] = []
    series_cno: list[float] = []
    steps_json = []
    for step in result.trajectory:
        cum += step.spent_cost
        cno = step.cno if step.cno is not None else math.inf
        if step.phase == "bootstrap":
            if series_cost:
                series_cost[0] = cum
                series_cno[0] = cno
            else:
                series_cost.append(cum)
                series_cno.append(cno)
        else:
            series_cost.append(cum)
            series_cno.append(cno)
        steps_json.append({
            "phase": step.phase,
            "iteration": step.iteration,
            "config_index": step.config_index,
            "spent_cost": step.spent_cost,
            "observed_cost": step.observed_cost,
            "timed_out": step.timed_out,
            "budget_after": _json_num(step.budget_after),
            "cno": _json_num(cno),
        })
    cost_to = {}
    for threshold in CDF_THRESHOLDS:
        reached = None
        for c, v in zip(series_cost, series_cno):
            if v <= threshold:
                reached = c
                break
        cost_to[str(threshold)] = reached
    return {
        "run_index": run_index,
        "seed": seed,
        "status": result.status,
        "recommendation": result.recommendation,
        "recommendation_cost": result.recommendation_cost,
        "cno": (result.recommendation_cost / opt_cost
                if result.recommendation_cost is not None else None),
        "total_spent": result.total_spent,
        "n_explored": result.n_explored,
        "cost_to_threshold": cost_to,
        "series_cost": series_cost,
        "series_cno": [_json_num(v) for v in series_cno],
        "trajectory": steps_json,
    }


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


_WORKER_CACHE: dict = {}


def _worker_run(spec_json: str, run_index: int) -> dict:
    key = spec_json
    if key not in _WORKER_CACHE:
        spec = ExperimentSpec.from_dict(json.loads(spec_json))
        dataset = load_for_spec(spec)
        _WORKER_CACHE.clear()
        _WORKER_CACHE[key] = (spec, dataset, _spec_tmax(spec, dataset))
    spec, dataset, t_max = _WORKER_CACHE[key]
    return execute_run(spec, dataset, t_max, run_index)


@dataclass
class ExperimentReport:
    metadata: dict
    runs: list
    aggregates: dict

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "runs": self.runs, "aggregates": self.aggregates}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)


def _aggregate(run_records: list, n_runs: int) -> dict:
    max_len = max(len(r["series_cost"]) for r in run_records)
    costs = np.empty((n_runs, max_len))
    cnos = np.empty((n_runs, max_len))
    for i, r in enumerate(run_records):
        sc = r["series_cost"]
        sv = [math.inf if v is None else v for v in r["series_cno"]]
        pad = max_len - len(sc)
        costs[i] = sc + [sc[-1]] * pad  # carry final values forward
        cnos[i] = sv + [sv[-1]] * pad
    curve = {
        "step": list(range(max_len)),
        "cost_p90": [float(np.percentile(costs[:, s], 90)) for s in range(max_len)],
        "cno_p50": [_json_num(np.percentile(cnos[:, s], 50)) for s in range(max_len)],
        "cno_p90": [_json_num(np.percentile(cnos[:, s], 90)) for s in range(max_len)],
    }
    cdfs = {}
    for threshold in CDF_THRESHOLDS:
        vals = [r["cost_to_threshold"][str(threshold)] for r in run_records]
        reached = sorted(v for v in vals if v is not None)
        points = [[c, (i + 1) / n_runs] for i, c in enumerate(reached)]
        cdfs[str(threshold)] = {
            "reached_fraction": len(reached) / n_runs,
            "points": points,
        }
    return {"percentile_curve": curve, "cost_to_cno_cdf": cdfs}


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Execute spec.runs seeded runs (optionally in parallel) and aggregate.

    The report content is a pure function of the spec: per-run seeds derive
    from (master_seed, run index), so the thread count never changes results.
    """
    dataset = load_for_spec(spec)
    t_max = _spec_tmax(spec, dataset)
    if spec.effective_policy() == optimizer.TimeoutPolicy.LINEAR and not dataset.has_progress:
        raise ExperimentError("linear policy needs progress curves in the dataset")

    if threads > 1 and spec.runs > 1:
        spec_json = json.dumps(spec.to_dict(), sort_keys=True)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_worker_run, [spec_json] * spec.runs,
                                    range(spec.runs), chunksize=1))
    else:
        records = [execute_run(spec, dataset, t_max, i) for i in range(spec.runs)]

    records.sort(key=lambda r: r["run_index"])
    opt_idx, opt_cost = dataset.best_feasible(t_max)
    metadata = {
        "spec": spec.to_dict(),
        "dataset_name": dataset.name,
        "cardinality": dataset.space.cardinality,
        "t_max_s": t_max,
        "optimum_config": opt_idx,
        "optimum_cost": opt_cost,
        "conventions": dict(CONVENTIONS),
    }
    return ExperimentReport(metadata, records, _aggregate(records, spec.runs))


def disjoint_analysis(dataset: Dataset, app_dim_names, t_max: float = math.inf) -> dict:
    """Idealized two-stage (application first, then cloud) optimization.

    For every full assignment of the cloud dimensions c-dagger, exhaustively
    find the best feasible application setting there, then exhaustively
    re-optimize the cloud dimensions with those application settings frozen.
    Reports the CDF of the resulting cost normalized by the global optimum.
    """
    space = dataset.space
    names = [d.name for d in space.dimensions]
    app_pos = [names.index(a) for a in app_dim_names]
    if len(app_pos) != len(set(app_pos)):
        raise ValueError("duplicate app dimensions")
    cloud_pos = [j for j in range(space.n_dims) if j not in app_pos]
    if not app_pos or not cloud_pos:
        raise ValueError("app/cloud dimensions must partition the space")

    lm = space.level_matrix()
    feasible = dataset.feasible_mask(t_max)
    if not feasible.any():
        raise ValueError("no feasible configuration under the given t_max")
    costs = np.where(feasible, dataset.costs, np.inf)
    global_opt = float(costs.min())

    cloud_sizes = [space.sizes[j] for j in cloud_pos]
    cloud_key = np.ravel_multi_index([lm[:, j] for j in cloud_pos], cloud_sizes)
    app_sizes = [space.sizes[j] for j in app_pos]
    app_key = np.ravel_multi_index([lm[:, j] for j in app_pos], app_sizes)

    n_refs = int(np.prod(cloud_sizes))
    cnos = []
    infeasible_refs = 0
    for ref in range(n_refs):
        rows = np.flatnonzero(cloud_key == ref)
        ref_costs = costs[rows]
        if not np.isfinite(ref_costs).any():
            infeasible_refs += 1
            continue
        best_app = app_key[rows[int(np.argmin(ref_costs))]]
        stage2 = np.flatnonzero(app_key == best_app)
        final = float(costs[stage2].min())
        cnos.append(final / global_opt)
    cnos.sort()
    n = len(cnos)
    return {
        "references": n_refs,
        "infeasible_references": infeasible_refs,
        "global_optimum_cost": global_opt,
        "cno_values": cnos,
        "cdf": [[v, (i + 1) / n] for i, v in enumerate(cnos)],
        "fraction_optimal": sum(1 for v in cnos if v <= 1.0 + 1e-12) / n if n else 0.0,
    }


def write_report(report: ExperimentReport, out_dir) -> list[Path]:
    """Write report.json plus aggregate CSV tables. Files appear atomically."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def _emit(name: str, text: str):
        tmp = out / (name + ".tmp")
        tmp.write_text(text)
        tmp.replace(out / name)
        written.append(out / name)

    _emit("report.json", report.to_json())
    curve = report.aggregates["percentile_curve"]
    lines = ["step,cost_p90,cno_p50,cno_p90"]
    for i, s in enumerate(curve["step"]):
        row = [str(s)] + [
            "" if curve[k][i] is None else repr(curve[k][i])
            for k in ("cost_p90", "cno_p50", "cno_p90")
        ]
        lines.append(",".join(row))
    _emit("percentile_curve.csv", "\n".join(lines) + "\n")
    lines = ["threshold,cost,fraction"]
    for threshold, cdf in sorted(report.aggregates["cost_to_cno_cdf"].items()):
        for cost, frac in cdf["points"]:
            lines.append(f"{threshold},{cost!r},{frac!r}")
    _emit("cost_to_cno_cdf.csv", "\n".join(lines) + "\n")
    return written
