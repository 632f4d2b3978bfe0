"""Command-line interface.

Subcommands: optimize (single run), experiment (seeded batch from a JSON
spec), disjoint (app-vs-cloud two-stage analysis), gen-synthetic (emit a
dataset CSV), validate (dataset lint). Setup errors exit nonzero with a
one-line diagnostic; output files are written atomically so partial results
never appear.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, optimizer, seeds
from .oracle import load_dataset, save_dataset
from .planner import PlannerConfig
from .synthetic import SyntheticSpec, default_spec, generate_synthetic, separable_spec


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _dataset_from_args(args) -> tuple:
    if args.dataset is not None:
        ds = load_dataset(args.dataset)
    else:
        if args.synthetic_spec is not None:
            spec = SyntheticSpec.from_dict(json.loads(Path(args.synthetic_spec).read_text()))
        elif getattr(args, "separable", False):
            spec = separable_spec()
        else:
            spec = default_spec()
        ds = generate_synthetic(spec, args.synthetic_seed)
    return ds


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="dataset CSV path")
    p.add_argument("--synthetic-spec", help="JSON file with a synthetic generator spec")
    p.add_argument("--synthetic-seed", type=int, default=0,
                   help="seed for the synthetic generator (default 0)")
    p.add_argument("--separable", action="store_true",
                   help="use the separable (no-interaction) synthetic landscape")


def _add_tmax_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tmax-seconds", type=float, help="absolute runtime constraint")
    p.add_argument("--tmax-fraction", type=float,
                   help="constraint as the fraction of configs that satisfy it (default 0.5)")


def _cmd_optimize(args) -> int:
    ds = _dataset_from_args(args)
    t_max = harness.resolve_tmax(ds, args.tmax_seconds, args.tmax_fraction)
    if ds.best_feasible(t_max) is None:
        raise harness.ExperimentError(f"no configuration satisfies t_max={t_max}")
    budget = math.inf if args.budget is None else args.budget
    policy = optimizer.TimeoutPolicy(args.policy) if args.policy else None
    cfg = PlannerConfig(lookahead=args.la, quad_nodes=args.quad_nodes,
                        discount=args.gamma,
                        reward_stop_fraction=args.reward_stop_fraction)
    if args.method == "rnd":
        result = optimizer.optimize_random(ds, t_max, budget, args.seed)
    elif args.method == "bo":
        result = optimizer.optimize_greedy(
            ds, t_max, budget, policy or optimizer.TimeoutPolicy.NONE, args.seed,
            args.n_bootstrap, reward_stop_fraction=args.reward_stop_fraction)
    else:
        if args.method == "bo-la":
            policy = optimizer.TimeoutPolicy.NONE
        elif policy is None:
            policy = optimizer.TimeoutPolicy.TRUNCATED_GAUSSIAN
        result = optimizer.optimize(ds, t_max, budget, cfg, policy, args.seed,
                                    args.n_bootstrap)

    opt_idx, opt_cost = ds.best_feasible(t_max)
    print(f"dataset: {ds.name} ({ds.space.cardinality} configs), t_max={t_max:.3f}s")
    print(f"explored {result.n_explored} configs, total spent {result.total_spent:.4f}")
    if result.recommendation is not None:
        cfg_obj = ds.space.decode(result.recommendation)
        values = {d.name: d.values[lv] for d, lv in zip(ds.space.dimensions, cfg_obj.levels)}
        print(f"recommendation: index {result.recommendation} {values}")
        print(f"  cost {result.recommendation_cost:.6f} "
              f"runtime {result.recommendation_runtime:.2f}s "
              f"CNO {result.recommendation_cost / opt_cost:.4f}")
    else:
        print("recommendation: none (no feasible configuration found)")
    for step in result.trajectory:
        obs = "-" if step.observed_cost is None else f"{step.observed_cost:.4f}"
        cno = "-" if step.cno is None else f"{step.cno:.3f}"
        print(f"  [{step.phase:9s} {step.iteration:3d}] config {step.config_index:4d} "
              f"spent {step.spent_cost:.4f} observed {obs} "
              f"{'TIMEOUT ' if step.timed_out else ''}cno {cno}")
    if args.out:
        payload = {
            "status": result.status,
            "recommendation": result.recommendation,
            "recommendation_cost": result.recommendation_cost,
            "cno": (result.recommendation_cost / opt_cost
                    if result.recommendation_cost is not None else None),
            "total_spent": result.total_spent,
            "trajectory": [
                {
                    "phase": s.phase, "iteration": s.iteration,
                    "config_index": s.config_index, "spent_cost": s.spent_cost,
                    "observed_cost": s.observed_cost, "timed_out": s.timed_out,
                    "budget_after": None if math.isinf(s.budget_after) else s.budget_after,
                    "cno": s.cno,
                }
                for s in result.trajectory
            ],
        }
        _write_atomic(Path(args.out), json.dumps(payload, sort_keys=True, indent=1))
    return 0


def _cmd_experiment(args) -> int:
    spec = harness.ExperimentSpec.from_json_file(args.spec)
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    report = harness.run_experiment(spec, threads=args.threads)
    if args.out:
        files = harness.write_report(report, args.out)
        for f in files:
            print(f"wrote {f}")
    else:
        print(report.to_json())
    return 0


def _cmd_disjoint(args) -> int:
    ds = _dataset_from_args(args)
    t_max = math.inf
    if args.tmax_seconds is not None or args.tmax_fraction is not None:
        t_max = harness.resolve_tmax(ds, args.tmax_seconds, args.tmax_fraction)
    app_dims = [a.strip() for a in args.app_dims.split(",") if a.strip()]
    result = harness.disjoint_analysis(ds, app_dims, t_max)
    print(f"references: {result['references']} "
          f"(infeasible: {result['infeasible_references']})")
    print(f"fraction reaching the optimum: {result['fraction_optimal']:.3f}")
    if result["cno_values"]:
        vals = result["cno_values"]
        print(f"CNO p50={vals[len(vals) // 2]:.3f} max={vals[-1]:.3f}")
    if args.out:
        _write_atomic(Path(args.out), json.dumps(result, sort_keys=True, indent=1))
    return 0


def _cmd_gen_synthetic(args) -> int:
    if args.spec is not None:
        spec = SyntheticSpec.from_dict(json.loads(Path(args.spec).read_text()))
    elif args.separable:
        spec = separable_spec()
    else:
        spec = default_spec()
    if args.name:
        spec = replace(spec, name=args.name)
    ds = generate_synthetic(spec, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {args.out} ({ds.space.cardinality} rows) and sidecar metadata")
    return 0


def _cmd_validate(args) -> int:
    ds = load_dataset(args.dataset)
    n_feasible_inf = int(ds.feasible_mask(math.inf).sum())
    print(f"ok: {ds.space.cardinality} configurations, {ds.space.n_dims} dimensions, "
          f"{n_feasible_inf} finished, progress curves: {ds.has_progress}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jobtuner",
        description="Budget-aware look-ahead Bayesian optimization of job "
                    "configurations, replayed against tabular performance datasets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="single optimization run")
    _add_dataset_args(p)
    _add_tmax_args(p)
    p.add_argument("--method", choices=harness.METHODS, default="lynceus")
    p.add_argument("--policy", choices=[x.value for x in optimizer.TimeoutPolicy],
                   help="timeout policy (default: tg for lynceus, none otherwise)")
    p.add_argument("--la", type=int, default=2, help="look-ahead depth (default 2)")
    p.add_argument("--quad-nodes", type=int, default=3,
                   help="Gauss-Hermite nodes per branch (default 3)")
    p.add_argument("--gamma", type=float, default=0.9, help="reward discount (default 0.9)")
    p.add_argument("--reward-stop-fraction", type=float, default=0.01)
    p.add_argument("--budget", type=float, help="exploration budget (default unbounded)")
    p.add_argument("--n-bootstrap", type=int,
                   help="initial LHS samples (default max(3%% of configs, dims))")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; unused")
    p.add_argument("--out", help="write the run as JSON")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("experiment", help="seeded batch of runs from a JSON spec")
    p.add_argument("spec", help="experiment spec JSON file")
    p.add_argument("--seed", type=int, help="override the spec's master seed")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="output directory (default: print JSON to stdout)")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("disjoint", help="two-stage app/cloud optimization analysis")
    _add_dataset_args(p)
    _add_tmax_args(p)
    p.add_argument("--app-dims", required=True,
                   help="comma-separated application dimension names")
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; unused")
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; unused")
    p.add_argument("--out", help="write the analysis as JSON")
    p.set_defaults(func=_cmd_disjoint)

    p = sub.add_parser("gen-synthetic", help="emit a synthetic dataset CSV")
    p.add_argument("--spec", help="JSON file with a synthetic generator spec")
    p.add_argument("--separable", action="store_true",
                   help="no-interaction control landscape")
    p.add_argument("--name", help="dataset name recorded in the sidecar")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; unused")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("validate", help="lint a dataset file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; unused")
    p.add_argument("--threads", type=int, default=1, help="accepted for symmetry; unused")
    p.add_argument("--out", help="accepted for symmetry; unused")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
