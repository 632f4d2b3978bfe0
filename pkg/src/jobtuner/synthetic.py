"""Synthetic performance-table generator.

Produces complete datasets with the qualitative shape of real tuning
landscapes: a smooth log-runtime response (per-dimension convex bowls plus
application x cloud interaction terms), multiplicative log-normal noise, a
per-VM-type price table, and a hard data-collection runtime cutoff. With the
interaction and noise terms zeroed the landscape is multiplicatively
separable, which makes disjoint app/cloud optimization exactly optimal; use
that variant as a control.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .oracle import Dataset
from .space import ConfigSpace, Dimension


@dataclass(frozen=True)
class SyntheticSpec:
    dims: tuple
    app_dims: tuple  # dimension names that are application parameters
    vm_type_dim: str
    vm_prices_per_h: dict  # VM-type level label -> $/h per VM
    vm_count_dim: str | None = None
    base_runtime_s: float = 25.0
    bowl_strength: float = 1.0
    interaction_strength: float = 0.5
    noise_level: float = 0.12
    runtime_cutoff_s: float = 600.0
    with_progress: bool = True
    name: str = "synthetic"

    def __post_init__(self):
        names = [d.name for d in self.dims]
        for a in self.app_dims:
            if a not in names:
                raise ValueError(f"app dimension {a!r} not in space")
        if self.vm_type_dim not in names:
            raise ValueError(f"vm_type_dim {self.vm_type_dim!r} not in space")
        if self.vm_count_dim is not None and self.vm_count_dim not in names:
            raise ValueError(f"vm_count_dim {self.vm_count_dim!r} not in space")
        vm_dim = next(d for d in self.dims if d.name == self.vm_type_dim)
        for v in vm_dim.values:
            if v not in self.vm_prices_per_h:
                raise ValueError(f"no price for VM type {v!r}")

    @property
    def cloud_dims(self) -> tuple:
        return tuple(d.name for d in self.dims if d.name not in self.app_dims)

    def to_dict(self) -> dict:
        return {
            "dims": [
                {"name": d.name, "numeric": d.numeric, "values": list(d.values)}
                for d in self.dims
            ],
            "app_dims": list(self.app_dims),
            "vm_type_dim": self.vm_type_dim,
            "vm_count_dim": self.vm_count_dim,
            "vm_prices_per_h": dict(self.vm_prices_per_h),
            "base_runtime_s": self.base_runtime_s,
            "bowl_strength": self.bowl_strength,
            "interaction_strength": self.interaction_strength,
            "noise_level": self.noise_level,
            "runtime_cutoff_s": self.runtime_cutoff_s,
            "with_progress": self.with_progress,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        dims = tuple(
            Dimension(
                x["name"],
                tuple(float(v) if x.get("numeric", True) else str(v) for v in x["values"]),
                bool(x.get("numeric", True)),
            )
            for x in d["dims"]
        )
        kwargs = {k: v for k, v in d.items() if k != "dims"}
        kwargs["app_dims"] = tuple(kwargs.get("app_dims", ()))
        return cls(dims=dims, **kwargs)


def default_spec() -> SyntheticSpec:
    """Five dimensions of sizes [3, 2, 2, 4, 8]: 384 configurations."""
    dims = (
        Dimension("learning_rate", (1e-5, 1e-4, 1e-3), numeric=True),
        Dimension("batch_size", (16.0, 256.0), numeric=True),
        Dimension("train_mode", ("async", "sync"), numeric=False),
        Dimension("vm_type", ("small", "medium", "xlarge", "2xlarge"), numeric=False),
        Dimension("n_vms", (1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0), numeric=True),
    )
    return SyntheticSpec(
        dims=dims,
        app_dims=("learning_rate", "batch_size", "train_mode"),
        vm_type_dim="vm_type",
        vm_count_dim="n_vms",
        vm_prices_per_h={"small": 0.023, "medium": 0.046, "xlarge": 0.1856, "2xlarge": 0.3712},
    )


def separable_spec() -> SyntheticSpec:
    """Default shape with interactions and noise removed (disjoint-optimal control)."""
    return replace(default_spec(), interaction_strength=0.0, noise_level=0.0,
                   name="synthetic-separable")


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Deterministic dataset for (spec, seed); same inputs give bit-identical tables."""
    space = ConfigSpace(spec.dims)
    n = space.cardinality
    if n == 1 or (spec.noise_level == 0.0 and spec.interaction_strength == 0.0):
        warnings.warn("degenerate synthetic spec (trivial or fully separable landscape)",
                      stacklevel=2)
    rng = np.random.Generator(np.random.PCG64(seed))
    lm = space.level_matrix()
    d = space.n_dims

    # per-dimension main effects on log-runtime
    log_rt = np.full(n, np.log(spec.base_runtime_s))
    centered = []  # per-dim, per-level factor in [-1, 1] used by interactions
    for j, dim in enumerate(space.dimensions):
        strength = spec.bowl_strength * (0.75 + 0.5 * rng.random())
        levels = np.arange(dim.n_levels)
        u = levels / max(dim.n_levels - 1, 1)
        if dim.numeric:
            m = rng.random()
            effect = strength * (u - m) ** 2
            centered.append(2.0 * (u - 0.5))
        else:
            effect = strength * rng.random(dim.n_levels)
            centered.append(rng.uniform(-1.0, 1.0, dim.n_levels))
        log_rt += effect[lm[:, j]]

    # application x cloud interaction terms
    app_idx = [j for j, dim in enumerate(space.dimensions) if dim.name in spec.app_dims]
    cloud_idx = [j for j in range(d) if j not in app_idx]
    for ja in app_idx:
        for jc in cloud_idx:
            w = rng.normal(0.0, 1.0) * spec.interaction_strength
            log_rt += w * centered[ja][lm[:, ja]] * centered[jc][lm[:, jc]]

    log_rt += spec.noise_level * rng.standard_normal(n)

    raw_runtime = np.exp(log_rt)
    runtimes = np.minimum(raw_runtime, spec.runtime_cutoff_s)
    finished = raw_runtime <= spec.runtime_cutoff_s

    vm_j = next(j for j, dim in enumerate(space.dimensions) if dim.name == spec.vm_type_dim)
    vm_dim = space.dimensions[vm_j]
    per_vm = np.array([spec.vm_prices_per_h[v] for v in vm_dim.values]) / 3600.0
    prices = per_vm[lm[:, vm_j]]
    if spec.vm_count_dim is not None:
        cnt_j = next(j for j, dim in enumerate(space.dimensions)
                     if dim.name == spec.vm_count_dim)
        counts = np.array([float(v) for v in space.dimensions[cnt_j].values])
        prices = prices * counts[lm[:, cnt_j]]

    progress = None
    if spec.with_progress:
        kappa = rng.uniform(0.6, 1.6, n)
        progress = []
        for i in range(n):
            ts = np.linspace(0.0, runtimes[i], 9)
            fr = (ts / raw_runtime[i]) ** kappa[i]
            progress.append(tuple((float(t), min(float(f), 1.0)) for t, f in zip(ts, fr)))

    return Dataset(space, runtimes, prices, finished, progress, name=spec.name)
