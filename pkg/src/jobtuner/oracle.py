"""Ground-truth job-performance source for simulation.

Datasets are complete tables: exactly one record (runtime, unit price,
finished flag, optional progress curve) per configuration of a discrete
space. The CSV schema is one `p:<name>` column per dimension, then
`runtime_s`, `price_per_h`, optional `finished` (0/1) and `progress`
(semicolon-separated `time:frac` pairs). Level sets are inferred from the
distinct values per column unless a `<stem>.meta.json` sidecar pins them.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .space import ConfigSpace, Configuration, Dimension, SpaceError


class DatasetError(ValueError):
    """Malformed or incomplete dataset file."""


@dataclass(frozen=True)
class JobRecord:
    config: Configuration
    runtime: float  # seconds
    unit_price: float  # currency per second
    finished: bool
    progress_curve: tuple | None = None  # ((time_s, fraction), ...)

    @property
    def cost(self) -> float:
        return self.runtime * self.unit_price


class Dataset:
    """Immutable table of one JobRecord per configuration index."""

    def __init__(self, space: ConfigSpace, runtimes, unit_prices, finished,
                 progress=None, name: str = "dataset"):
        n = space.cardinality
        self.space = space
        self.name = name
        self.runtimes = np.asarray(runtimes, dtype=np.float64)
        self.unit_prices = np.asarray(unit_prices, dtype=np.float64)
        self.finished = np.asarray(finished, dtype=bool)
        self.progress = progress  # list of curves (or None), len n
        for arr, label in ((self.runtimes, "runtimes"), (self.unit_prices, "prices")):
            if arr.shape != (n,):
                raise DatasetError(f"{label} must have one entry per configuration")
            if not (arr > 0).all():
                raise DatasetError(f"all {label} must be positive")
        if self.finished.shape != (n,):
            raise DatasetError("finished must have one entry per configuration")
        if progress is not None and len(progress) != n:
            raise DatasetError("progress must have one entry per configuration")
        self.costs = self.runtimes * self.unit_prices
        self.costs.setflags(write=False)
        self.runtimes.setflags(write=False)
        self.unit_prices.setflags(write=False)
        self.finished.setflags(write=False)

    @property
    def has_progress(self) -> bool:
        return self.progress is not None and all(c is not None for c in self.progress)

    def record(self, index: int) -> JobRecord:
        curve = self.progress[index] if self.progress is not None else None
        return JobRecord(
            config=self.space.decode(index),
            runtime=float(self.runtimes[index]),
            unit_price=float(self.unit_prices[index]),
            finished=bool(self.finished[index]),
            progress_curve=curve,
        )

    def query(self, x: Configuration) -> tuple[float, float, float, bool]:
        """(runtime, unit_price, cost, finished) for configuration x. Pure lookup."""
        i = x.index
        return (
            float(self.runtimes[i]),
            float(self.unit_prices[i]),
            float(self.costs[i]),
            bool(self.finished[i]),
        )

    def query_partial(self, x: Configuration, t: float) -> tuple[float, float | None]:
        """Cost spent after running x for t seconds, plus interpolated progress.

        Progress is None when the dataset carries no curve for x.
        """
        if t < 0:
            raise ValueError("t must be >= 0")
        i = x.index
        spent = min(t, float(self.runtimes[i])) * float(self.unit_prices[i])
        curve = self.progress[i] if self.progress is not None else None
        if curve is None:
            return spent, None
        times = np.array([p[0] for p in curve])
        fracs = np.array([p[1] for p in curve])
        return spent, float(np.interp(t, times, fracs))

    def feasible_mask(self, t_max: float) -> np.ndarray:
        """Configurations that finished within the runtime constraint."""
        return self.finished & (self.runtimes <= t_max)

    def best_feasible(self, t_max: float) -> tuple[int, float] | None:
        """(index, cost) of the cheapest feasible configuration by exhaustive scan."""
        mask = self.feasible_mask(t_max)
        if not mask.any():
            return None
        costs = np.where(mask, self.costs, np.inf)
        idx = int(np.argmin(costs))
        return idx, float(costs[idx])


def _parse_progress(text: str, row_no: int):
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            t_str, f_str = chunk.split(":")
            pairs.append((float(t_str), float(f_str)))
        except ValueError:
            raise DatasetError(f"row {row_no}: malformed progress entry {chunk!r}")
    times = [p[0] for p in pairs]
    fracs = [p[1] for p in pairs]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DatasetError(f"row {row_no}: progress times must be strictly increasing")
    if any(b < a for a, b in zip(fracs, fracs[1:])):
        raise DatasetError(f"row {row_no}: progress must be non-decreasing")
    if any(not 0.0 <= f <= 1.0 for f in fracs):
        raise DatasetError(f"row {row_no}: progress fractions must be in [0, 1]")
    return tuple(pairs)


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def _space_from_sidecar(meta: dict) -> ConfigSpace:
    dims = []
    for d in meta["dimensions"]:
        numeric = bool(d.get("numeric", True))
        values = tuple(float(v) if numeric else str(v) for v in d["values"])
        dims.append(Dimension(d["name"], values, numeric))
    return ConfigSpace(dims)


def _infer_space(param_cols: list[str], rows: list[dict]) -> ConfigSpace:
    dims = []
    for col in param_cols:
        raw = [r[col] for r in rows]
        distinct = list(dict.fromkeys(raw))
        try:
            values = tuple(sorted({float(v) for v in distinct}))
            dims.append(Dimension(col[2:], values, numeric=True))
        except ValueError:
            dims.append(Dimension(col[2:], tuple(sorted(set(distinct))), numeric=False))
    return ConfigSpace(dims)


def load_dataset(path) -> Dataset:
    """Load and validate a dataset CSV (plus optional sidecar metadata)."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DatasetError("empty file (no header row)")
        fields = list(reader.fieldnames)
        rows = list(reader)
    param_cols = [c for c in fields if c.startswith("p:")]
    if not param_cols:
        raise DatasetError("header declares no p:<name> parameter columns")
    for required in ("runtime_s", "price_per_h"):
        if required not in fields:
            raise DatasetError(f"header missing required column {required!r}")

    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        space = _space_from_sidecar(meta)
        if [f"p:{d.name}" for d in space.dimensions] != param_cols:
            raise DatasetError("sidecar dimensions do not match CSV parameter columns")
    else:
        space = _infer_space(param_cols, rows)

    n = space.cardinality
    runtimes = np.zeros(n)
    prices = np.zeros(n)
    finished = np.ones(n, dtype=bool)
    progress: list = [None] * n
    seen = np.zeros(n, dtype=bool)
    any_progress = False

    for row_pos, row in enumerate(rows):
        row_no = row_pos + 2  # header is line 1
        levels = []
        for dim, col in zip(space.dimensions, param_cols):
            try:
                levels.append(dim.level_of(row[col]))
            except SpaceError as exc:
                raise DatasetError(f"row {row_no}: {exc}")
        cfg = space.encode(levels)
        if seen[cfg.index]:
            raise DatasetError(f"row {row_no}: duplicate configuration index {cfg.index}")
        seen[cfg.index] = True
        try:
            runtime = float(row["runtime_s"])
            price_h = float(row["price_per_h"])
        except (TypeError, ValueError):
            raise DatasetError(f"row {row_no}: non-numeric runtime or price")
        if runtime <= 0 or price_h <= 0:
            raise DatasetError(f"row {row_no}: runtime and price must be positive")
        runtimes[cfg.index] = runtime
        prices[cfg.index] = price_h / 3600.0
        if "finished" in row and row["finished"] not in (None, ""):
            if row["finished"] not in ("0", "1"):
                raise DatasetError(f"row {row_no}: finished must be 0 or 1")
            finished[cfg.index] = row["finished"] == "1"
        if "progress" in row and row["progress"]:
            curve = _parse_progress(row["progress"], row_no)
            if curve and abs(curve[-1][0] - runtime) > 1e-9 * max(1.0, runtime):
                raise DatasetError(f"row {row_no}: final progress time must equal runtime")
            progress[cfg.index] = curve
            any_progress = True

    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise DatasetError(f"missing configuration index {missing} "
                           f"({(~seen).sum()} of {n} rows absent)")
    return Dataset(space, runtimes, prices, finished,
                   progress if any_progress else None, name=path.stem)


def save_dataset(dataset: Dataset, path, sidecar: bool = True) -> None:
    """Write a dataset back out in the CSV schema (rows in index order)."""
    path = Path(path)
    space = dataset.space
    lm = space.level_matrix()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [f"p:{d.name}" for d in space.dimensions]
        header += ["runtime_s", "price_per_h", "finished"]
        if dataset.progress is not None:
            header.append("progress")
        writer.writerow(header)
        for i in range(space.cardinality):
            row = [space.dimensions[d].values[lm[i, d]] for d in range(space.n_dims)]
            row += [repr(float(dataset.runtimes[i])),
                    repr(float(dataset.unit_prices[i] * 3600.0)),
                    int(dataset.finished[i])]
            if dataset.progress is not None:
                curve = dataset.progress[i]
                row.append(";".join(f"{t!r}:{f!r}" for t, f in curve) if curve else "")
            writer.writerow(row)
    if sidecar:
        meta = {
            "name": dataset.name,
            "dimensions": [
                {"name": d.name, "numeric": d.numeric, "values": list(d.values)}
                for d in space.dimensions
            ],
        }
        _sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
