import math

import numpy as np
import pytest

from jobtuner.oracle import DatasetError, load_dataset, save_dataset
from jobtuner.synthetic import default_spec, generate_synthetic

from conftest import make_toy_dataset


@pytest.fixture(scope="module")
def csv384(tmp_path_factory, bench_dataset):
    path = tmp_path_factory.mktemp("data") / "bench.csv"
    save_dataset(bench_dataset, path)
    return path


def test_load_full_table(csv384):
    ds = load_dataset(csv384)
    assert ds.space.cardinality == 384
    assert ds.space.n_dims == 5


def test_load_reserialize_equivalent(csv384, tmp_path):
    ds = load_dataset(csv384)
    again = tmp_path / "again.csv"
    save_dataset(ds, again)
    ds2 = load_dataset(again)
    assert np.array_equal(ds.runtimes, ds2.runtimes)
    assert np.array_equal(ds.unit_prices, ds2.unit_prices)
    assert np.array_equal(ds.finished, ds2.finished)
    assert ds.space == ds2.space
    assert ds.progress == ds2.progress


def _with_sidecar(csv384, target):
    sidecar = csv384.with_suffix(".meta.json")
    target.with_suffix(".meta.json").write_text(sidecar.read_text())
    return target


def test_missing_row_names_index(csv384, tmp_path):
    lines = csv384.read_text().splitlines()
    victim = 5  # drop the row for configuration index 4 (line 1 is the header)
    broken = _with_sidecar(csv384, tmp_path / "missing.csv")
    broken.write_text("\n".join(lines[:victim] + lines[victim + 1:]) + "\n")
    with pytest.raises(DatasetError, match="missing configuration index 4"):
        load_dataset(broken)


def test_duplicate_row_names_index(csv384, tmp_path):
    lines = csv384.read_text().splitlines()
    broken = _with_sidecar(csv384, tmp_path / "dup.csv")
    broken.write_text("\n".join(lines + [lines[3]]) + "\n")
    with pytest.raises(DatasetError, match="duplicate configuration index 2"):
        load_dataset(broken)


def test_non_positive_runtime_rejected(csv384, tmp_path):
    lines = csv384.read_text().splitlines()
    parts = lines[1].split(",")
    parts[5] = "-1.0"
    broken = _with_sidecar(csv384, tmp_path / "neg.csv")
    broken.write_text("\n".join([lines[0], ",".join(parts)] + lines[2:]) + "\n")
    with pytest.raises(DatasetError, match="row 2"):
        load_dataset(broken)


def test_query_cost_is_runtime_times_price(bench_dataset):
    for i in (0, 100, 383):
        cfg = bench_dataset.space.decode(i)
        runtime, price, cost, _ = bench_dataset.query(cfg)
        assert cost == runtime * price


def test_query_deterministic(bench_dataset):
    cfg = bench_dataset.space.decode(42)
    assert bench_dataset.query(cfg) == bench_dataset.query(cfg)


def test_best_feasible_matches_exhaustive_scan(bench_dataset):
    t_max = float(np.median(bench_dataset.runtimes))
    best = bench_dataset.best_feasible(t_max)
    assert best is not None
    # independent scan
    expected_idx, expected_cost = None, math.inf
    for i in range(bench_dataset.space.cardinality):
        r, p, c, fin = bench_dataset.query(bench_dataset.space.decode(i))
        if fin and r <= t_max and c < expected_cost:
            expected_idx, expected_cost = i, c
    assert best == (expected_idx, expected_cost)


def test_query_partial_full_run():
    ds = make_toy_dataset([10.0, 20.0], [0.5, 0.25])
    cfg = ds.space.decode(0)
    spent, _ = ds.query_partial(cfg, 100.0)
    assert spent == ds.query(cfg)[2]


def test_query_partial_half_run():
    ds = make_toy_dataset([10.0], [0.5])
    spent, _ = ds.query_partial(ds.space.decode(0), 5.0)
    assert spent == pytest.approx(2.5)


def test_query_partial_progress_breakpoints(bench_dataset):
    cfg = bench_dataset.space.decode(7)
    curve = bench_dataset.progress[7]
    for t, frac in curve:
        _, prog = bench_dataset.query_partial(cfg, t)
        assert prog == pytest.approx(frac, abs=1e-12)


def test_partial_cost_at_runtime_equals_full(bench_dataset):
    for i in (3, 77, 300):
        cfg = bench_dataset.space.decode(i)
        runtime, _, cost, _ = bench_dataset.query(cfg)
        spent, _ = bench_dataset.query_partial(cfg, runtime)
        assert spent == pytest.approx(cost, rel=1e-12)


def test_unit_price_converted_from_hourly(csv384):
    ds = load_dataset(csv384)
    # default spec prices the smallest VM type at 0.023 $/h per VM
    lm = ds.space.level_matrix()
    names = [d.name for d in ds.space.dimensions]
    vm_j, cnt_j = names.index("vm_type"), names.index("n_vms")
    rows = np.flatnonzero((lm[:, vm_j] == 0) & (lm[:, cnt_j] == 0))
    assert ds.unit_prices[rows[0]] == pytest.approx(0.023 / 3600.0)
