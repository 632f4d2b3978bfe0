import numpy as np
import pytest

from jobtuner.synthetic import SyntheticSpec, default_spec, generate_synthetic, separable_spec


def test_default_shape_is_384():
    sizes = [d.n_levels for d in default_spec().dims]
    assert sizes == [3, 2, 2, 4, 8]
    assert generate_synthetic(default_spec(), 3).space.cardinality == 384


def test_deterministic_bit_identical():
    a = generate_synthetic(default_spec(), 11)
    b = generate_synthetic(default_spec(), 11)
    assert np.array_equal(a.runtimes, b.runtimes)
    assert np.array_equal(a.unit_prices, b.unit_prices)
    assert np.array_equal(a.finished, b.finished)
    assert a.progress == b.progress


def test_different_seeds_differ():
    a = generate_synthetic(default_spec(), 1)
    b = generate_synthetic(default_spec(), 2)
    assert not np.array_equal(a.runtimes, b.runtimes)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_skewed_landscape(seed):
    # few close-to-optimal configurations: at most 10% within 2x of the optimum
    ds = generate_synthetic(default_spec(), seed)
    t_max = float(np.sort(ds.runtimes)[ds.space.cardinality // 2 - 1])
    best = ds.best_feasible(t_max)
    assert best is not None
    within = (ds.costs <= 2.0 * best[1]).sum()
    assert within <= 0.10 * ds.space.cardinality


def test_separable_spec_warns_degenerate():
    with pytest.warns(UserWarning, match="degenerate"):
        generate_synthetic(separable_spec(), 0)


def test_prices_follow_vm_table():
    spec = default_spec()
    ds = generate_synthetic(spec, 0)
    lm = ds.space.level_matrix()
    names = [d.name for d in ds.space.dimensions]
    vm_j, cnt_j = names.index("vm_type"), names.index("n_vms")
    vm_dim = ds.space.dimensions[vm_j]
    counts = [float(v) for v in ds.space.dimensions[cnt_j].values]
    for i in (0, 50, 250, 383):
        expected = spec.vm_prices_per_h[vm_dim.values[lm[i, vm_j]]] / 3600.0
        expected *= counts[lm[i, cnt_j]]
        assert ds.unit_prices[i] == pytest.approx(expected, rel=1e-12)


def test_cutoff_marks_unfinished():
    ds = generate_synthetic(default_spec(), 0)
    assert (~ds.finished).any()
    assert np.all(ds.runtimes[~ds.finished] == default_spec().runtime_cutoff_s)
    assert np.all(ds.runtimes <= default_spec().runtime_cutoff_s)


def test_progress_curves_monotone_and_anchored():
    ds = generate_synthetic(default_spec(), 0)
    for i in (0, 17, 383):
        curve = ds.progress[i]
        times = [t for t, _ in curve]
        fracs = [f for _, f in curve]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert all(b >= a for a, b in zip(fracs, fracs[1:]))
        assert times[-1] == pytest.approx(ds.runtimes[i])
        if ds.finished[i]:
            assert fracs[-1] == pytest.approx(1.0)
        else:
            assert fracs[-1] < 1.0


def test_spec_dict_roundtrip():
    spec = default_spec()
    again = SyntheticSpec.from_dict(spec.to_dict())
    assert again == spec
