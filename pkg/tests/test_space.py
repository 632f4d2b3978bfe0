import numpy as np
import pytest
from hypothesis import given, strategies as st

from jobtuner.space import ConfigSpace, Configuration, Dimension, SpaceError


def test_encode_zero_tuple(space384):
    assert space384.encode((0, 0, 0, 0, 0)).index == 0


def test_encode_last_tuple_is_cardinality_minus_one(space384):
    assert space384.cardinality == 384
    cfg = space384.encode((2, 1, 1, 3, 7))
    assert cfg.index == 383


def test_roundtrip_exhaustive(space384):
    for i in range(space384.cardinality):
        cfg = space384.decode(i)
        assert space384.encode(cfg.levels).index == i


@given(st.integers(min_value=0, max_value=383))
def test_roundtrip_random(i):
    space = ConfigSpace([
        Dimension("a", (1.0, 2.0, 3.0)),
        Dimension("b", (1.0, 2.0)),
        Dimension("c", ("x", "y"), numeric=False),
        Dimension("d", (1.0, 2.0, 3.0, 4.0)),
        Dimension("e", tuple(float(v) for v in range(8))),
    ])
    cfg = space.decode(i)
    assert space.encode(cfg.levels) == cfg


def test_encode_out_of_range_names_dimension(small_space):
    with pytest.raises(SpaceError, match="mode"):
        small_space.encode((0, 5, 0))


def test_decode_out_of_range(small_space):
    with pytest.raises(SpaceError):
        small_space.decode(small_space.cardinality)
    with pytest.raises(SpaceError):
        small_space.decode(-1)


def test_featurize_numeric_raw_value():
    space = ConfigSpace([Dimension("learning_rate", (1e-5, 1e-4, 1e-3))])
    vec = space.featurize(space.encode((2,)))
    assert vec.tolist() == [1e-3]


def test_featurize_categorical_one_hot():
    space = ConfigSpace([Dimension("mode", ("sync", "async"), numeric=False)])
    assert space.featurize(space.encode((0,))).tolist() == [1.0, 0.0]
    assert space.featurize(space.encode((1,))).tolist() == [0.0, 1.0]


def test_featurize_injective(small_space):
    feats = small_space.feature_matrix()
    assert len(np.unique(feats, axis=0)) == small_space.cardinality


def test_dimension_order_matters():
    a = ConfigSpace([Dimension("a", (1.0, 2.0)), Dimension("b", (1.0, 2.0, 3.0))])
    b = ConfigSpace([Dimension("b", (1.0, 2.0, 3.0)), Dimension("a", (1.0, 2.0))])
    assert a != b
    assert a.encode((1, 0)).index != b.encode((1, 0)).index


def test_dimension_validation():
    with pytest.raises(SpaceError):
        Dimension("empty", ())
    with pytest.raises(SpaceError):
        Dimension("dup", (1.0, 1.0))
    with pytest.raises(SpaceError):
        Dimension("desc", (2.0, 1.0))


def test_last_dimension_fastest_varying(small_space):
    lv0 = small_space.decode(0).levels
    lv1 = small_space.decode(1).levels
    assert lv0[:-1] == lv1[:-1]
    assert lv1[-1] == lv0[-1] + 1
