"""Discrete multi-dimensional configuration spaces (cloud x application parameters).

A configuration is addressed either by its per-dimension level indices or by a
single mixed-radix index (last dimension fastest-varying). Both encodings are
bijective, which gives a stable dataset-row <-> configuration mapping.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class SpaceError(ValueError):
    """Invalid dimension/space definition or out-of-range configuration."""


@dataclass(frozen=True)
class Dimension:
    """One tunable parameter: a name plus an ordered set of discrete levels.

    Numeric dimensions hold float values in ascending order; categorical
    dimensions hold string labels (order is part of the identity).
    """

    name: str
    values: tuple
    numeric: bool = True

    def __post_init__(self):
        if len(self.values) == 0:
            raise SpaceError(f"dimension {self.name!r} has no levels")
        if len(set(self.values)) != len(self.values):
            raise SpaceError(f"dimension {self.name!r} has duplicate levels")
        if self.numeric:
            vals = [float(v) for v in self.values]
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise SpaceError(f"dimension {self.name!r}: numeric levels must be ascending")

    @property
    def n_levels(self) -> int:
        return len(self.values)

    @property
    def feature_width(self) -> int:
        return 1 if self.numeric else len(self.values)

    def level_of(self, value) -> int:
        """Level index of a raw value (numeric values compared as floats)."""
        if self.numeric:
            target = float(value)
            for i, v in enumerate(self.values):
                if float(v) == target:
                    return i
        else:
            for i, v in enumerate(self.values):
                if v == value:
                    return i
        raise SpaceError(f"value {value!r} not a level of dimension {self.name!r}")


@dataclass(frozen=True)
class Configuration:
    """A point in a ConfigSpace: mixed-radix index plus per-dimension level indices."""

    index: int
    levels: tuple


class ConfigSpace:
    """Ordered product of Dimensions. Immutable after construction.

    Dimension order is part of the space identity: permuting dimensions yields
    a different space (different indices and feature layout).
    """

    def __init__(self, dimensions: Sequence[Dimension]):
        if not dimensions:
            raise SpaceError("a space needs at least one dimension")
        names = [d.name for d in dimensions]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate dimension names")
        self.dimensions = tuple(dimensions)
        sizes = np.array([d.n_levels for d in dimensions], dtype=np.int64)
        self.sizes = tuple(int(s) for s in sizes)
        # last dimension fastest-varying
        strides = np.ones(len(sizes), dtype=np.int64)
        for i in range(len(sizes) - 2, -1, -1):
            strides[i] = strides[i + 1] * sizes[i + 1]
        self._strides = strides
        self.cardinality = int(np.prod(sizes))
        self._feature_matrix = None
        self._level_matrix = None

    def __eq__(self, other):
        return isinstance(other, ConfigSpace) and self.dimensions == other.dimensions

    def __repr__(self):
        return f"ConfigSpace({'x'.join(str(s) for s in self.sizes)}, {self.cardinality} configs)"

    @property
    def n_dims(self) -> int:
        return len(self.dimensions)

    @property
    def n_features(self) -> int:
        return sum(d.feature_width for d in self.dimensions)

    def encode(self, levels: Sequence[int]) -> Configuration:
        """Levels tuple -> Configuration with its mixed-radix index."""
        if len(levels) != self.n_dims:
            raise SpaceError(f"expected {self.n_dims} levels, got {len(levels)}")
        for d, (dim, lv) in enumerate(zip(self.dimensions, levels)):
            if not 0 <= lv < dim.n_levels:
                raise SpaceError(f"level {lv} out of range for dimension {dim.name!r} (dim {d})")
        index = int(np.dot(self._strides, np.asarray(levels, dtype=np.int64)))
        return Configuration(index, tuple(int(v) for v in levels))

    def decode(self, index: int) -> Configuration:
        """Mixed-radix index -> Configuration. Inverse of encode."""
        if not 0 <= index < self.cardinality:
            raise SpaceError(f"index {index} out of range [0, {self.cardinality})")
        rem = int(index)
        levels = []
        for stride, size in zip(self._strides, self.sizes):
            lv = rem // int(stride)
            rem -= lv * int(stride)
            levels.append(int(lv))
        return Configuration(int(index), tuple(levels))

    def featurize(self, config: Configuration) -> np.ndarray:
        """Numeric feature vector: raw value for numeric dims, one-hot for categorical."""
        return self.feature_matrix()[config.index].copy()

    def level_matrix(self) -> np.ndarray:
        """(cardinality, n_dims) level indices for every configuration."""
        if self._level_matrix is None:
            idx = np.arange(self.cardinality, dtype=np.int64)
            cols = []
            for stride, size in zip(self._strides, self.sizes):
                cols.append((idx // int(stride)) % int(size))
            self._level_matrix = np.stack(cols, axis=1)
            self._level_matrix.setflags(write=False)
        return self._level_matrix

    def feature_matrix(self) -> np.ndarray:
        """(cardinality, n_features) float64 features for every configuration."""
        if self._feature_matrix is None:
            lm = self.level_matrix()
            out = np.zeros((self.cardinality, self.n_features))
            col = 0
            for d, dim in enumerate(self.dimensions):
                if dim.numeric:
                    vals = np.array([float(v) for v in dim.values])
                    out[:, col] = vals[lm[:, d]]
                    col += 1
                else:
                    for k in range(dim.n_levels):
                        out[lm[:, d] == k, col + k] = 1.0
                    col += dim.n_levels
            self._feature_matrix = out
            self._feature_matrix.setflags(write=False)
        return self._feature_matrix

    def all_configs(self):
        for i in range(self.cardinality):
            yield self.decode(i)


def encode(levels: Sequence[int], space: ConfigSpace) -> Configuration:
    return space.encode(levels)


def decode(index: int, space: ConfigSpace) -> Configuration:
    return space.decode(index)


def featurize(config: Configuration, space: ConfigSpace) -> np.ndarray:
    return space.featurize(config)
