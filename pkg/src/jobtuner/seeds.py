"""Deterministic seed derivation.

Every random decision in the package flows from one master seed through
named derivation paths, so results are independent of execution schedule
(thread/process count, root evaluation order, tree completion order).
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    """One SplitMix64 mixing step; maps any 64-bit state to a well-mixed output."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


_STRING_CODES: dict = {}


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK
    if isinstance(part, str):
        code = _STRING_CODES.get(part)
        if code is None:
            code = int.from_bytes(hashlib.blake2b(part.encode(), digest_size=8).digest(), "big")
            _STRING_CODES[part] = code
        return code
    raise TypeError(f"cannot derive seed from {type(part).__name__}")


def derive(*parts) -> int:
    """Fold (ints, labels) into a 64-bit seed. Pure; order-sensitive."""
    state = 0
    for part in parts:
        state = splitmix64(state ^ _encode(part))
    return state


def counter_stream(seed: int, n: int) -> np.ndarray:
    """n SplitMix64 outputs for counters 1..n, vectorized (uint64)."""
    z = np.uint64(seed) + np.uint64(_GOLDEN) * np.arange(1, n + 1, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _mix_u64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def bootstrap_indices(model_seed: int, n_trees: int, n: int) -> np.ndarray:
    """(n_trees, n) bootstrap row indices, one counter-based stream per tree.

    Tree t's stream depends only on (model_seed, t), so the resample is
    identical no matter how or in what order trees are fit.
    """
    # vectorized equivalent of derive(model_seed, t) for t in 0..n_trees
    base = np.uint64(splitmix64(_encode(model_seed)))
    tree_seeds = _mix_u64((base ^ np.arange(n_trees, dtype=np.uint64)) + np.uint64(_GOLDEN))
    z = tree_seeds[:, None] + np.uint64(_GOLDEN) * np.arange(1, n + 1, dtype=np.uint64)[None, :]
    return (_mix_u64(z) % np.uint64(n)).astype(np.int64)
