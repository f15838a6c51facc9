"""Order-independent derivation of random streams.

Every random object in a trial draws from its own ``numpy.random.Generator``
whose seed is a SplitMix64 hash of ``(master_seed, point_key, trial_index,
tag)``.  Streams are therefore independent of execution order, and adding a
grid point or a trial never perturbs the streams of the others.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output step applied to ``x``."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def tag_hash(tag: str) -> int:
    """Stable 64-bit hash of a string label (``hash()`` is salted per process)."""
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def point_key(params: dict) -> int:
    """Stable 64-bit key for a grid point, independent of its position in the grid."""
    return tag_hash(json.dumps(params, sort_keys=True, separators=(",", ":")))


def derive_seed(master_seed: int, *parts: int | str) -> int:
    """Fold ``parts`` into ``master_seed`` one SplitMix64 round at a time."""
    h = splitmix64(master_seed & MASK64)
    for part in parts:
        if isinstance(part, str):
            part = tag_hash(part)
        h = splitmix64(h ^ (part & MASK64))
    return h


def stream(master_seed: int, *parts: int | str) -> np.random.Generator:
    """A fresh PCG64 generator for the derived seed."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *parts)))
