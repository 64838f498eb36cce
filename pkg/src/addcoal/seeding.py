"""Deterministic seeding for replicated runs.

Every replication owns an independent PCG64 stream whose seed is derived
from (master seed, replication index) by a splitmix64-style integer hash.
This keeps runs reproducible for a fixed master seed while letting
replications execute in any order or degree of parallelism.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # golden-ratio increment, the usual splitmix64 stride


def splitmix64(z: int) -> int:
    """One splitmix64 finalization round of a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def substream_seed(master_seed: int, index: int) -> int:
    """Seed of the `index`-th substream of a master seed.

    Two hash rounds over master + (index+1) * gamma; indices as far apart
    as 2**32 stay decorrelated and distinct in practice.
    """
    if index < 0:
        raise ValueError("substream index must be >= 0")
    z = (master_seed + (index + 1) * _GAMMA) & _MASK64
    return splitmix64(splitmix64(z))


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed & _MASK64))


def substream_rng(master_seed: int, index: int) -> np.random.Generator:
    return make_rng(substream_seed(master_seed, index))
