"""Deterministic random streams.

All draws go through numpy's Philox bit generator (counter based, 64-bit
words, identical streams on every platform). Per-trial seeds are derived
from the base seed with a splitmix64 mixing chain so distinct index
tuples land on distinct, well-separated streams.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z):
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(base, *indices):
    """Mix a base seed with integer indices into a fresh 64-bit seed."""
    s = int(base) & _MASK
    for x in indices:
        s = _splitmix64(s ^ ((int(x) + 1) * _GOLDEN & _MASK))
    return s


def make_rng(seed):
    """Philox-backed Generator for the given 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK))
