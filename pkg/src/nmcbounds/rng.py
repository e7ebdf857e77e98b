"""Seed handling for reproducible Monte-Carlo work.

Every stochastic operation takes either an integer seed or a ready
``numpy.random.Generator``.  Parallelizable loops derive one child stream
per work item with :func:`derive_seed`, a splitmix64 mix of the base seed
and the item index, so results do not depend on scheduling order.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(state: int) -> int:
    """One splitmix64 output step (Steele, Lea & Flood's finalizer)."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, index: int) -> int:
    """64-bit child seed for work item ``index`` under base ``seed``."""
    return splitmix64(splitmix64(seed & _MASK64) ^ (index & _MASK64))


def as_generator(seed_or_rng) -> np.random.Generator:
    """Coerce an int seed, None, or a Generator into a Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def child_generator(seed: int, index: int) -> np.random.Generator:
    """Generator for one work item, independent of iteration order."""
    return np.random.default_rng(derive_seed(seed, index))
