"""Master seed to per-trial seed expansion (splitmix64)."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output for state ``x``."""
    z = (x + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Seed for the stream at ``path`` below ``master``; distinct paths give independent seeds."""
    s = master & _MASK
    for p in path:
        s = splitmix64((s ^ splitmix64(p & _MASK)) & _MASK)
    return s


def trial_seeds(master: int, trials: int, stream: int = 0) -> list[int]:
    return [derive_seed(master, stream, i) for i in range(trials)]


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
