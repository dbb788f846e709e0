"""Reproducible per-trajectory random streams.

Every trajectory draws from its own generator, derived from the run seed and
an integer key path, so results do not depend on how trajectories are split
across workers.
"""
from __future__ import annotations

import numpy as np

# key namespaces
ROUND = 0
PUMP = 1
POINT = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for ``(seed, key...)``; distinct keys give independent streams."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))))


def point_seed(seed: int, index: int) -> int:
    """Child seed for one sweep grid point."""
    return int(np.random.SeedSequence(seed, spawn_key=(POINT, index)).generate_state(1, np.uint32)[0])
