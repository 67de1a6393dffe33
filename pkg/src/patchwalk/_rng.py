"""Keyed counter-based random streams.

Every stochastic task derives its generator from (master seed, key parts),
so results are independent of scheduling/execution order and reproducible
bit-for-bit on one platform for a fixed seed.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator keyed on (seed, *key)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))))
