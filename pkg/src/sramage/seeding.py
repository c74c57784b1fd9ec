"""Seed splitting.

Every random draw in the package comes from a generator derived from a
master seed plus a tuple of integer keys, so results never depend on
scheduling order or worker count.
"""

from __future__ import annotations

import numpy as np

# Stream identifiers used as the first key when deriving child seeds.
STREAM_DEVICE = 1
STREAM_SAMPLE = 2
STREAM_MORAN = 3
STREAM_PROFILE = 4
STREAM_VIRTUAL = 5
STREAM_CALIBRATION = 6


def child_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit child seed from ``seed`` and a key path."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *keys))
