"""Seeded random streams.

Every run draws from a Philox counter-based generator.  Trial ``i`` of a
batch seeded with ``s`` uses the 64-bit seed derived from ``SeedSequence([s, i])``,
so any single trial can be replayed without running the ones before it.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


def trial_seed(seed: int, trial: int) -> int:
    ss = np.random.SeedSequence([int(seed) & SEED_MASK, int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
