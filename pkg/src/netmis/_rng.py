"""Seed derivation shared by every stochastic routine.

Streams are keyed by ``(seed, tag, index...)`` through ``SeedSequence`` so a
given replicate block, PBA iteration or simulation rep always sees the same
random numbers no matter how work is split across threads.
"""

from __future__ import annotations

import numpy as np

# stream tags
TABLES = 1
REPS = 2
PERTURB = 3
PBA = 4
OUTCOMES = 5
NETWORK = 6

# replicates per seeded block; fixed so results never depend on thread count
BLOCK = 512


def as_rng(seed) -> np.random.Generator:
    """Accept an int seed, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def stream(seed: int, *keys: int) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.default_rng([int(seed), *map(int, keys)])


def child_seed(seed: int, *keys: int) -> int:
    """A derived integer seed, for APIs that take plain ints."""
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def blocks(total: int, size: int = BLOCK):
    """Yield ``(block_index, start, stop)`` covering ``range(total)``."""
    for b, start in enumerate(range(0, total, size)):
        yield b, start, min(start + size, total)
