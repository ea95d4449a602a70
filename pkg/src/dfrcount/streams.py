"""Splittable random streams and block-parallel map.

Every Monte Carlo estimate is computed over fixed-size blocks of
replications.  Block ``i`` always draws from the ``i``-th child of the run's
seed sequence, and block results are merged in index order, so estimates do
not depend on how many workers executed the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK_SIZE = 4096

R = TypeVar("R")


def as_seed_sequence(rng) -> np.random.SeedSequence:
    """Normalise ``rng`` (int, SeedSequence or Generator) to a SeedSequence.

    A Generator is consumed for 128 bits of entropy, so repeated calls with
    the same generator state give the same sequence.
    """
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        words = rng.integers(0, 2**32, size=4, dtype=np.uint64)
        return np.random.SeedSequence([int(w) for w in words])
    if isinstance(rng, (int, np.integer)):
        if rng < 0:
            raise ValueError("seed must be nonnegative")
        return np.random.SeedSequence(int(rng))
    raise TypeError(f"cannot derive a random stream from {type(rng).__name__}")


def child(seq: np.random.SeedSequence, *key: int) -> np.random.SeedSequence:
    """Child stream addressed by ``key``; pure, unlike ``SeedSequence.spawn``."""
    return np.random.SeedSequence(
        seq.entropy, spawn_key=tuple(seq.spawn_key) + tuple(int(k) for k in key),
        pool_size=seq.pool_size,
    )


def generator(seq: np.random.SeedSequence, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child(seq, *key) if key else seq))


def block_sizes(reps: int, block: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(int(reps), block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn: Callable[[int, int], R], reps: int, workers: int = 1,
               block: int = BLOCK_SIZE) -> list[R]:
    """Run ``fn(block_index, block_size)`` over all blocks, results in order."""
    sizes = block_sizes(reps, block)
    if workers <= 1 or len(sizes) <= 1:
        return [fn(i, n) for i, n in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


def z_value(confidence: float, tests: int = 1) -> float:
    """Two-sided normal quantile with a Bonferroni split over ``tests``."""
    from scipy.stats import norm

    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = (1.0 - confidence) / max(int(tests), 1)
    return float(norm.ppf(1.0 - alpha / 2.0))
