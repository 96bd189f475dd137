"""Deterministic chunked Monte Carlo.

Samples are split into fixed-size chunks, and chunk ``i`` draws from the
``i``-th child of ``SeedSequence(seed)``.  The output therefore depends on
``(seed, chunk_size)`` only, never on how many workers run the chunks.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

DEFAULT_CHUNK = 1000


def chunk_plan(count: int, chunk_size: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(s, min(chunk_size, count - s)) for s in range(0, count, chunk_size)]


def chunk_generators(seed: int, count: int, chunk_size: int = DEFAULT_CHUNK):
    plan = chunk_plan(count, chunk_size)
    children = np.random.SeedSequence(seed).spawn(len(plan))
    return [(start, size, np.random.default_rng(ss)) for (start, size), ss in zip(plan, children)]


def ordered_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """map() that may fan out to processes but always returns results in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))
