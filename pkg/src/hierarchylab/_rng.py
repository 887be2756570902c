"""Block-keyed counter-based random streams.

Draws are produced in fixed-size blocks; block ``b`` of stream ``s`` always
comes from Philox keyed by ``SeedSequence(seed, spawn_key=(s, b))``.  Any
worker schedule therefore yields the same samples, and reductions are done
in block order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

BLOCK = 2048
THREADS_ENV = "HIERARCHYLAB_THREADS"

T = TypeVar("T")


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def n_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(workers))


def block_sizes(n_samples: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(int(n_samples), block)
    return [block] * full + ([rest] if rest else [])


def map_blocks(fn: Callable[[int, int], T], n_samples: int, workers: int | None = None, block: int = BLOCK) -> list[T]:
    """[fn(block_index, block_size) for each block], run on a thread pool, in block order."""
    sizes = block_sizes(n_samples, block)
    w = n_workers(workers)
    if w == 1 or len(sizes) == 1:
        return [fn(b, m) for b, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))
