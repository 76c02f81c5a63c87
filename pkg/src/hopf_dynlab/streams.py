"""Deterministic random substreams and block-parallel execution.

Work is always cut into fixed-size blocks and every block draws from its own
substream ``SeedSequence(master_seed, spawn_key=(tag, block_index))``.  The
block layout never depends on the worker count, so results are bitwise
identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 4096

# spawn-key tags, one per consumer, so different experiments never share draws
TAG_START = 1
TAG_BACKWARD = 2
TAG_CERTIFY = 3
TAG_MASS = 4
TAG_EXTEND = 5
TAG_TARGETS = 6


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))


def blocks(count: int, block_size: int = BLOCK_SIZE):
    """Yield (block_index, start, stop) covering range(count)."""
    for b, start in enumerate(range(0, count, block_size)):
        yield b, start, min(start + block_size, count)


def map_blocks(fn, count: int, workers: int = 1, block_size: int = BLOCK_SIZE):
    """Apply ``fn(block_index, start, stop)`` to every block; results in block order."""
    spans = list(blocks(count, block_size))
    if workers <= 1 or len(spans) <= 1:
        return [fn(*s) for s in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: fn(*s), spans))
