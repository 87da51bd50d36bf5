"""Deterministic random streams and block-parallel Monte Carlo.

Every stream is a PCG64 generator keyed by ``(seed, purpose, index)`` through
``numpy.random.SeedSequence``. Paths are simulated in fixed-size blocks, each
with its own stream, and block results are concatenated in block order, so
output depends on the seed only and never on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_BLOCK = 1 << 15

# purpose tags keep streams used for different jobs disjoint
PATHS = 0
FUNDAMENTAL = 1
MARKS = 2
CLUSTERS = 3
LEDGER = 4
PRICE = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` to key further streams."""
    return int(rng.integers(0, 2**63 - 1))


def blocks(n_paths: int, block_size: int = DEFAULT_BLOCK):
    n_blocks = max(1, math.ceil(n_paths / block_size))
    for i in range(n_blocks):
        lo = i * block_size
        yield i, min(block_size, n_paths - lo)


def run_blocks(func, n_paths: int, seed: int, purpose: int = PATHS,
               block_size: int = DEFAULT_BLOCK, threads: int = 1):
    """Call ``func(n, rng)`` per block and concatenate the returned dicts of arrays."""
    jobs = list(blocks(n_paths, block_size))

    def one(job):
        i, n = job
        return func(n, stream(seed, purpose, i))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    out = {}
    for key in parts[0]:
        vals = [p[key] for p in parts]
        if isinstance(vals[0], np.ndarray):
            out[key] = np.concatenate(vals, axis=0)
        else:
            out[key] = sum(vals)
    return out


def mean_se(x, axis=0):
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    return x.mean(axis=axis), x.std(axis=axis, ddof=1) / math.sqrt(n)
