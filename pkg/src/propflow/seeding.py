"""Deterministic RNG substreams derived from a single master seed.

Every source of randomness in the pipeline draws from a named substream so
that results are reproducible from one 64-bit seed and independent of
execution order or thread count.
"""

from __future__ import annotations

import numpy as np

# Fixed stream labels; adding a stage means adding a label here, never
# reusing an existing one.
STREAMS = {
    "generate": 0,
    "adasyn": 1,
    "kfold": 2,
    "tune": 3,
    "trial": 4,
    "fold": 5,
    "candidates": 6,
}


def stream_seed(master_seed: int, name: str, *indices: int) -> int:
    """Derive a child seed for the named stream (plus optional indices)."""
    key = (STREAMS[name],) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def rng_stream(master_seed: int, name: str, *indices: int) -> np.random.Generator:
    """A fresh Generator for the named substream."""
    key = (STREAMS[name],) + tuple(int(i) for i in indices)
    ss = np.random.SeedSequence(int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.default_rng(ss)
