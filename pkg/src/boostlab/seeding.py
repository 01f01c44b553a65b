"""Deterministic random streams.

Every randomized operation in the package takes an explicit seed and derives
an independent generator per logical sub-stream, so runs are reproducible and
sub-streams can be evaluated concurrently without sharing generator state.
"""

from __future__ import annotations

import zlib

import numpy as np

_U64 = (1 << 64) - 1


def _entropy(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & _U64  # map negatives into the uint64 range


def rng_for(seed, *path) -> np.random.Generator:
    """Generator keyed by (seed, *path); path parts may be ints or short tags."""
    parts = [_entropy(seed)] + [_entropy(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(parts))
