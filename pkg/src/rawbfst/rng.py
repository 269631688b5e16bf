"""Deterministic substream construction.

Every consumer derives its generator from a structured key (namespace,
master seed, cube/step/replicate indices) via SeedSequence, so cube-level
or replicate-level parallelism cannot change the streams. Oracle code uses
a disjoint namespace from the production fit path.
"""
from __future__ import annotations

import numpy as np

FIT_NAMESPACE = 101
ORACLE_NAMESPACE = 202
HARNESS_NAMESPACE = 303

SeedLike = int | tuple[int, ...]


def seed_key(seed: SeedLike) -> tuple[int, ...]:
    """Flatten a (possibly nested) seed tuple into a flat integer key."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    key: tuple[int, ...] = ()
    for part in seed:
        key += seed_key(part)
    if not key:
        raise ValueError("seed key must be non-empty")
    return key


def substream(namespace: int, seed: SeedLike, *indices: int) -> np.random.Generator:
    """Generator for the stream keyed by (namespace, seed..., indices...)."""
    entropy = (namespace, *seed_key(seed), *(int(i) for i in indices))
    return np.random.default_rng(np.random.SeedSequence(entropy))
