"""Cubic partition of the radius-r1 ball.

Half-open cubes prod_d (h*i_d, h*(i_d+1)] indexed by integer multi-indices;
the listed cubes are exactly those whose closed version intersects the
closed ball {|x|_2 <= r1}.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class PartitionSizeError(RuntimeError):
    """Raised when a partition would exceed the configured cube budget."""


@dataclass(frozen=True)
class CubicPartition:
    dim: int
    h: float
    r1: float
    cubes: np.ndarray  # (n_cubes, dim) integer multi-indices, lexicographic
    centers: np.ndarray  # (n_cubes, dim) cube centers a_i = h*(i + 1/2)
    _lookup: dict

    @property
    def n_cubes(self) -> int:
        return self.cubes.shape[0]


def build_partition(dim: int, h: float, r1: float, max_cubes: int = 10**7) -> CubicPartition:
    """Enumerate the cubes meeting the closed ball of radius r1.

    The intersection test uses the closed cube (clamp-point distance to the
    origin); the half-open faces differ only on a Lebesgue-null set.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if h <= 0.0 or r1 <= 0.0:
        raise ValueError(f"h and r1 must be > 0, got h={h}, r1={r1}")

    lo = math.floor(-r1 / h) - 1
    hi = math.ceil(r1 / h)
    width = hi - lo + 1
    if width**dim > 50 * max_cubes:
        raise PartitionSizeError(
            f"scan box of {width}**{dim} cubes exceeds budget {max_cubes}"
        )

    kept: list[tuple[int, ...]] = []
    for idx in itertools.product(range(lo, hi + 1), repeat=dim):
        dist_sq = 0.0
        for i in idx:
            a, b = h * i, h * (i + 1)
            if a > 0.0:
                dist_sq += a * a
            elif b < 0.0:
                dist_sq += b * b
        if dist_sq <= r1 * r1:
            kept.append(idx)
            if len(kept) > max_cubes:
                raise PartitionSizeError(f"partition exceeds budget of {max_cubes} cubes")

    cubes = np.array(kept, dtype=np.int64).reshape(len(kept), dim)
    centers = h * (cubes + 0.5)
    lookup = {tuple(row): ordinal for ordinal, row in enumerate(kept)}
    return CubicPartition(dim=dim, h=h, r1=r1, cubes=cubes, centers=centers, _lookup=lookup)


def locate(partition: CubicPartition, x) -> int | None:
    """Ordinal of the half-open cube containing x, or None if outside the partition."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = tuple(math.ceil(v / partition.h) - 1 for v in x)
    return partition._lookup.get(idx)


def locate_many(partition: CubicPartition, points: np.ndarray) -> np.ndarray:
    """Vectorized locate: returns an int array with -1 for points outside the partition."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    idx = np.ceil(points / partition.h).astype(np.int64) - 1
    out = np.empty(points.shape[0], dtype=np.int64)
    lookup = partition._lookup
    for n, row in enumerate(idx):
        out[n] = lookup.get(tuple(row), -1)
    return out


def sample_uniform(partition: CubicPartition, ordinal: int, rng: np.random.Generator):
    """One uniform draw from the half-open cube (components in (h*i, h*(i+1)])."""
    return sample_uniform_many(partition, ordinal, 1, rng)[0]


def sample_uniform_many(
    partition: CubicPartition, ordinal: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n i.i.d. uniform draws on cube `ordinal`, shape (n, dim)."""
    if not 0 <= ordinal < partition.n_cubes:
        raise IndexError(f"cube ordinal {ordinal} out of range")
    base = partition.h * partition.cubes[ordinal]
    # 1 - U maps [0,1) draws onto the half-open interval (0, 1].
    u = 1.0 - rng.random((n, partition.dim))
    return base + partition.h * u
