"""Uniform random recursive trees and their level profiles.

A tree on V vertices is stored as a flat parent array: vertex 0 is the
root (parent entry -1), and parent[i] < i for i >= 1, so every prefix of
the vertex list is itself a recursive tree. Uniform attachment makes all
(V-1)! such trees equally likely.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError
from .rng import RngStream

MAX_TREE_VERTICES = 2**27

_ENUM_LIMIT = 9  # largest vertex count enumerated exactly: 8! sequences


@dataclass(frozen=True)
class RecursiveTree:
    """Flat-array recursive tree; parent[0] is -1 and parent[i] < i."""

    parent: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.parent.shape[0])

    @property
    def edge_parents(self) -> np.ndarray:
        """Parents of the non-root vertices 1..V-1 (empty for the root-only tree)."""
        return self.parent[1:]

    def depths(self) -> np.ndarray:
        return depths_from_parents(self.parent)


@dataclass(frozen=True)
class ProfileVector:
    """Level occupancy counts of one tree; counts[0] is always 1 (the root)."""

    counts: np.ndarray
    n: int  # number of non-root vertices

    def __getitem__(self, k: int) -> int:
        if k < 0:
            raise IndexError("level must be >= 0")
        if k >= self.counts.shape[0]:
            return 0
        return int(self.counts[k])

    @property
    def height(self) -> int:
        return int(self.counts.shape[0]) - 1


@dataclass(frozen=True)
class ProfilePath:
    """Level counts of one growing tree sampled at sizes floor(n_base**t).

    values[i, k-1] is the number of vertices at level k when the tree has
    sizes[i] vertices in total; levels run 1..k_max.
    """

    n_base: int
    t_grid: np.ndarray
    k_max: int
    sizes: np.ndarray
    values: np.ndarray

    def value(self, t_index: int, k: int) -> int:
        if not 1 <= k <= self.k_max:
            raise IndexError("level out of recorded range")
        return int(self.values[t_index, k - 1])


def depths_from_parents(parent: np.ndarray) -> np.ndarray:
    """Depth of every vertex, root = 0.

    Works level by level with boolean gathers; the number of passes equals
    the tree height (logarithmic for recursive trees).
    """
    V = parent.shape[0]
    depth = np.zeros(V, dtype=np.int64)
    if V <= 1:
        return depth
    p = parent[1:]
    mask = np.zeros(V, dtype=bool)
    mask[0] = True
    level = 0
    while True:
        child = mask[p]
        if not child.any():
            break
        level += 1
        mask = np.zeros(V, dtype=bool)
        mask[1:][child] = True
        depth[1:][child] = level
    return depth


def generate_rrt(n_plus_1: int, rng: RngStream) -> RecursiveTree:
    """Sample a uniform random recursive tree with n_plus_1 vertices."""
    if n_plus_1 < 1:
        raise ValueError("vertex count must be >= 1")
    if n_plus_1 > MAX_TREE_VERTICES:
        raise CapExceededError(f"tree of {n_plus_1} vertices exceeds the memory cap")
    parent = np.empty(n_plus_1, dtype=np.int64)
    parent[0] = -1
    if n_plus_1 > 1:
        parent[1:] = rng.gen.integers(0, np.arange(1, n_plus_1))
    return RecursiveTree(parent)


def profile(tree: RecursiveTree) -> ProfileVector:
    """Level occupancy counts of the whole tree."""
    counts = np.bincount(tree.depths())
    return ProfileVector(counts, tree.n_vertices - 1)


def generate_parent_matrix(n_batch: int, n_plus_1: int, rng: RngStream) -> np.ndarray:
    """Parent choices for n_batch independent trees of common size.

    Row r, column i holds the parent of vertex i+1 in tree r.
    """
    if n_plus_1 < 2:
        return np.empty((n_batch, 0), dtype=np.int64)
    return rng.gen.integers(0, np.arange(1, n_plus_1), size=(n_batch, n_plus_1 - 1))


def level_counts_batch(parents: np.ndarray, k_max: int) -> np.ndarray:
    """Counts at levels 1..k_max for every row of a parent matrix.

    One boolean gather per level; no per-tree Python work.
    """
    n_batch, v_minus_1 = parents.shape
    out = np.zeros((n_batch, k_max), dtype=np.int64)
    if v_minus_1 == 0:
        return out
    mask = np.zeros((n_batch, v_minus_1 + 1), dtype=bool)
    mask[:, 0] = True
    for k in range(1, k_max + 1):
        child = np.take_along_axis(mask, parents, axis=1)
        out[:, k - 1] = child.sum(axis=1)
        if not child.any():
            break
        mask = np.zeros_like(mask)
        mask[:, 1:] = child
    return out


def _power_size(n_base: int, t: float) -> int:
    """floor(n_base**t) with a snap-upward guard for floating drift.

    Values within a relative 1e-9 of an integer are treated as that
    integer, so mathematically integral powers are never truncated down.
    """
    x = math.exp(t * math.log(n_base))
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, x):
        return int(r)
    return int(math.floor(x))


def grow_and_record(
    n_base: int,
    t_grid,
    k_max: int,
    rng: RngStream,
    max_vertices: int = MAX_TREE_VERTICES,
) -> ProfilePath:
    """Grow one tree and snapshot levels 1..k_max at sizes floor(n_base**t).

    The same realization is used for every snapshot: the size-s prefix of
    the final parent array is the tree after s vertices were attached.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if np.any(t_grid < 0):
        raise ValueError("t_grid entries must be >= 0")
    if t_grid.size > 1 and np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if n_base < 2:
        raise ValueError("n_base must be >= 2")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")

    sizes = np.array([_power_size(n_base, t) for t in t_grid], dtype=np.int64)
    total = int(sizes[-1])
    if total > max_vertices:
        raise CapExceededError(f"final tree size {total} exceeds the cap {max_vertices}")

    tree = generate_rrt(total, rng)
    values = np.zeros((t_grid.size, k_max), dtype=np.int64)
    if total > 1:
        mask = np.zeros(total, dtype=bool)
        mask[0] = True
        p = tree.parent[1:]
        for k in range(1, k_max + 1):
            child = mask[p]
            # vertices at level k, in insertion order
            idx = np.flatnonzero(child) + 1
            values[:, k - 1] = np.searchsorted(idx, sizes, side="left")
            if idx.size == 0:
                break
            mask = np.zeros(total, dtype=bool)
            mask[idx] = True
    return ProfilePath(n_base, t_grid, k_max, sizes, values)


def exact_profile_distribution(n_plus_1: int) -> dict[tuple[int, ...], float]:
    """Exact pmf of the level-count vector by enumerating attachment sequences.

    Keys are (count at level 1, ..., count at level n) with n = n_plus_1 - 1;
    each of the (n_plus_1 - 1)! attachment sequences is equally likely.
    Limited to n_plus_1 <= 9.
    """
    if not 1 <= n_plus_1 <= _ENUM_LIMIT:
        raise ValueError(f"exact enumeration supports 1..{_ENUM_LIMIT} vertices")
    n = n_plus_1 - 1
    if n == 0:
        return {(): 1.0}
    tallies: dict[tuple[int, ...], int] = {}
    for choice in itertools.product(*(range(i) for i in range(1, n + 1))):
        depth = [0] * (n + 1)
        counts = [0] * n
        for i, p in enumerate(choice, start=1):
            d = depth[p] + 1
            depth[i] = d
            counts[d - 1] += 1
        key = tuple(counts)
        tallies[key] = tallies.get(key, 0) + 1
    total = math.factorial(n)
    return {key: c / total for key, c in tallies.items()}


def level1_moments(n: int) -> tuple[float, float]:
    """Exact mean and variance of the number of root children after n attachments.

    Attachment m hits the root independently with probability 1/m, so the
    mean is the harmonic number H_n and the variance is sum (1/m)(1 - 1/m).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    mean = math.fsum(1.0 / m for m in range(1, n + 1))
    var = math.fsum(1.0 / m - 1.0 / m**2 for m in range(1, n + 1))
    return mean, var
