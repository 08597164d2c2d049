"""Synthetic point clouds with known intrinsic dimension, plus the slow
exact oracles (spanning-tree enumeration, greedy covering/packing) used by
property tests and the acceptance suite.

All generators draw from a counter-based Philox stream, so a spec with a
fixed seed reproduces byte-identical clouds across platforms.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .bundle import WeightTrajectory
from .errors import InvalidSpec, TooLarge

# documented ground-truth intrinsic dimension per shape
SHAPE_DIMS = {
    "cube": lambda dim: dim,
    "sphere_surface": lambda dim: dim - 1,
    "circle": lambda dim: 1,
    "gaussian": lambda dim: dim,
    "two_cluster": lambda dim: dim,
}


@dataclass
class SynthSpec:
    shape: str             # cube | sphere_surface | circle | gaussian | two_cluster | duplicated
    n_points: int
    seed: int = 0
    noise: float = 0.0
    dim: int = 2
    sep: float = 10.0      # two_cluster center separation
    copies: int = 2        # duplicated: copies per base point
    base: Optional["SynthSpec"] = None  # duplicated: spec of the base cloud


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def sample_points(spec: SynthSpec) -> WeightTrajectory:
    """Draw the cloud described by ``spec``; rows are points."""
    if spec.n_points < 1:
        raise InvalidSpec(f"n_points={spec.n_points} must be >= 1")
    if spec.shape != "duplicated" and spec.dim < 1:
        raise InvalidSpec(f"dim={spec.dim} must be >= 1")
    rng = _rng(spec.seed)

    if spec.shape == "cube":
        pts = rng.random((spec.n_points, spec.dim))
    elif spec.shape == "gaussian":
        pts = rng.normal(size=(spec.n_points, spec.dim))
    elif spec.shape == "sphere_surface":
        if spec.dim < 2:
            raise InvalidSpec("sphere_surface needs ambient dim >= 2")
        raw = rng.normal(size=(spec.n_points, spec.dim))
        pts = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    elif spec.shape == "circle":
        theta = rng.random(spec.n_points) * 2.0 * np.pi
        pts = np.c_[np.cos(theta), np.sin(theta)]
    elif spec.shape == "two_cluster":
        half = spec.n_points // 2
        centers = np.zeros((spec.n_points, max(spec.dim, 1)))
        centers[half:, 0] = spec.sep
        pts = centers + rng.normal(scale=0.25, size=centers.shape)
    elif spec.shape == "duplicated":
        if spec.base is None or spec.copies < 1:
            raise InvalidSpec("duplicated needs a base spec and copies >= 1")
        base = sample_points(spec.base).matrix
        pts = np.tile(base, (spec.copies, 1))
    else:
        raise InvalidSpec(f"unknown shape {spec.shape!r}")

    if spec.noise > 0:
        pts = pts + rng.normal(scale=spec.noise, size=pts.shape)
    return WeightTrajectory(matrix=np.ascontiguousarray(pts, dtype=np.float64))


# ---------------------------------------------------------------------------
# exact MST oracle
# ---------------------------------------------------------------------------

def _prufer_to_edges(seq, n):
    """Decode a Pruefer sequence into the edge list of a labeled tree."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    seq = list(seq)
    leaves = sorted(i for i in range(n) if degree[i] == 1)
    for v in seq:
        leaf = leaves.pop(0)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            bisect.insort(leaves, v)
    edges.append((leaves[0], leaves[1]))
    return edges


def brute_force_mst_cost(dist: np.ndarray) -> float:
    """Exact minimum spanning-tree cost by enumerating all n**(n-2) trees."""
    n = dist.shape[0]
    if n > 7:
        raise TooLarge(f"exhaustive enumeration capped at n=7, got {n}")
    if n < 2:
        return 0.0
    if n == 2:
        return float(dist[0, 1])
    best = np.inf
    for seq in product(range(n), repeat=n - 2):
        cost = 0.0
        for a, b in _prufer_to_edges(seq, n):
            cost += dist[a, b]
        if cost < best:
            best = cost
    return float(best)


# ---------------------------------------------------------------------------
# greedy covering / packing oracles
# ---------------------------------------------------------------------------
# Both scan points in index order, which makes the pair provably one-sided:
# the packing criterion at delta coincides with uncoveredness at radius
# 2*delta, so N_{2 delta} <= P_delta can never be violated by construction.

def greedy_packing_number(dist: np.ndarray, delta: float) -> int:
    """Size of a maximal family of disjoint closed delta-balls (greedy).

    Centers are accepted in index order whenever they lie at distance
    > 2*delta from every accepted center; in a pseudometric space that
    separation makes the closed balls disjoint.
    """
    n = dist.shape[0]
    centers = []
    for i in range(n):
        if all(dist[i, c] > 2.0 * delta for c in centers):
            centers.append(i)
    return len(centers)


def greedy_covering_number(dist: np.ndarray, delta: float) -> int:
    """Size of a greedy covering of the points by closed delta-balls.

    The first point not yet covered becomes the next center.
    """
    n = dist.shape[0]
    covered = np.zeros(n, dtype=bool)
    count = 0
    for i in range(n):
        if not covered[i]:
            covered |= dist[i] <= delta
            count += 1
    return count
