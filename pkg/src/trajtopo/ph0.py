"""Degree-0 persistence quantities of a finite (pseudo)metric space.

The multiset of connected-component lifetimes equals the multiset of MST
edge lengths, so everything here is driven by spanning trees: a dense Prim
pass is the production path, Kruskal over the materialized edge list is the
verification path, and single-linkage merge heights give an independent
cross-check of the same multiset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

from . import _kernels
from .errors import NegativeAlpha
from .metrics import DistanceMatrix


@dataclass
class MstEdges:
    lengths: np.ndarray  # sorted ascending, count N-1

    @property
    def count(self) -> int:
        return len(self.lengths)


@dataclass
class DimFitProtocol:
    min_size: int = 1000
    step: Optional[int] = None  # default (N - min_size) // 8
    repeats: int = 5
    seed: int = 0


@dataclass
class PhDimEstimate:
    dim: float
    slope: float
    sample_sizes: list
    log_e1_values: list
    r_squared: float
    degenerate: bool = False


def minimum_spanning_edges(dm: DistanceMatrix) -> MstEdges:
    """Sorted multiset of MST edge lengths of the complete graph on ``dm``."""
    lengths = _kernels.prim_mst_lengths(dm.entries)
    return MstEdges(lengths=np.sort(lengths))


def kruskal_spanning_edges(dm: DistanceMatrix) -> MstEdges:
    """Kruskal with stable (length, i, j) ordering; verification path.

    The edge-length multiset of an MST is unique even under ties, so this
    must agree exactly with the Prim result.
    """
    d = dm.entries
    n = d.shape[0]
    if n < 2:
        return MstEdges(lengths=np.empty(0))
    ii, jj = np.triu_indices(n, 1)
    w = d[ii, jj]
    order = np.lexsort((jj, ii, w))
    parent = np.arange(n)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    lengths = np.empty(n - 1)
    got = 0
    for e in order:
        ra, rb = find(ii[e]), find(jj[e])
        if ra != rb:
            parent[rb] = ra
            lengths[got] = w[e]
            got += 1
            if got == n - 1:
                break
    return MstEdges(lengths=np.sort(lengths))


def ph0_lifetimes(dm: DistanceMatrix) -> MstEdges:
    """Component lifetimes via single-linkage merge tracking.

    Returns the same multiset as ``minimum_spanning_edges``; implemented on
    an independent code path (scipy hierarchical clustering) so the two can
    cross-check each other.
    """
    n = dm.n
    if n < 2:
        return MstEdges(lengths=np.empty(0))
    condensed = squareform(dm.entries, checks=False)
    merge_heights = linkage(condensed, method="single")[:, 2]
    return MstEdges(lengths=np.sort(merge_heights))


def e_alpha(edges: MstEdges, alpha: float) -> float:
    """Sum of edge lengths raised to ``alpha``.

    Points at pseudodistance 0 are merged first (their zero-length edges are
    dropped), which both matches the quotient-space value for alpha > 0 and
    fixes the 0**0 ambiguity at alpha = 0.
    """
    if alpha < 0:
        raise NegativeAlpha(f"alpha={alpha} must be >= 0")
    nz = edges.lengths[edges.lengths > 0]
    if alpha == 1.0:
        return float(nz.sum())
    if alpha == 0.0:
        return float(len(nz))
    return float((nz ** alpha).sum())


def _fit_line(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def estimate_ph_dim(dm: DistanceMatrix, protocol: DimFitProtocol = None) -> PhDimEstimate:
    """Slope-based intrinsic dimension from the growth of E_1 with subset size.

    For each size n_j the median E_1 over ``repeats`` uniform subsets is
    computed, a least-squares line is fit to (log n_j, log E_1), and the
    dimension estimate is 1 / (1 - slope). A slope at or above 1 (or an
    all-zero E_1) yields a flagged +inf sentinel instead of an error.
    """
    protocol = protocol or DimFitProtocol()
    n = dm.n
    if n < 2 * protocol.min_size:
        raise ValueError(
            f"need at least 2*min_size={2 * protocol.min_size} points, got {n}"
        )
    step = protocol.step or max(1, (n - protocol.min_size) // 8)
    sizes = list(range(protocol.min_size, n + 1, step))

    children = np.random.SeedSequence(protocol.seed).spawn(len(sizes) * protocol.repeats)
    medians = []
    for j, size in enumerate(sizes):
        vals = []
        for r in range(protocol.repeats):
            rng = np.random.Generator(
                np.random.Philox(children[j * protocol.repeats + r])
            )
            idx = rng.choice(n, size=size, replace=False)
            sub = dm.entries[np.ix_(idx, idx)]
            lengths = _kernels.prim_mst_lengths(sub)
            vals.append(float(lengths[lengths > 0].sum()))
        medians.append(float(np.median(vals)))

    medians = np.asarray(medians)
    if np.any(medians <= 0):
        return PhDimEstimate(
            dim=math.inf, slope=math.nan, sample_sizes=sizes,
            log_e1_values=[math.nan] * len(sizes), r_squared=math.nan,
            degenerate=True,
        )

    log_n = np.log(np.asarray(sizes, dtype=float))
    log_e1 = np.log(medians)
    slope, r2 = _fit_line(log_n, log_e1)
    if slope >= 1.0 - 1e-6:
        return PhDimEstimate(
            dim=math.inf, slope=slope, sample_sizes=sizes,
            log_e1_values=list(log_e1), r_squared=r2, degenerate=True,
        )
    return PhDimEstimate(
        dim=1.0 / (1.0 - slope), slope=slope, sample_sizes=sizes,
        log_e1_values=list(log_e1), r_squared=r2,
    )
