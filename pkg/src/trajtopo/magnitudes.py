"""Magnitude and positive magnitude of a finite (pseudo)metric space.

For a scale s > 0 the weighting beta solves ``M beta = 1`` with
``M[a, b] = exp(-s * rho(a, b))``. Magnitude is the sum of the weights and
positive magnitude the sum of their positive parts. Pseudometric inputs are
first collapsed by metric identification (zero-distance classes merged);
both quantities are invariant under that quotient, and the canonical
weighting that splits a class weight equally among its members makes the
positive part well-defined.

The production solver is conjugate gradient on the similarity system
(the diagonal of M is identically 1, so Jacobi preconditioning is the
identity and is kept only for documentation value); a dense direct solve
is the fallback and the cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import NonPositiveScale, SolverDiverged
from .metrics import DistanceMatrix

IDENTIFICATION_TOL = 1e-12
CONDITIONING_THRESHOLD = 1e-6


@dataclass
class QuotientSpace:
    representative_index: np.ndarray  # (N,) class id per original point
    class_sizes: np.ndarray           # (N',) members per class
    quotient_distances: DistanceMatrix

    @property
    def n_classes(self) -> int:
        return len(self.class_sizes)


@dataclass
class SolverConfig:
    tolerance: float = 1e-8
    dense_cutoff: int = 512
    max_iter: Optional[int] = None  # default 10 * N'


@dataclass
class WeightingVector:
    beta: np.ndarray
    scale: float
    residual: float  # achieved max |M beta - 1|
    solver: str      # "krylov_cg" | "dense_direct"


@dataclass
class MagnitudeResult:
    mag: float
    pmag: float
    scale: float
    conditioning_flag: bool
    residual: float
    solver: str


def metric_identification(dm: DistanceMatrix, tol: float = IDENTIFICATION_TOL) -> QuotientSpace:
    """Merge points at pseudodistance <= tol into classes (transitive closure)."""
    d = dm.entries
    n = d.shape[0]
    ii, jj = np.nonzero(d <= tol)
    adj = sp.csr_matrix((np.ones(len(ii), dtype=np.int8), (ii, jj)), shape=(n, n))
    n_classes, labels = connected_components(adj, directed=False)

    # representative = lowest original index in each class, classes ordered by it
    reps = np.full(n_classes, n, dtype=np.int64)
    np.minimum.at(reps, labels, np.arange(n))
    order = np.argsort(reps)
    relabel = np.empty(n_classes, dtype=np.int64)
    relabel[order] = np.arange(n_classes)
    labels = relabel[labels]
    reps = reps[order]

    class_sizes = np.bincount(labels, minlength=n_classes)
    qd = d[np.ix_(reps, reps)]
    np.fill_diagonal(qd, 0.0)
    quotient = DistanceMatrix(
        entries=qd,
        metric_kind=dm.metric_kind,
        p=dm.p,
        n_reference=dm.n_reference,
    )
    return QuotientSpace(
        representative_index=labels,
        class_sizes=class_sizes,
        quotient_distances=quotient,
    )


def _cg_solve(m: np.ndarray, tol: float, max_iter: int):
    """Conjugate gradient on M x = 1, tracking the sup-norm residual."""
    n = m.shape[0]
    b = np.ones(n)
    x = np.ones(n)  # at large scales the solution is near the all-ones vector
    r = b - m @ x
    p = r.copy()
    rs = float(r @ r)
    for _ in range(max_iter):
        if np.abs(r).max() <= tol:
            break
        mp = m @ p
        denom = float(p @ mp)
        if denom <= 0 or not np.isfinite(denom):
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * mp
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    # recompute directly: the recursive residual drifts from the true one
    resid = float(np.abs(m @ x - b).max())
    return x, resid


def _dense_solve(m: np.ndarray, tol: float):
    """Direct solve with iterative refinement for badly scaled systems."""
    b = np.ones(m.shape[0])
    x = np.linalg.solve(m, b)
    resid = float(np.abs(m @ x - b).max())
    for _ in range(2):
        if resid <= tol:
            break
        x = x + np.linalg.solve(m, b - m @ x)
        resid = float(np.abs(m @ x - b).max())
    return x, resid


def solve_weighting(q: QuotientSpace, s: float, cfg: SolverConfig = None) -> WeightingVector:
    """Weights beta with max |M beta - 1| below the configured tolerance."""
    cfg = cfg or SolverConfig()
    if s <= 0:
        raise NonPositiveScale(f"scale s={s} must be > 0")
    d = q.quotient_distances.entries
    n = d.shape[0]
    m = np.exp(-s * d)

    if n <= cfg.dense_cutoff:
        beta, resid = _dense_solve(m, cfg.tolerance)
        if resid <= cfg.tolerance:
            return WeightingVector(beta=beta, scale=s, residual=resid,
                                   solver="dense_direct")
        raise SolverDiverged(
            f"dense solve residual {resid:.3e} above tolerance at s={s}"
        )

    max_iter = cfg.max_iter or 10 * n
    beta, resid = _cg_solve(m, cfg.tolerance, max_iter)
    if resid <= cfg.tolerance:
        return WeightingVector(beta=beta, scale=s, residual=resid, solver="krylov_cg")

    beta, resid = _dense_solve(m, cfg.tolerance)
    if resid <= cfg.tolerance:
        return WeightingVector(beta=beta, scale=s, residual=resid,
                               solver="dense_direct")
    raise SolverDiverged(
        f"both CG and dense solves missed tolerance at s={s} (residual {resid:.3e})"
    )


def canonical_weighting(q: QuotientSpace, w: WeightingVector) -> np.ndarray:
    """Expand class weights to original points, split equally per class."""
    return w.beta[q.representative_index] / q.class_sizes[q.representative_index]


def conditioning_flag(q: QuotientSpace, s: float) -> bool:
    """True when the probed scale is numerically delicate (s * d_min tiny)."""
    d = q.quotient_distances.entries
    pos = d[d > 0]
    if len(pos) == 0:
        return False
    return bool(s * pos.min() < CONDITIONING_THRESHOLD)


def magnitude(q: QuotientSpace, s: float, cfg: SolverConfig = None) -> float:
    return float(solve_weighting(q, s, cfg).beta.sum())


def positive_magnitude(q: QuotientSpace, s: float, cfg: SolverConfig = None) -> float:
    beta = solve_weighting(q, s, cfg).beta
    return float(np.maximum(beta, 0.0).sum())


def magnitude_result(q: QuotientSpace, s: float, cfg: SolverConfig = None) -> MagnitudeResult:
    """Magnitude and positive magnitude from a single solve."""
    w = solve_weighting(q, s, cfg)
    return MagnitudeResult(
        mag=float(w.beta.sum()),
        pmag=float(np.maximum(w.beta, 0.0).sum()),
        scale=s,
        conditioning_flag=conditioning_flag(q, s),
        residual=w.residual,
        solver=w.solver,
    )
