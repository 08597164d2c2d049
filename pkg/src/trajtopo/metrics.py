"""Distance matrices over trajectory points.

Three (pseudo)metrics are supported:

* ``euclidean``  l2 distance between (optionally projected) weight vectors
* ``rho_p``      m**(-1/p) * ||L[i] - L[j]||_p between per-sample loss rows
* ``zero_one``   normalized Hamming distance between 0/1 loss rows

All constructors return a symmetric float64 matrix with an exactly zero
diagonal; the lower triangle is copied from the upper one, never recomputed.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .bundle import BinaryLossTrajectory, LossTrajectory, WeightTrajectory
from .errors import DimensionOverflow, EmptySelection, InvalidOrder

DEFAULT_MEM_BUDGET_MB = 4096

# auto target dimension is ceil(JL_SIZING_CONSTANT * ln(N) / eps^2)
JL_SIZING_CONSTANT = 8.0


def _mem_budget_bytes() -> int:
    mb = float(os.environ.get("TOPO_MEM_BUDGET_MB", DEFAULT_MEM_BUDGET_MB))
    return int(mb * 1e6)


@dataclass
class DistanceMatrix:
    entries: np.ndarray          # (N, N) float64
    metric_kind: str             # "euclidean" | "rho_p" | "zero_one"
    p: Optional[float] = None    # order for rho_p
    n_reference: Optional[int] = None  # the m used for normalization

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def kind_token(self) -> str:
        if self.metric_kind == "rho_p":
            return f"rho_p{self.p:g}"
        return self.metric_kind


@dataclass
class ProjectionSpec:
    distortion_eps: float
    seed: int = 0
    target_dim: Union[int, str] = "auto"

    def resolve_dim(self, n_points: int) -> int:
        if self.target_dim != "auto":
            return int(self.target_dim)
        if not (0 < self.distortion_eps < 1):
            raise ValueError(f"distortion_eps={self.distortion_eps} outside (0, 1)")
        return math.ceil(
            JL_SIZING_CONSTANT * math.log(n_points) / self.distortion_eps ** 2
        )


def _finalize(upper: np.ndarray) -> np.ndarray:
    # upper strictly-upper triangle -> full symmetric matrix, zero diagonal
    return upper + upper.T


def sparse_projection_matrix(dim_in: int, dim_out: int, seed: int) -> sp.csc_matrix:
    """Sparse sign projection with density 1/sqrt(dim_in).

    Nonzero entries are +/- sqrt(1 / (density * dim_out)), each with
    probability density/2, which preserves squared norms in expectation.
    """
    density = 1.0 / math.sqrt(dim_in)
    value = math.sqrt(1.0 / (density * dim_out))
    rng = np.random.Generator(np.random.Philox(seed))
    indptr = np.zeros(dim_out + 1, dtype=np.int64)
    indices = []
    data = []
    for j in range(dim_out):
        nnz = rng.binomial(dim_in, density)
        rows = np.sort(rng.choice(dim_in, size=nnz, replace=False))
        signs = rng.integers(0, 2, size=nnz) * 2 - 1
        indices.append(rows)
        data.append(signs * value)
        indptr[j + 1] = indptr[j] + nnz
    indices = np.concatenate(indices) if indices else np.empty(0, dtype=np.int64)
    data = np.concatenate(data) if data else np.empty(0)
    return sp.csc_matrix((data, indices, indptr), shape=(dim_in, dim_out))


def project_rows(points: np.ndarray, spec: ProjectionSpec) -> np.ndarray:
    """Map each row of ``points`` to the lower-dimensional subspace."""
    n, d = points.shape
    k = spec.resolve_dim(n)
    proj = sparse_projection_matrix(d, k, spec.seed)
    return np.asarray(points @ proj)


def _euclidean_entries(points: np.ndarray) -> np.ndarray:
    """Squared-norm expansion with exact recomputation of near-zero pairs.

    The Gram-matrix route loses precision exactly where it matters for
    pseudodistance-0 merging, so pairs whose computed squared distance is
    tiny relative to the point norms are redone with explicit differences.
    """
    x = np.asarray(points, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)

    scale = sq[:, None] + sq[None, :]
    suspect = d2 <= 1e-8 * np.maximum(scale, 1e-300)
    np.fill_diagonal(suspect, False)
    ii, jj = np.nonzero(np.triu(suspect, 1))
    if len(ii):
        for start in range(0, len(ii), 4096):
            sl = slice(start, start + 4096)
            diff = x[ii[sl]] - x[jj[sl]]
            exact = np.einsum("ij,ij->i", diff, diff)
            d2[ii[sl], jj[sl]] = exact

    upper = np.sqrt(np.triu(d2, 1))
    return _finalize(upper)


def euclidean_distance_matrix(
    weights: WeightTrajectory,
    proj: Optional[ProjectionSpec] = None,
) -> DistanceMatrix:
    """l2 distance matrix of the weight rows, optionally after projection."""
    mat = weights.matrix
    n, d = mat.shape
    if proj is not None:
        mat = project_rows(mat, proj)
    elif n * d * 8 > _mem_budget_bytes():
        raise DimensionOverflow(
            f"trajectory of shape {n}x{d} exceeds TOPO_MEM_BUDGET_MB; "
            "pass a projection spec"
        )
    return DistanceMatrix(entries=_euclidean_entries(mat), metric_kind="euclidean")


def loss_pseudometric_matrix(losses: LossTrajectory, p: float = 1.0) -> DistanceMatrix:
    """Normalized lp distance between per-sample loss rows."""
    if p < 1:
        raise InvalidOrder(f"p={p} must be >= 1")
    upper = _kernels.minkowski_rows(losses.matrix, float(p))
    return DistanceMatrix(
        entries=_finalize(upper),
        metric_kind="rho_p",
        p=float(p),
        n_reference=losses.matrix.shape[1],
    )


def zero_one_pseudometric_matrix(losses01: BinaryLossTrajectory) -> DistanceMatrix:
    """Mean disagreement between 0/1 loss rows (Hamming / m)."""
    x = np.asarray(losses01.matrix, dtype=np.float64)
    m = x.shape[1]
    # disagreements(i,j) = sum_k x_ik (1-x_jk) + (1-x_ik) x_jk, exact in f64
    a = x @ (1.0 - x).T
    ham = (a + a.T) / m
    upper = np.triu(ham, 1)
    return DistanceMatrix(
        entries=_finalize(upper),
        metric_kind="zero_one",
        n_reference=m,
    )


def subsample_columns(losses, fraction: float, seed: int):
    """Keep a uniform, seed-deterministic subset of loss columns.

    Works for both real-valued and 0/1 loss trajectories; the same retained
    columns serve every pairwise distance of the bundle.
    """
    m = losses.matrix.shape[1]
    if fraction >= 1.0:
        return losses
    k = int(math.floor(fraction * m + 1e-9))
    if k < 1:
        raise EmptySelection(f"fraction={fraction} of m={m} columns selects none")
    rng = np.random.Generator(np.random.Philox(seed))
    cols = np.sort(rng.choice(m, size=k, replace=False))
    if isinstance(losses, LossTrajectory):
        return LossTrajectory(
            matrix=losses.matrix[:, cols],
            sample_ids=losses.sample_ids[cols],
            subsample_fraction=losses.subsample_fraction * fraction,
        )
    return BinaryLossTrajectory(
        matrix=losses.matrix[:, cols],
        sample_ids=losses.sample_ids[cols],
    )


# --- optional distance-matrix cache ----------------------------------------

def write_distance_cache(dm: DistanceMatrix, directory, params: Optional[dict] = None):
    """Persist the upper triangle plus a JSON sidecar describing provenance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    token = dm.kind_token()
    n = dm.n
    iu = np.triu_indices(n, 1)
    (directory / f"dist_{token}.f64").write_bytes(
        np.ascontiguousarray(dm.entries[iu], dtype="<f8").tobytes()
    )
    sidecar = {
        "metric_kind": dm.metric_kind,
        "p": dm.p,
        "n": n,
        "n_reference": dm.n_reference,
    }
    sidecar.update(params or {})
    with open(directory / f"dist_{token}.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_distance_cache(directory, token: str) -> Optional[DistanceMatrix]:
    directory = Path(directory)
    bin_path = directory / f"dist_{token}.f64"
    meta_path = directory / f"dist_{token}.json"
    if not bin_path.is_file() or not meta_path.is_file():
        return None
    with open(meta_path) as fh:
        sidecar = json.load(fh)
    n = int(sidecar["n"])
    tri = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    if len(tri) != n * (n - 1) // 2:
        return None
    entries = np.zeros((n, n))
    entries[np.triu_indices(n, 1)] = tri
    entries = entries + entries.T
    return DistanceMatrix(
        entries=entries,
        metric_kind=sidecar["metric_kind"],
        p=sidecar.get("p"),
        n_reference=sidecar.get("n_reference"),
    )
