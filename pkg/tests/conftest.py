import numpy as np
import pytest

from trajtopo import _kernels
from trajtopo.bundle import (
    BinaryLossTrajectory,
    LossTrajectory,
    RunMeta,
    TrajectoryBundle,
    WeightTrajectory,
)
from trajtopo.metrics import DistanceMatrix, euclidean_distance_matrix


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # exclude JIT compilation from any timed assertion
    _kernels.warmup()


def random_cloud_matrix(seed, n, d=2, kind="uniform"):
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        pts = rng.random((n, d))
    elif kind == "gaussian":
        pts = rng.normal(size=(n, d))
    elif kind == "clusters":
        pts = rng.normal(scale=0.3, size=(n, d))
        pts[n // 2:, 0] += 5.0
    else:
        raise ValueError(kind)
    return pts


def cloud_distances(seed, n, d=2, kind="uniform", duplicates=0):
    """Euclidean DistanceMatrix of a random cloud, optionally with duplicates."""
    pts = random_cloud_matrix(seed, n, d, kind)
    if duplicates:
        rng = np.random.default_rng(seed + 1)
        extra = pts[rng.integers(0, n, size=duplicates)]
        pts = np.vstack([pts, extra])
    return euclidean_distance_matrix(WeightTrajectory(matrix=pts))


def random_symmetric_matrix(seed, n, quantize=None):
    """Symmetric nonnegative matrix with zero diagonal (not necessarily metric)."""
    rng = np.random.default_rng(seed)
    a = rng.random((n, n))
    d = np.triu(a, 1)
    if quantize:
        d = np.round(d * quantize) / quantize
    d = d + d.T
    return DistanceMatrix(entries=d, metric_kind="euclidean")


def make_bundle(t_pts=20, dim=4, m=10, seed=0, with_weights=True, with_losses=True,
                with_losses01=True, n_train=100, loss_bound=1.0, tau=0,
                risk_period=5, lr=0.01, batch_size=32):
    """Small in-memory bundle with every trajectory kind populated."""
    rng = np.random.default_rng(seed)
    big_t = tau + t_pts - 1
    meta = RunMeta(
        learning_rate=lr, batch_size=batch_size, optimizer="adam", seed=seed,
        n_train=n_train, loss_bound=loss_bound, tau=tau, T=big_t,
        dataset="synthetic", model="test-model",
    )
    iteration_index = np.arange(tau, big_t + 1, dtype=np.int64)
    weights = WeightTrajectory(matrix=rng.normal(size=(t_pts, dim))) if with_weights else None
    losses = None
    if with_losses:
        losses = LossTrajectory(
            matrix=rng.random((t_pts, m)) * loss_bound,
            sample_ids=np.arange(m, dtype=np.int64),
        )
    losses01 = None
    if with_losses01:
        losses01 = BinaryLossTrajectory(
            matrix=(rng.random((t_pts, m)) < 0.3).astype(np.uint8),
            sample_ids=np.arange(m, dtype=np.int64),
        )
    risk_history = []
    for it in range(tau, big_t + 1, risk_period):
        risk_history.append((it, float(rng.random() * 0.2),
                             float(0.1 + rng.random() * 0.2)))
    return TrajectoryBundle(
        run_meta=meta,
        iteration_index=iteration_index,
        weights=weights,
        losses=losses,
        losses01=losses01,
        risk_history=risk_history,
    )
