"""Synthetic binary classification data."""
import numpy as np


def two_gaussians(n: int, sep: float = 2.5, dim: int = 2, seed: int = 0):
    """Balanced mixture of two spherical Gaussians ``sep`` apart.

    The overlap keeps the Bayes error strictly positive, so per-sample
    correctness keeps fluctuating during training and the recorded 0/1
    losses are informative.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    y = np.concatenate([np.zeros(half, dtype=np.int64),
                        np.ones(n - half, dtype=np.int64)])
    x = rng.normal(size=(n, dim))
    x[y == 0, 0] -= sep / 2.0
    x[y == 1, 0] += sep / 2.0
    order = rng.permutation(n)
    return x[order], y[order]
