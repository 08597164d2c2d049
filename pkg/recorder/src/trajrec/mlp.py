"""Minimal two-layer classifier and Adam optimizer in plain numpy.

Parameters flatten in a fixed traversal order (W1, b1, W2, b2), so recorded
weight rows are comparable across the whole run.
"""
from __future__ import annotations

import numpy as np


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class TwoLayerClassifier:
    def __init__(self, dim_in: int, hidden: int, classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.w1 = rng.normal(scale=1.0 / np.sqrt(dim_in), size=(dim_in, hidden))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.normal(scale=1.0 / np.sqrt(hidden), size=(hidden, classes))
        self.b2 = np.zeros(classes)

    @property
    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat_params(self, vec: np.ndarray):
        offset = 0
        for p in self.params:
            p[...] = vec[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def _forward(self, x):
        h = np.tanh(x @ self.w1 + self.b1)
        return h, h @ self.w2 + self.b2

    def logits(self, x):
        return self._forward(x)[1]

    def predict(self, x):
        return self.logits(x).argmax(axis=1)

    def per_sample_loss(self, x, y):
        """Cross-entropy per sample (not clipped here; the recorder clips)."""
        probs = softmax(self.logits(x))
        return -np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None))

    def correct(self, x, y):
        return (self.predict(x) == y).astype(np.uint8)

    def error_rate(self, x, y) -> float:
        return float((self.predict(x) != y).mean())

    def loss_and_grads(self, x, y):
        h, z = self._forward(x)
        probs = softmax(z)
        n = len(y)
        loss = float(-np.log(np.clip(probs[np.arange(n), y], 1e-300, None)).mean())
        dz = probs
        dz[np.arange(n), y] -= 1.0
        dz /= n
        dw2 = h.T @ dz
        db2 = dz.sum(axis=0)
        dh = dz @ self.w2.T * (1.0 - h ** 2)
        dw1 = x.T @ dh
        db1 = dh.sum(axis=0)
        return loss, [dw1, db1, dw2, db2]


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m[...] = b1 * m + (1 - b1) * g
            v[...] = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
