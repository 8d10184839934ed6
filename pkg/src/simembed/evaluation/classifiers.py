"""Small in-house linear classifiers used by the evaluation protocols.

Both models are trained by plain per-example SGD on standardized features
with a fixed budget (100 epochs, learning rate 0.1, L2 penalty 1e-4); the
standardization is folded back into the returned weights so predictions
work on raw features.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ConfigError

EPOCHS = 100
LEARNING_RATE = 0.1
L2 = 1e-4


@dataclass
class LinearModel:
    weights: np.ndarray  # (d,) for binary, (d, k) for softmax
    bias: float | np.ndarray
    classes: np.ndarray | None = None

    def decision(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, x) -> np.ndarray:
        z = self.decision(x)
        if z.ndim == 1:
            return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, x) -> np.ndarray:
        z = self.decision(x)
        if z.ndim == 1:
            return (z > 0).astype(np.int64)
        return self.classes[np.argmax(z, axis=1)]


def _standardize(x):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return (x - mean) / scale, mean, scale


@numba.njit(cache=True)
def _logistic_sgd(x, y, order, epochs, lr, l2):
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for epoch in range(epochs):
        for t in range(n):
            i = order[epoch, t]
            z = b
            for k in range(d):
                z += w[k] * x[i, k]
            if z > 30.0:
                z = 30.0
            elif z < -30.0:
                z = -30.0
            g = y[i] - 1.0 / (1.0 + np.exp(-z))
            for k in range(d):
                w[k] += lr * (g * x[i, k] - l2 * w[k])
            b += lr * g
    return w, b


@numba.njit(cache=True)
def _softmax_sgd(x, y, k, order, epochs, lr, l2):
    n, d = x.shape
    w = np.zeros((d, k))
    b = np.zeros(k)
    z = np.empty(k)
    for epoch in range(epochs):
        for t in range(n):
            i = order[epoch, t]
            for c in range(k):
                acc = b[c]
                for j in range(d):
                    acc += x[i, j] * w[j, c]
                z[c] = acc
            top = z.max()
            total = 0.0
            for c in range(k):
                z[c] = np.exp(z[c] - top)
                total += z[c]
            for c in range(k):
                g = (1.0 if y[i] == c else 0.0) - z[c] / total
                for j in range(d):
                    w[j, c] += lr * (g * x[i, j] - l2 * w[j, c])
                b[c] += lr * g
    return w, b


def _orders(n, epochs, seed):
    rng = np.random.default_rng(seed)
    return np.vstack([rng.permutation(n) for _ in range(epochs)])


def logistic_train(features, targets, epochs: int = EPOCHS, lr: float = LEARNING_RATE,
                   seed=0, l2: float = L2) -> LinearModel:
    """Binary logistic regression; deterministic for a given seed."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.shape[0] != y.size or y.size == 0:
        raise ConfigError("features and targets must be non-empty and aligned")
    if not np.all((y == 0) | (y == 1)):
        raise ConfigError("targets must be 0/1")
    if y.min() == y.max():
        raise ConfigError("logistic regression needs examples of both classes")
    xs, mean, scale = _standardize(x)
    w, b = _logistic_sgd(xs, y, _orders(y.size, epochs, seed), epochs, lr, l2)
    w_raw = w / scale
    return LinearModel(w_raw, float(b - w_raw @ mean))


def softmax_train(features, labels, epochs: int = EPOCHS, lr: float = LEARNING_RATE,
                  seed=0, l2: float = L2) -> LinearModel:
    """Multinomial logistic regression over arbitrary hashable labels."""
    x = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if x.shape[0] != labels.size or labels.size == 0:
        raise ConfigError("features and labels must be non-empty and aligned")
    classes, y = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise ConfigError("softmax regression needs at least two classes")
    xs, mean, scale = _standardize(x)
    w, b = _softmax_sgd(xs, y.astype(np.int64), classes.size, _orders(y.size, epochs, seed),
                        epochs, lr, l2)
    w_raw = w / scale[:, None]
    return LinearModel(w_raw, b - mean @ w_raw, classes)


def accuracy(model: LinearModel, features, targets) -> float:
    return float(np.mean(model.predict(features) == np.asarray(targets)))
