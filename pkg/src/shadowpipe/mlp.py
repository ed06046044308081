"""Small fully-deterministic neural classifier: one hidden layer, sigmoid
output, full-batch gradient descent on binary cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    seed: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpModel):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.w1, other.w1)
            and np.array_equal(self.b1, other.b1)
            and np.array_equal(self.w2, other.w2)
            and np.array_equal(self.b2, other.b2)
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_mlp(
    vectors: np.ndarray,
    labels: np.ndarray,
    hidden_units: int,
    epochs: int,
    learning_rate: float,
    seed: int,
) -> MlpModel:
    """Deterministic given (data, hyperparameters, seed)."""
    x = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, dim = x.shape
    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(max(dim, 1)), size=(dim, hidden_units))
    b1 = np.zeros(hidden_units)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(max(hidden_units, 1)), size=(hidden_units, 1))
    b2 = np.zeros(1)
    if n == 0:
        return MlpModel(w1, b1, w2, b2, seed)
    yt = y.reshape(-1, 1)
    for _ in range(epochs):
        h = np.tanh(x @ w1 + b1)
        p = _sigmoid(h @ w2 + b2)
        # BCE gradient; full batch
        dz2 = (p - yt) / n
        dw2 = h.T @ dz2
        db2 = dz2.sum(axis=0)
        dh = dz2 @ w2.T * (1.0 - h * h)
        dw1 = x.T @ dh
        db1 = dh.sum(axis=0)
        w1 = w1 - learning_rate * dw1
        b1 = b1 - learning_rate * db1
        w2 = w2 - learning_rate * dw2
        b2 = b2 - learning_rate * db2
    return MlpModel(w1, b1, w2, b2, seed)


def predict_mlp(model: MlpModel, vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    h = np.tanh(x @ model.w1 + model.b1)
    p = _sigmoid(h @ model.w2 + model.b2).ravel()
    return (p >= 0.5).astype(np.int64)
