"""Minimal from-scratch learners for binary classification on encoded matrices.

Nothing here depends on an ML framework on purpose: the point is that
training cost is fully determined by the dataset shape, so energy and time
measurements stay comparable across treatments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_EPS = 1e-15


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    correct: int
    total: int
    log_loss: Optional[float] = None


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 300
    batch_size: Optional[int] = None  # None = full batch
    seed: int = 0
    l2: float = 0.0


def _check_binary(values, name):
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr.astype(np.int64)


def accuracy(predictions, labels) -> EvalResult:
    """Exact fraction of matching hard labels."""
    preds = _check_binary(predictions, "predictions")
    y = _check_binary(labels, "labels")
    if preds.size != y.size:
        raise ValueError(f"length mismatch: {preds.size} predictions vs {y.size} labels")
    if preds.size == 0:
        raise ValueError("cannot score zero predictions")
    correct = int((preds == y).sum())
    return EvalResult(accuracy=correct / preds.size, correct=correct, total=int(preds.size))


def evaluate_probabilities(probabilities, labels) -> EvalResult:
    """Hard labels at the 0.5 threshold (p >= 0.5 predicts 1) plus mean log loss."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = _check_binary(labels, "labels")
    if p.size != y.size:
        raise ValueError(f"length mismatch: {p.size} probabilities vs {y.size} labels")
    if p.size == 0:
        raise ValueError("cannot score zero predictions")
    preds = (p >= 0.5).astype(np.int64)
    clipped = np.clip(p, _EPS, 1.0 - _EPS)
    loss = float(-np.mean(y * np.log(clipped) + (1 - y) * np.log(1.0 - clipped)))
    correct = int((preds == y).sum())
    return EvalResult(
        accuracy=correct / preds.size, correct=correct, total=int(preds.size), log_loss=loss
    )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# ---------------------------------------------------------------------------
# k nearest neighbours


class KnnModel:
    """Euclidean k-NN. Distance ties resolve to the lower training row index,
    vote ties to the label of the single nearest neighbour."""

    def __init__(self, train_x, train_y, k: int = 5):
        self.x = np.asarray(train_x, dtype=np.float64)
        self.y = _check_binary(train_y, "train_y")
        if self.x.ndim != 2:
            raise ValueError("train_x must be a 2-d matrix")
        if self.x.shape[0] != self.y.size:
            raise ValueError("train_x and train_y disagree on the number of rows")
        if self.x.shape[0] == 0:
            raise ValueError("k-NN needs at least one training row")
        if not 1 <= k <= self.x.shape[0]:
            raise ValueError(f"k must be within [1, {self.x.shape[0]}], got {k}")
        self.k = k

    def _neighbor_rows(self, queries: np.ndarray) -> np.ndarray:
        n, d = self.x.shape
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != d:
            raise ValueError(f"queries must have shape (*, {d})")
        out = np.empty((q.shape[0], self.k), dtype=np.int64)
        # direct squared differences, chunked over queries to bound memory
        chunk = max(1, int(48_000_000 // (max(1, n * d) * 8)))
        for start in range(0, q.shape[0], chunk):
            block = q[start : start + chunk]
            d2 = ((block[:, None, :] - self.x[None, :, :]) ** 2).sum(axis=2)
            # stable sort keeps the lower row index first among equal distances
            out[start : start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return out

    def predict_proba(self, queries) -> np.ndarray:
        rows = self._neighbor_rows(queries)
        return self.y[rows].mean(axis=1)

    def predict(self, queries) -> np.ndarray:
        rows = self._neighbor_rows(queries)
        votes = self.y[rows].sum(axis=1)
        preds = np.empty(rows.shape[0], dtype=np.int64)
        half = self.k / 2.0
        for i in range(rows.shape[0]):
            if votes[i] * 2 == self.k:
                preds[i] = self.y[rows[i, 0]]  # tie: nearest neighbour decides
            else:
                preds[i] = 1 if votes[i] > half else 0
        return preds


def knn_predict(train_x, train_y, queries, k: int = 5) -> np.ndarray:
    return KnnModel(train_x, train_y, k).predict(queries)


# ---------------------------------------------------------------------------
# logistic regression


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    loss_history: list = field(default_factory=list, repr=False)

    def predict_proba(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return _sigmoid(x @ self.weights + self.bias)

    def predict(self, x) -> np.ndarray:
        return (self.predict_proba(x) >= 0.5).astype(np.int64)


def logreg_loss(weights, bias, x, y, l2: float = 0.0) -> float:
    """Mean log loss plus the optional ridge term (the training objective)."""
    z = x @ weights + bias
    # log(1 + e^z) - y*z, computed stably
    data = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return data + 0.5 * l2 * float(weights @ weights)


def logreg_gradient(weights, bias, x, y, l2: float = 0.0):
    p = _sigmoid(x @ weights + bias)
    err = (p - y) / x.shape[0]
    return x.T @ err + l2 * weights, float(err.sum())


def train_logreg(x, y, config: TrainConfig = TrainConfig()) -> LogRegModel:
    """Gradient descent from zero weights; full-batch unless batch_size is set."""
    x = np.asarray(x, dtype=np.float64)
    y = _check_binary(y, "labels").astype(np.float64)
    if x.ndim != 2 or x.shape[0] != y.size or x.shape[0] == 0:
        raise ValueError("need a non-empty 2-d matrix with one label per row")
    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    history: list[float] = []
    if config.batch_size is None:
        # full batch: one forward pass per epoch gives both the loss entry
        # (at the pre-update weights) and the gradient
        lr, l2 = config.learning_rate, config.l2
        for _ in range(config.epochs):
            z = x @ w + b
            data = float(np.logaddexp(0.0, z).mean()) - float(y @ z) / n
            history.append(data + 0.5 * l2 * float(w @ w) if l2 else data)
            err = (_sigmoid(z) - y) / n
            gw = x.T @ err
            if l2:
                gw += l2 * w
            w -= lr * gw
            b -= lr * float(err.sum())
    else:
        rng = np.random.default_rng(config.seed)
        history.append(logreg_loss(w, b, x, y, config.l2))
        for epoch in range(config.epochs):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                gw, gb = logreg_gradient(w, b, x[idx], y[idx], config.l2)
                w -= config.learning_rate * gw
                b -= config.learning_rate * gb
            if epoch < config.epochs - 1:
                history.append(logreg_loss(w, b, x, y, config.l2))
    history.append(logreg_loss(w, b, x, y, config.l2))
    return LogRegModel(weights=w, bias=b, loss_history=history)


# ---------------------------------------------------------------------------
# feedforward network, one hidden layer


@dataclass
class NnModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    loss_history: list = field(default_factory=list, repr=False)

    def predict_proba(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        hidden = np.maximum(x @ self.w1 + self.b1, 0.0)
        return _sigmoid(hidden @ self.w2 + self.b2)

    def predict(self, x) -> np.ndarray:
        return (self.predict_proba(x) >= 0.5).astype(np.int64)


def nn_loss(params, x, y) -> float:
    w1, b1, w2, b2 = params
    hidden = np.maximum(x @ w1 + b1, 0.0)
    z = hidden @ w2 + b2
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def nn_gradient(params, x, y):
    w1, b1, w2, b2 = params
    m = x.shape[0]
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    p = _sigmoid(z2)
    dz2 = (p - y) / m
    gw2 = a1.T @ dz2
    gb2 = float(dz2.sum())
    da1 = np.outer(dz2, w2)
    dz1 = da1 * (z1 > 0.0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return gw1, gb1, gw2, gb2


_NN_DEFAULTS = TrainConfig(learning_rate=0.01, epochs=50, batch_size=32, seed=0)


def train_nn(x, y, config: TrainConfig = _NN_DEFAULTS, hidden: int = 64) -> NnModel:
    """Mini-batch gradient descent; ReLU hidden layer, logistic output."""
    x = np.asarray(x, dtype=np.float64)
    y = _check_binary(y, "labels").astype(np.float64)
    if x.ndim != 2 or x.shape[0] != y.size or x.shape[0] == 0:
        raise ValueError("need a non-empty 2-d matrix with one label per row")
    if hidden < 1:
        raise ValueError("hidden width must be at least 1")
    rng = np.random.default_rng(config.seed)
    d = x.shape[1]
    w1 = rng.normal(0.0, np.sqrt(2.0 / max(1, d)), size=(d, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(1.0 / hidden), size=hidden)
    b2 = 0.0
    history = [nn_loss((w1, b1, w2, b2), x, y)]
    batch = config.batch_size or x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch):
            idx = order[start : start + batch]
            gw1, gb1, gw2, gb2 = nn_gradient((w1, b1, w2, b2), x[idx], y[idx])
            w1 -= config.learning_rate * gw1
            b1 -= config.learning_rate * gb1
            w2 -= config.learning_rate * gw2
            b2 -= config.learning_rate * gb2
        history.append(nn_loss((w1, b1, w2, b2), x, y))
    return NnModel(w1=w1, b1=b1, w2=w2, b2=b2, loss_history=history)
