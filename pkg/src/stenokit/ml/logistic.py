"""Weighted logistic regression trained by full-batch gradient descent with
momentum.

The loss is the class-weighted log loss: the positive-class term of each
sample is multiplied by a weight w, so that w = 1 recovers the plain log
loss exactly. For imbalanced binary tasks w is derived from the class counts
through :class:`ClassWeighting`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PROB_EPS = 1e-12


@dataclass(frozen=True)
class ClassWeighting:
    """Positive-class cost weight from the effective-count ratio.

    ``ratio`` relates the effective numbers of positive and negative training
    samples; the applied weight is w = ratio * m_neg / m_pos, so ratio = 1
    makes both classes contribute equally to the total cost.
    """

    ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.ratio <= 0:
            raise ValueError("ratio must be positive")

    def weight(self, labels: np.ndarray) -> float:
        labels = np.asarray(labels)
        m_pos = int(np.sum(labels == 1))
        m_neg = int(np.sum(labels == 0))
        if m_pos == 0 or m_neg == 0:
            raise ValueError("both classes must be present to derive a weight")
        return self.ratio * m_neg / m_pos


@dataclass
class LogisticModel:
    weights: np.ndarray       # feature weights with the bias as last entry
    loss_history: np.ndarray  # training loss per epoch, initial state included

    @property
    def n_features(self) -> int:
        return len(self.weights) - 1


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _augment(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return np.hstack([x, np.ones((len(x), 1))])


def weighted_log_loss(weights: np.ndarray, x: np.ndarray, labels: np.ndarray,
                      pos_weight: float = 1.0) -> float:
    xa = _augment(x)
    h = np.clip(sigmoid(xa @ weights), _PROB_EPS, 1.0 - _PROB_EPS)
    y = np.asarray(labels, dtype=float)
    return float(-np.mean(pos_weight * y * np.log(h) + (1.0 - y) * np.log(1.0 - h)))


def loss_gradient(weights: np.ndarray, x: np.ndarray, labels: np.ndarray,
                  pos_weight: float = 1.0) -> np.ndarray:
    xa = _augment(x)
    h = sigmoid(xa @ weights)
    y = np.asarray(labels, dtype=float)
    scale = 1.0 + (pos_weight - 1.0) * y
    return xa.T @ (h * scale - pos_weight * y) / len(y)


def train_logistic(x: np.ndarray, labels: np.ndarray, pos_weight: float = 1.0,
                   step: float = 0.1, momentum: float = 0.9,
                   epochs: int = 500) -> LogisticModel:
    """Minimize the weighted log loss with momentum gradient descent.

    Raises on non-finite loss (diverging step size) with the epoch index.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels)
    if set(np.unique(y)) - {0, 1}:
        raise ValueError("labels must be 0/1")
    weights = np.zeros(x.shape[1] + 1)
    velocity = np.zeros_like(weights)
    history = np.empty(epochs + 1)
    history[0] = weighted_log_loss(weights, x, y, pos_weight)
    for epoch in range(epochs):
        grad = loss_gradient(weights, x, y, pos_weight)
        with np.errstate(over="ignore"):
            velocity = momentum * velocity - step * grad
            weights = weights + velocity
        loss = weighted_log_loss(weights, x, y, pos_weight)
        if not np.isfinite(loss) or not np.all(np.isfinite(weights)):
            raise FloatingPointError(f"non-finite loss or weights at epoch "
                                     f"{epoch + 1}; reduce the step size")
        history[epoch + 1] = loss
    return LogisticModel(weights=weights, loss_history=history)


def predict_proba(model: LogisticModel, x: np.ndarray) -> np.ndarray:
    """Positive-class probability; clipped away from exact 0/1 so threshold
    sweeps over [0, 1] retain both decisions."""
    x = np.asarray(x, dtype=float)
    cols = x.shape[-1] if x.ndim > 1 else len(x)
    if cols != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {cols}")
    p = sigmoid(_augment(x) @ model.weights)
    return np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)


def decide(probability, boundary: float = 0.5) -> np.ndarray:
    """Class decision: positive (1) iff probability >= boundary."""
    if not 0.0 <= boundary <= 1.0:
        raise ValueError("boundary must lie in [0, 1]")
    return (np.asarray(probability) >= boundary).astype(np.int64)
