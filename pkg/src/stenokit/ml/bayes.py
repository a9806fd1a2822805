"""Gaussian naive Bayes: per-class priors and independent normal likelihoods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GaussianNbModel:
    classes: np.ndarray    # sorted class labels
    priors: np.ndarray     # (k,), sums to 1
    means: np.ndarray      # (k, d)
    variances: np.ndarray  # (k, d), floored away from zero


def train_nb(x: np.ndarray, labels: np.ndarray, var_floor: float = 1e-9) -> GaussianNbModel:
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    k, d = len(classes), x.shape[1]
    priors = np.empty(k)
    means = np.empty((k, d))
    variances = np.empty((k, d))
    for j, cls in enumerate(classes):
        rows = x[labels == cls]
        if len(rows) < 2:
            raise ValueError(f"class {cls} has fewer than 2 samples")
        priors[j] = len(rows) / len(x)
        means[j] = rows.mean(axis=0)
        variances[j] = np.maximum(rows.var(axis=0), var_floor)
    return GaussianNbModel(classes=classes, priors=priors, means=means,
                           variances=variances)


def _log_joint(model: GaussianNbModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    log_joint = np.empty((len(x), len(model.classes)))
    for j in range(len(model.classes)):
        delta = x - model.means[j]
        log_like = -0.5 * np.sum(np.log(2.0 * np.pi * model.variances[j])
                                 + delta * delta / model.variances[j], axis=1)
        log_joint[:, j] = np.log(model.priors[j]) + log_like
    return log_joint


def predict_proba_nb(model: GaussianNbModel, x: np.ndarray) -> np.ndarray:
    """Normalized posterior per class, rows summing to 1."""
    log_joint = _log_joint(model, x)
    log_joint -= log_joint.max(axis=1, keepdims=True)
    joint = np.exp(log_joint)
    return joint / joint.sum(axis=1, keepdims=True)


def predict_nb(model: GaussianNbModel, x: np.ndarray) -> np.ndarray:
    return model.classes[np.argmax(_log_joint(model, x), axis=1)]
