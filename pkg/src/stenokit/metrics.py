"""Confusion counts, sensitivity/specificity, F scores and ROC curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Metrics:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else 0.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.sensitivity

    @property
    def f_defined(self) -> bool:
        return self.precision + self.recall > 0

    def f_score(self, delta: float = 1.0) -> float:
        return f_score(self.precision, self.recall, delta)


def confusion_counts(y_true, y_pred, positive=1) -> Metrics:
    t = np.asarray(y_true) == positive
    p = np.asarray(y_pred) == positive
    return Metrics(tp=int(np.sum(t & p)), fn=int(np.sum(t & ~p)),
                   fp=int(np.sum(~t & p)), tn=int(np.sum(~t & ~p)))


def f_score(precision: float, recall: float, delta: float = 1.0) -> float:
    """(delta^2+1) P R / (delta^2 P + R); 0 when both P and R vanish (the
    harmonic mean is undefined there - check ``Metrics.f_defined``)."""
    if precision + recall == 0.0:
        return 0.0
    d2 = delta * delta
    return (d2 + 1.0) * precision * recall / (d2 * precision + recall)


@dataclass(frozen=True)
class RocCurve:
    boundaries: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_from_rates(boundaries, fpr, tpr) -> RocCurve:
    """Assemble a curve from per-boundary rates; AUC by the trapezoidal rule
    over points sorted by (FPR, TPR)."""
    boundaries = np.asarray(boundaries, dtype=float)
    fpr = np.asarray(fpr, dtype=float)
    tpr = np.asarray(tpr, dtype=float)
    order = np.lexsort((tpr, fpr))
    auc = float(np.trapezoid(tpr[order], fpr[order]))
    return RocCurve(boundaries=boundaries, fpr=fpr, tpr=tpr, auc=auc)
