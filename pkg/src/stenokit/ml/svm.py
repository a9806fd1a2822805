"""Soft-margin SVM trained by sequential minimal optimization.

Pairwise updates follow Platt's working-set heuristics with deterministic
scan orders (no RNG), so training is reproducible bit for bit. Class
imbalance is handled by scaling the box constraint per class with the same
count-ratio weight used by the logistic loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_ALPHA_EPS = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"          # "rbf" or "linear"
    gamma: float | None = None  # rbf bandwidth; defaults to 1 / n_features

    def __post_init__(self) -> None:
        if self.kind not in ("rbf", "linear"):
            raise ValueError("kernel kind must be 'rbf' or 'linear'")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def resolve_gamma(self, n_features: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 / n_features


@dataclass
class SvmModel:
    kernel: KernelSpec
    gamma: float
    support_vectors: np.ndarray  # (s, d)
    dual_coef: np.ndarray        # (s,), alpha_i * y_i with y in {-1, +1}
    bias: float
    box: float
    pos_weight: float
    n_iterations: int
    max_kkt_violation: float

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


class SvmConvergenceError(RuntimeError):
    def __init__(self, iterations: int, violation: float):
        super().__init__(f"SMO did not converge within {iterations} pair updates "
                         f"(max KKT violation {violation:.3e})")
        self.iterations = iterations
        self.violation = violation


def kernel_matrix(spec_kind: str, gamma: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if spec_kind == "linear":
        return a @ b.T
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    return np.exp(-gamma * np.maximum(sq, 0.0))


@njit(cache=True)
def _smo(kmat, signs, boxes, tol, max_iter):
    """Maximal-violating-pair SMO on the soft-margin dual.

    ``grad[i]`` tracks s_i - f(x_i) without the bias; the optimality gap is
    max over the "up" set minus min over the "down" set of grad, and the
    final bias is the midpoint of those two extremes.
    """
    n = len(signs)
    alpha = np.zeros(n)
    grad = signs.copy()  # s_i - f~(x_i), f~ = 0 initially
    it = 0
    gap = np.inf
    while it < max_iter:
        it += 1
        up_best = -np.inf
        lo_best = np.inf
        i1 = -1
        for t in range(n):
            st = signs[t]
            at = alpha[t]
            if (st > 0.0 and at < boxes[t] - _ALPHA_EPS) or \
               (st < 0.0 and at > _ALPHA_EPS):
                if grad[t] > up_best:
                    up_best = grad[t]
                    i1 = t
            if (st < 0.0 and at < boxes[t] - _ALPHA_EPS) or \
               (st > 0.0 and at > _ALPHA_EPS):
                if grad[t] < lo_best:
                    lo_best = grad[t]
        gap = up_best - lo_best
        if i1 < 0 or gap <= tol:
            break
        # second-order partner choice: largest decrease of the dual objective
        i2 = -1
        obj_best = 0.0
        k11 = kmat[i1, i1]
        for t in range(n):
            st = signs[t]
            at = alpha[t]
            if (st < 0.0 and at < boxes[t] - _ALPHA_EPS) or \
               (st > 0.0 and at > _ALPHA_EPS):
                diff = up_best - grad[t]
                if diff > 0.0:
                    eta_t = k11 + kmat[t, t] - 2.0 * kmat[i1, t]
                    if eta_t <= 1e-12:
                        eta_t = 1e-12
                    dec = -(diff * diff) / eta_t
                    if dec < obj_best:
                        obj_best = dec
                        i2 = t
        if i2 < 0:
            break
        s1 = signs[i1]
        s2 = signs[i2]
        a1 = alpha[i1]
        a2 = alpha[i2]
        c1 = boxes[i1]
        c2 = boxes[i2]
        if s1 != s2:
            lo = max(0.0, a2 - a1)
            hi = min(c2, c1 + a2 - a1)
        else:
            lo = max(0.0, a1 + a2 - c1)
            hi = min(c2, a1 + a2)
        eta = kmat[i1, i1] + kmat[i2, i2] - 2.0 * kmat[i1, i2]
        if eta <= 1e-12:
            eta = 1e-12
        # unconstrained optimum along the feasible direction, then clip
        a2_new = a2 - s2 * (up_best - grad[i2]) / eta
        if a2_new < lo:
            a2_new = lo
        elif a2_new > hi:
            a2_new = hi
        if a2_new == a2:
            break
        a1_new = a1 + s1 * s2 * (a2 - a2_new)
        d1 = s1 * (a1_new - a1)
        d2 = s2 * (a2_new - a2)
        for t in range(n):
            grad[t] -= d1 * kmat[i1, t] + d2 * kmat[i2, t]
        alpha[i1] = a1_new
        alpha[i2] = a2_new
    # bias from the optimality interval; violation is the remaining gap
    up_best = -np.inf
    lo_best = np.inf
    for t in range(n):
        st = signs[t]
        at = alpha[t]
        if (st > 0.0 and at < boxes[t] - _ALPHA_EPS) or \
           (st < 0.0 and at > _ALPHA_EPS):
            if grad[t] > up_best:
                up_best = grad[t]
        if (st < 0.0 and at < boxes[t] - _ALPHA_EPS) or \
           (st > 0.0 and at > _ALPHA_EPS):
            if grad[t] < lo_best:
                lo_best = grad[t]
    if np.isfinite(up_best) and np.isfinite(lo_best):
        bias = 0.5 * (up_best + lo_best)
        violation = max(0.0, up_best - lo_best)
    else:
        bias = up_best if np.isfinite(up_best) else (
            lo_best if np.isfinite(lo_best) else 0.0)
        violation = 0.0
    return alpha, bias, it, violation


def train_svm(x: np.ndarray, labels: np.ndarray, kernel: KernelSpec | None = None,
              box: float = 1.0, pos_weight: float = 1.0, tol: float = 1e-3,
              max_iter: int = 200_000) -> SvmModel:
    """Solve the soft-margin dual to the KKT tolerance.

    ``labels`` are 0/1 with 1 the positive class; its box constraint is
    scaled by ``pos_weight``. Raises :class:`SvmConvergenceError` when the
    pair-update cap is hit with violations above tolerance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels)
    present = set(np.unique(y))
    if present - {0, 1} or len(present) != 2:
        raise ValueError("labels must contain both classes 0 and 1")
    kernel = kernel or KernelSpec()
    gamma = kernel.resolve_gamma(x.shape[1])
    signs = np.where(y == 1, 1.0, -1.0)
    boxes = np.where(y == 1, box * pos_weight, box).astype(float)
    kmat = kernel_matrix(kernel.kind, gamma, x, x)
    alpha, bias, iters, violation = _smo(kmat, signs, boxes, tol, max_iter)
    if iters >= max_iter and violation > tol:
        raise SvmConvergenceError(iters, violation)
    on = alpha > _ALPHA_EPS
    return SvmModel(kernel=kernel, gamma=gamma, support_vectors=x[on].copy(),
                    dual_coef=(alpha[on] * signs[on]).copy(), bias=float(bias),
                    box=box, pos_weight=pos_weight, n_iterations=iters,
                    max_kkt_violation=float(violation))


def svm_decision(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Signed margin score; positive class corresponds to positive score."""
    x = np.asarray(x, dtype=float)
    cols = x.shape[-1] if x.ndim > 1 else len(x)
    if cols != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {cols}")
    km = kernel_matrix(model.kernel.kind, model.gamma, np.atleast_2d(x),
                       model.support_vectors)
    return km @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """0/1 prediction; scores of exactly zero fall to the positive class."""
    return (svm_decision(model, x) >= 0.0).astype(np.int64)


def kkt_violation(model: SvmModel, x: np.ndarray, labels: np.ndarray) -> float:
    """Largest complementarity violation of the stored solution on its
    training set; at convergence this is below the training tolerance."""
    signs = np.where(np.asarray(labels) == 1, 1.0, -1.0)
    scores = svm_decision(model, x)
    margins = signs * scores
    # reconstruct per-sample alphas from the stored support set
    alpha_full = np.zeros(len(signs))
    sv_rows = _match_rows(np.asarray(x, dtype=float), model.support_vectors)
    alpha_full[sv_rows] = np.abs(model.dual_coef)
    boxes = np.where(signs > 0, model.box * model.pos_weight, model.box)
    worst = 0.0
    for a, m, c in zip(alpha_full, margins, boxes):
        if a < c - _ALPHA_EPS:
            worst = max(worst, 1.0 - m)
        if a > _ALPHA_EPS:
            worst = max(worst, m - 1.0)
    return float(worst)


def _match_rows(x: np.ndarray, sv: np.ndarray) -> np.ndarray:
    idx = []
    used = set()
    for row in sv:
        hits = np.nonzero(np.all(x == row, axis=1))[0]
        pick = next(h for h in hits if h not in used)
        used.add(pick)
        idx.append(pick)
    return np.asarray(idx, dtype=np.int64)
