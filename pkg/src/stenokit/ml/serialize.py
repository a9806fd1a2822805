"""Versioned JSON-compatible model documents with bit-exact round trips.

Floats survive json encode/decode exactly (shortest round-trip decimals), so
predictions from a restored model match the original bit for bit.
"""

from __future__ import annotations

import numpy as np

from .bayes import GaussianNbModel
from .forest import ForestModel, Tree
from .logistic import LogisticModel
from .svm import KernelSpec, SvmModel

_VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a).tolist()


def model_to_document(model) -> dict:
    if isinstance(model, LogisticModel):
        return {"kind": "logistic_regression", "version": _VERSION,
                "weights": _arr(model.weights),
                "loss_history": _arr(model.loss_history)}
    if isinstance(model, GaussianNbModel):
        return {"kind": "gaussian_naive_bayes", "version": _VERSION,
                "classes": _arr(model.classes), "priors": _arr(model.priors),
                "means": _arr(model.means), "variances": _arr(model.variances)}
    if isinstance(model, SvmModel):
        return {"kind": "svm", "version": _VERSION,
                "kernel": model.kernel.kind, "gamma": model.gamma,
                "support_vectors": _arr(model.support_vectors),
                "dual_coef": _arr(model.dual_coef), "bias": model.bias,
                "box": model.box, "pos_weight": model.pos_weight,
                "n_iterations": model.n_iterations,
                "max_kkt_violation": model.max_kkt_violation}
    if isinstance(model, ForestModel):
        return {"kind": "random_forest", "version": _VERSION,
                "n_classes": model.n_classes, "n_trees": model.n_trees,
                "max_depth": model.max_depth, "seeds": _arr(model.seeds),
                "feature_subsample": model.feature_subsample,
                "trees": [{"feature": _arr(t.feature),
                           "threshold": _arr(t.threshold),
                           "left": _arr(t.left), "right": _arr(t.right),
                           "histogram": _arr(t.histogram)} for t in model.trees]}
    raise TypeError(f"unsupported model type {type(model).__name__}")


def model_from_document(doc: dict):
    version = doc.get("version")
    if version != _VERSION:
        raise ValueError(f"unsupported model document version {version}")
    kind = doc.get("kind")
    if kind == "logistic_regression":
        return LogisticModel(weights=np.asarray(doc["weights"], dtype=float),
                             loss_history=np.asarray(doc["loss_history"], dtype=float))
    if kind == "gaussian_naive_bayes":
        return GaussianNbModel(classes=np.asarray(doc["classes"]),
                               priors=np.asarray(doc["priors"], dtype=float),
                               means=np.asarray(doc["means"], dtype=float),
                               variances=np.asarray(doc["variances"], dtype=float))
    if kind == "svm":
        return SvmModel(kernel=KernelSpec(kind=doc["kernel"], gamma=doc["gamma"]),
                        gamma=doc["gamma"],
                        support_vectors=np.asarray(doc["support_vectors"], dtype=float),
                        dual_coef=np.asarray(doc["dual_coef"], dtype=float),
                        bias=doc["bias"], box=doc["box"],
                        pos_weight=doc["pos_weight"],
                        n_iterations=doc["n_iterations"],
                        max_kkt_violation=doc["max_kkt_violation"])
    if kind == "random_forest":
        trees = [Tree(feature=np.asarray(t["feature"], dtype=np.int64),
                      threshold=np.asarray(t["threshold"], dtype=float),
                      left=np.asarray(t["left"], dtype=np.int64),
                      right=np.asarray(t["right"], dtype=np.int64),
                      histogram=np.asarray(t["histogram"], dtype=np.int64))
                 for t in doc["trees"]]
        return ForestModel(trees=trees, n_classes=doc["n_classes"],
                           n_trees=doc["n_trees"], max_depth=doc["max_depth"],
                           seeds=np.asarray(doc["seeds"], dtype=np.int64),
                           feature_subsample=doc["feature_subsample"])
    raise ValueError(f"unknown model kind {kind!r}")
