"""From-scratch classifier kernels sharing a train/predict contract.

Binary positive class is always labeled 1 (the "first" class of a scheme);
probabilistic models expose ``predict_proba``, margin models ``decision``.
"""

from .logistic import (ClassWeighting, LogisticModel, decide, loss_gradient,
                       predict_proba, train_logistic, weighted_log_loss)
from .bayes import GaussianNbModel, predict_nb, predict_proba_nb, train_nb
from .svm import KernelSpec, SvmModel, kkt_violation, svm_decision, svm_predict, train_svm
from .forest import (ForestModel, gini_impurity, rf_grid_search, rf_predict,
                     rf_votes, train_forest)
from .serialize import model_from_document, model_to_document

__all__ = [
    "ClassWeighting", "LogisticModel", "decide", "loss_gradient", "predict_proba",
    "train_logistic", "weighted_log_loss", "GaussianNbModel", "predict_nb",
    "predict_proba_nb", "train_nb", "KernelSpec", "SvmModel", "kkt_violation",
    "svm_decision", "svm_predict", "train_svm", "ForestModel", "gini_impurity",
    "rf_grid_search", "rf_predict", "rf_votes", "train_forest",
    "model_from_document", "model_to_document",
]
