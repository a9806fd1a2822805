"""Experiment layer: label schemes, fold plans, measurement-combination
searches, multiclass strategies and the database-size sweep.

Binary schemes follow the convention that class "C1" maps to label 1 (the
positive class): for the whole-network scheme C1 is "no disease present"; for
a single-vessel scheme C1 is "disease in that vessel". Class weighting (the
count-ratio weight with ratio r, default 1) is applied to single-vessel
schemes and to the per-class models inside the multiclass strategies, where
the positive class is the minority.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .metrics import Metrics, RocCurve, confusion_counts, roc_from_rates
from .ml import (ClassWeighting, KernelSpec, predict_nb, predict_proba,
                 rf_predict, svm_predict, train_forest, train_logistic,
                 train_nb, train_svm)
from .ml.logistic import decide
from .vpd import COEFFS_PER_MEASUREMENT, MEASUREMENT_ORDER, HealthClass, standardize

MEASUREMENT_LABELS = {"q3": "Q3", "q2": "Q2", "q1": "Q1",
                      "p3": "P3", "p2": "P2", "p1": "P1"}

BINARY_SCHEMES = ("enbc", "ivbc:aorta", "ivbc:iliac1", "ivbc:iliac2")
METHODS = ("nb", "lr", "svm", "svm_linear", "rf")

_MIRROR = {"q2": "q3", "q3": "q2", "p2": "p3", "p3": "p2",
           "q1": "q1", "p1": "p1"}


# --- labels ------------------------------------------------------------------

def make_labels(classes: np.ndarray, scheme: str) -> np.ndarray:
    """Per-row labels for a scheme: binary schemes return 1 for the positive
    class C1 and 0 otherwise; "multiclass" returns the classes unchanged."""
    classes = np.asarray(classes)
    if scheme == "multiclass":
        return classes.copy()
    if scheme == "enbc":
        return (classes == int(HealthClass.HEALTHY)).astype(np.int64)
    if scheme.startswith("ivbc:"):
        vessel = scheme.split(":", 1)[1]
        target = {"aorta": HealthClass.AORTA, "iliac1": HealthClass.ILIAC1,
                  "iliac2": HealthClass.ILIAC2}.get(vessel)
        if target is None:
            raise ValueError(f"unknown vessel in scheme {scheme!r}")
        return (classes == int(target)).astype(np.int64)
    raise ValueError(f"unknown scheme {scheme!r}")


def scheme_is_weighted(scheme: str) -> bool:
    return scheme.startswith("ivbc:")


# --- fold plans ----------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int
    train_fraction: float


def split_folds(classes: np.ndarray, seed: int, n_folds: int = 5,
                train_fraction: float = 2.0 / 3.0) -> FoldPlan:
    """Five independently seeded stratified train/test splits.

    Each fold shuffles within every class and takes the leading
    ``train_fraction`` share, so class proportions are preserved to within
    one row.
    """
    classes = np.asarray(classes)
    if len(classes) < 6:
        raise ValueError("need at least 6 rows to split")
    for cls in np.unique(classes):
        if np.sum(classes == cls) < 2:
            raise ValueError(f"class {cls} has fewer than 2 rows")
    folds = []
    for k in range(n_folds):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=seed, spawn_key=(0x0F01D, k)))
        train = []
        test = []
        for cls in np.unique(classes):
            idx = np.nonzero(classes == cls)[0]
            perm = rng.permutation(len(idx))
            n_train = int(round(train_fraction * len(idx)))
            train.extend(idx[perm[:n_train]])
            test.extend(idx[perm[n_train:]])
        folds.append((np.sort(np.asarray(train, dtype=np.int64)),
                      np.sort(np.asarray(test, dtype=np.int64))))
    return FoldPlan(folds=tuple(folds), seed=seed, train_fraction=train_fraction)


# --- measurement combinations ----------------------------------------------------

def all_combinations() -> list[tuple[str, ...]]:
    """The 63 non-empty measurement subsets in canonical order (by size, then
    by position in the Q3, Q2, Q1, P3, P2, P1 block order)."""
    out = []
    for size in range(1, 7):
        out.extend(itertools.combinations(MEASUREMENT_ORDER, size))
    return out


def combination_label(combination) -> str:
    return "+".join(MEASUREMENT_LABELS[m] for m in combination)


def feature_columns(combination) -> np.ndarray:
    cols = []
    for m in combination:
        start = MEASUREMENT_ORDER.index(m) * COEFFS_PER_MEASUREMENT
        cols.extend(range(start, start + COEFFS_PER_MEASUREMENT))
    return np.asarray(cols, dtype=np.int64)


def mirror_combination(combination) -> tuple[str, ...]:
    """Swap the two iliac probes (Q2<->Q3, P2<->P3)."""
    swapped = [_MIRROR[m] for m in combination]
    return tuple(sorted(swapped, key=MEASUREMENT_ORDER.index))


def like_for_like_pairs() -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """The 24 unordered pairs of combinations that map onto each other under
    the iliac swap; self-symmetric combinations are excluded."""
    pairs = []
    seen = set()
    for combo in all_combinations():
        twin = mirror_combination(combo)
        if twin == combo or (twin, combo) in seen:
            continue
        seen.add((combo, twin))
        pairs.append((combo, twin))
    return pairs


# --- evaluation -----------------------------------------------------------------

@dataclass(frozen=True)
class MethodConfig:
    lr_step: float = 0.1
    lr_momentum: float = 0.9
    lr_epochs: int = 500
    decision_boundary: float = 0.5
    svm_box: float = 1.0
    svm_kkt_tolerance: float = 1e-3
    svm_max_iter: int = 200_000
    rf_trees: int = 100
    rf_depth: int | None = 16
    rf_seed: int = 0
    weighting_ratio: float = 1.0
    nb_variance_floor: float = 1e-9


def _fit_predict(method: str, x_train, y_train, x_eval, pos_weight: float,
                 config: MethodConfig) -> np.ndarray:
    if method == "lr":
        model = train_logistic(x_train, y_train, pos_weight=pos_weight,
                               step=config.lr_step, momentum=config.lr_momentum,
                               epochs=config.lr_epochs)
        return decide(predict_proba(model, x_eval), config.decision_boundary)
    if method in ("svm", "svm_linear"):
        kernel = KernelSpec("rbf" if method == "svm" else "linear")
        model = train_svm(x_train, y_train, kernel, box=config.svm_box,
                          pos_weight=pos_weight, tol=config.svm_kkt_tolerance,
                          max_iter=config.svm_max_iter)
        return svm_predict(model, x_eval)
    if method == "nb":
        model = train_nb(x_train, y_train, var_floor=config.nb_variance_floor)
        return predict_nb(model, x_eval)
    if method == "rf":
        model = train_forest(x_train, y_train, n_trees=config.rf_trees,
                             max_depth=config.rf_depth, seed=config.rf_seed)
        return rf_predict(model, x_eval)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class EvaluationResult:
    scheme: str
    method: str
    combination: tuple[str, ...]
    fold_metrics: list[Metrics]
    train_fold_metrics: list[Metrics]

    @property
    def f_mean(self) -> float:
        return float(np.mean([m.f_score() for m in self.fold_metrics]))

    @property
    def sensitivity_mean(self) -> float:
        return float(np.mean([m.sensitivity for m in self.fold_metrics]))

    @property
    def specificity_mean(self) -> float:
        return float(np.mean([m.specificity for m in self.fold_metrics]))

    @property
    def train_f_mean(self) -> float:
        return float(np.mean([m.f_score() for m in self.train_fold_metrics]))


def evaluate(features: np.ndarray, classes: np.ndarray, scheme: str, method: str,
             combination, folds: FoldPlan,
             config: MethodConfig | None = None) -> EvaluationResult:
    """Train and test one (scheme, method, combination) cell across a fold
    plan; standardization statistics are refit on each fold's training rows."""
    config = config or MethodConfig()
    combination = tuple(combination)
    if not combination:
        raise ValueError("combination must be non-empty")
    labels = make_labels(classes, scheme)
    cols = feature_columns(combination)
    x = np.asarray(features, dtype=float)[:, cols]
    weighted = scheme_is_weighted(scheme)
    fold_metrics = []
    train_metrics = []
    for train_idx, test_idx in folds.folds:
        y_train = labels[train_idx]
        if len(np.unique(y_train)) < 2:
            raise ValueError("fold training data contains a single class")
        x_std, _, _ = standardize(x, train_idx)
        pos_weight = (ClassWeighting(config.weighting_ratio).weight(y_train)
                      if weighted else 1.0)
        pred_test = _fit_predict(method, x_std[train_idx], y_train,
                                 x_std[test_idx], pos_weight, config)
        pred_train = _fit_predict(method, x_std[train_idx], y_train,
                                  x_std[train_idx], pos_weight, config)
        fold_metrics.append(confusion_counts(labels[test_idx], pred_test))
        train_metrics.append(confusion_counts(y_train, pred_train))
    return EvaluationResult(scheme=scheme, method=method, combination=combination,
                            fold_metrics=fold_metrics,
                            train_fold_metrics=train_metrics)


# --- combination search -----------------------------------------------------------

@dataclass
class SearchRow:
    combination: tuple[str, ...]
    method: str
    f_mean: float
    sensitivity_mean: float
    specificity_mean: float
    error: str | None = None


@dataclass
class SearchResult:
    scheme: str
    rows: list[SearchRow] = field(default_factory=list)

    def row(self, combination, method: str) -> SearchRow:
        combination = tuple(combination)
        for r in self.rows:
            if r.combination == combination and r.method == method:
                return r
        raise KeyError(f"no row for {combination} / {method}")

    def method_table(self, method: str) -> list[SearchRow]:
        return [r for r in self.rows if r.method == method]

    def size_aggregates(self, method: str) -> list[dict]:
        """Mean/min/max mean-F versus number of measurements used."""
        out = []
        for size in range(1, 7):
            scores = [r.f_mean for r in self.rows
                      if r.method == method and len(r.combination) == size
                      and r.error is None]
            if scores:
                out.append({"size": size, "mean": float(np.mean(scores)),
                            "min": float(np.min(scores)),
                            "max": float(np.max(scores)), "count": len(scores)})
        return out


def combination_search(features: np.ndarray, classes: np.ndarray, scheme: str,
                       methods, folds: FoldPlan,
                       config: MethodConfig | None = None,
                       workers: int = 1) -> SearchResult:
    """Evaluate every measurement combination for each method.

    Failures inside a single cell are recorded on that row and do not abort
    the sweep. Cells are independent; with ``workers`` > 1 they run in a
    process pool and results are assembled in canonical order.
    """
    config = config or MethodConfig()
    combos = all_combinations()
    jobs = [(combo, method) for method in methods for combo in combos]
    result = SearchResult(scheme=scheme)
    if workers <= 1:
        cells = (_search_cell((features, classes, scheme, method, combo, folds,
                               config)) for combo, method in jobs)
    else:
        from concurrent.futures import ProcessPoolExecutor
        args = [(features, classes, scheme, method, combo, folds, config)
                for combo, method in jobs]
        pool = ProcessPoolExecutor(max_workers=workers)
        cells = pool.map(_search_cell, args, chunksize=4)
    for row in cells:
        result.rows.append(row)
    if workers > 1:
        pool.shutdown()
    return result


def _search_cell(args) -> SearchRow:
    features, classes, scheme, method, combo, folds, config = args
    try:
        cell = evaluate(features, classes, scheme, method, combo, folds, config)
        return SearchRow(combination=combo, method=method, f_mean=cell.f_mean,
                         sensitivity_mean=cell.sensitivity_mean,
                         specificity_mean=cell.specificity_mean)
    except Exception as exc:  # propagate per-cell without aborting the sweep
        return SearchRow(combination=combo, method=method, f_mean=float("nan"),
                         sensitivity_mean=float("nan"),
                         specificity_mean=float("nan"), error=str(exc))


def like_for_like_report(result: SearchResult, methods) -> dict[str, list[dict]]:
    """Absolute mean-F differences across the 24 mirror-image combination
    pairs, per method."""
    report: dict[str, list[dict]] = {}
    for method in methods:
        entries = []
        for combo, twin in like_for_like_pairs():
            row_a = result.row(combo, method)
            row_b = result.row(twin, method)
            if row_a.error or row_b.error:
                continue
            entries.append({"combination": combo, "mirror": twin,
                            "delta_f": abs(row_a.f_mean - row_b.f_mean)})
        report[method] = entries
    return report


# --- multiclass strategies ---------------------------------------------------------

N_CLASSES = 4


def ova_train(x_train: np.ndarray, classes_train: np.ndarray,
              config: MethodConfig | None = None) -> list:
    """Four one-vs-rest weighted logistic models, one per class."""
    config = config or MethodConfig()
    models = []
    for cls in range(N_CLASSES):
        y = (classes_train == cls).astype(np.int64)
        w = ClassWeighting(config.weighting_ratio).weight(y)
        models.append(train_logistic(x_train, y, pos_weight=w,
                                     step=config.lr_step,
                                     momentum=config.lr_momentum,
                                     epochs=config.lr_epochs))
    return models


def ova_probabilities(models, x: np.ndarray) -> np.ndarray:
    return np.column_stack([predict_proba(m, x) for m in models])


def ova_predict(models, x: np.ndarray) -> np.ndarray:
    """Highest per-class probability wins; ties fall to the lowest class."""
    return np.argmax(ova_probabilities(models, x), axis=1)


def ovo_train(x_train: np.ndarray, classes_train: np.ndarray,
              config: MethodConfig | None = None) -> dict[tuple[int, int], object]:
    """Six pairwise SVMs; within a pair the lower class index is positive."""
    config = config or MethodConfig()
    models = {}
    for j, k in itertools.combinations(range(N_CLASSES), 2):
        rows = np.nonzero((classes_train == j) | (classes_train == k))[0]
        y = (classes_train[rows] == j).astype(np.int64)
        w = ClassWeighting(config.weighting_ratio).weight(y)
        models[(j, k)] = train_svm(x_train[rows], y, KernelSpec("rbf"),
                                   box=config.svm_box, pos_weight=w,
                                   tol=config.svm_kkt_tolerance,
                                   max_iter=config.svm_max_iter)
    return models


def ovo_predict(models: dict, x: np.ndarray) -> np.ndarray:
    """Modal vote over the pairwise models; ties fall to the lowest class."""
    x = np.atleast_2d(x)
    votes = np.zeros((len(x), N_CLASSES), dtype=np.int64)
    for (j, k), model in models.items():
        pred = svm_predict(model, x)
        votes[pred == 1, j] += 1
        votes[pred == 0, k] += 1
    return np.argmax(votes, axis=1)


def cpc_train(x_train: np.ndarray, classes_train: np.ndarray,
              config: MethodConfig | None = None) -> list:
    """The three disease-vs-rest weighted logistic models (healthy omitted)."""
    return ova_train(x_train, classes_train, config)[1:]


def cpc_probabilities(models, x: np.ndarray) -> np.ndarray:
    return np.column_stack([predict_proba(m, x) for m in models])


def cpc_predict(probabilities: np.ndarray, boundary: float) -> np.ndarray:
    """Healthy unless some disease probability reaches the boundary, then the
    most probable diseased vessel; argmax ties fall to the lowest class."""
    if not 0.0 <= boundary <= 1.0:
        raise ValueError("boundary must lie in [0, 1]")
    probs = np.atleast_2d(np.asarray(probabilities, dtype=float))
    best = np.max(probs, axis=1)
    cls = np.argmax(probs, axis=1) + 1
    return np.where(best < boundary, 0, cls).astype(np.int64)


@dataclass
class MulticlassResult:
    strategy: str
    per_class: dict[int, list[Metrics]]  # class -> per-fold one-vs-rest metrics

    def mean_sensitivity(self, cls: int) -> float:
        return float(np.mean([m.sensitivity for m in self.per_class[cls]]))

    def mean_specificity(self, cls: int) -> float:
        return float(np.mean([m.specificity for m in self.per_class[cls]]))


def multiclass_evaluate(features: np.ndarray, classes: np.ndarray, strategy: str,
                        folds: FoldPlan, config: MethodConfig | None = None,
                        boundary: float = 0.5,
                        combination=MEASUREMENT_ORDER) -> MulticlassResult:
    """Per-class sensitivity/specificity of a multiclass strategy across
    folds, using all six measurements by default."""
    config = config or MethodConfig()
    if strategy not in ("ova", "ovo", "cpc"):
        raise ValueError(f"unknown strategy {strategy!r}")
    cols = feature_columns(combination)
    x = np.asarray(features, dtype=float)[:, cols]
    classes = np.asarray(classes)
    per_class: dict[int, list[Metrics]] = {c: [] for c in range(N_CLASSES)}
    for train_idx, test_idx in folds.folds:
        x_std, _, _ = standardize(x, train_idx)
        ctrain = classes[train_idx]
        if strategy == "ova":
            models = ova_train(x_std[train_idx], ctrain, config)
            pred = ova_predict(models, x_std[test_idx])
        elif strategy == "ovo":
            models = ovo_train(x_std[train_idx], ctrain, config)
            pred = ovo_predict(models, x_std[test_idx])
        else:
            models = cpc_train(x_std[train_idx], ctrain, config)
            pred = cpc_predict(cpc_probabilities(models, x_std[test_idx]), boundary)
        truth = classes[test_idx]
        for cls in range(N_CLASSES):
            per_class[cls].append(confusion_counts(truth == cls, pred == cls,
                                                   positive=True))
    return MulticlassResult(strategy=strategy, per_class=per_class)


def cpc_roc(features: np.ndarray, classes: np.ndarray, folds: FoldPlan,
            config: MethodConfig | None = None, boundaries=None,
            combination=MEASUREMENT_ORDER) -> RocCurve:
    """Healthy-class ROC of the probabilistic configuration.

    Per-boundary true/false positive rates of healthy classification are
    averaged across folds; the curve runs from (0, 0) at boundary 0 to (1, 1)
    at boundary 1.
    """
    config = config or MethodConfig()
    if boundaries is None:
        boundaries = np.linspace(0.0, 1.0, 201)
    boundaries = np.asarray(boundaries, dtype=float)
    if boundaries[0] != 0.0 or boundaries[-1] != 1.0:
        raise ValueError("boundary grid must include 0 and 1")
    cols = feature_columns(combination)
    x = np.asarray(features, dtype=float)[:, cols]
    classes = np.asarray(classes)
    tpr = np.zeros((len(folds.folds), len(boundaries)))
    fpr = np.zeros_like(tpr)
    for fi, (train_idx, test_idx) in enumerate(folds.folds):
        x_std, _, _ = standardize(x, train_idx)
        models = cpc_train(x_std[train_idx], classes[train_idx], config)
        probs = cpc_probabilities(models, x_std[test_idx])
        truth_healthy = classes[test_idx] == 0
        n_pos = int(np.sum(truth_healthy))
        n_neg = len(truth_healthy) - n_pos
        if n_pos == 0 or n_neg == 0:
            raise ValueError("ROC needs both healthy and diseased test rows")
        for bi, b in enumerate(boundaries):
            pred_healthy = cpc_predict(probs, b) == 0
            tpr[fi, bi] = np.sum(pred_healthy & truth_healthy) / n_pos
            fpr[fi, bi] = np.sum(pred_healthy & ~truth_healthy) / n_neg
    return roc_from_rates(boundaries, fpr.mean(axis=0), tpr.mean(axis=0))


def healthy_score_roc(probabilities: np.ndarray, classes: np.ndarray,
                      boundaries: np.ndarray) -> RocCurve:
    """Healthy-class ROC from a fixed table of disease probabilities.

    The decision statistic is the highest disease probability; a row is
    predicted healthy when it stays below the boundary.
    """
    boundaries = np.asarray(boundaries, dtype=float)
    if boundaries[0] != 0.0 or boundaries[-1] != 1.0:
        raise ValueError("boundary grid must include 0 and 1")
    classes = np.asarray(classes)
    truth_healthy = classes == 0
    n_pos = int(np.sum(truth_healthy))
    n_neg = len(classes) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need both healthy and diseased rows")
    tpr = np.empty(len(boundaries))
    fpr = np.empty(len(boundaries))
    for bi, b in enumerate(boundaries):
        pred_healthy = cpc_predict(probabilities, b) == 0
        tpr[bi] = np.sum(pred_healthy & truth_healthy) / n_pos
        fpr[bi] = np.sum(pred_healthy & ~truth_healthy) / n_neg
    return roc_from_rates(boundaries, fpr, tpr)


# --- database-size sweep ---------------------------------------------------------

VESSEL_SCHEMES = ("ivbc:aorta", "ivbc:iliac1", "ivbc:iliac2")


def vpd_size_sweep(features: np.ndarray, classes: np.ndarray, sizes,
                   seed: int, config: MethodConfig | None = None) -> list[dict]:
    """Train/test F scores of weighted logistic single-vessel classifiers on
    nested seeded subsamples of increasing size.

    For a fixed seed the subsample of a smaller size is a prefix of every
    larger one. Returns one row per (size, vessel).
    """
    config = config or MethodConfig()
    classes = np.asarray(classes)
    features = np.asarray(features, dtype=float)
    sizes = sorted(int(s) for s in sizes)
    if sizes[0] < 6:
        raise ValueError("smallest size is below a viable fold")
    if sizes[-1] > len(classes):
        raise ValueError(f"size {sizes[-1]} exceeds the dataset ({len(classes)} rows)")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(0x512E,)))
    order = rng.permutation(len(classes))
    rows = []
    for size in sizes:
        subset = order[:size]
        sub_feats = features[subset]
        sub_classes = classes[subset]
        folds = split_folds(sub_classes, seed)
        for scheme in VESSEL_SCHEMES:
            cell = evaluate(sub_feats, sub_classes, scheme, "lr",
                            MEASUREMENT_ORDER, folds, config)
            rows.append({"size": size, "scheme": scheme,
                         "train_f": cell.train_f_mean, "test_f": cell.f_mean})
    return rows
