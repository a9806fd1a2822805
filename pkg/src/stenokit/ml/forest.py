"""Random forest of Gini-impurity decision trees with bootstrap aggregation.

Trees are stored as flat arrays (split feature, threshold, child indices and
leaf class histograms), rebuilt deterministically from their recorded seeds.
Prediction is the majority vote of the per-tree votes; vote ties fall to the
lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

_UNBOUNDED_DEPTH = 64


def gini_impurity(labels: np.ndarray, n_classes: int | None = None) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    counts = np.bincount(labels, minlength=n_classes or 0)
    frac = counts / len(labels)
    return float(1.0 - np.sum(frac * frac))


@njit(cache=True)
def _build_tree(x, y, n_classes, max_depth, n_sub, seed, bootstrap):
    m, d = x.shape
    np.random.seed(seed)
    idx = np.empty(m, dtype=np.int64)
    if bootstrap:
        # redraw when a class goes missing from the bag
        for _ in range(50):
            for i in range(m):
                idx[i] = np.random.randint(0, m)
            seen = np.zeros(n_classes, dtype=np.int64)
            for i in range(m):
                seen[y[idx[i]]] = 1
            if seen.sum() == n_classes:
                break
    else:
        for i in range(m):
            idx[i] = i

    max_nodes = 2 * m + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    hist = np.zeros((max_nodes, n_classes), dtype=np.int64)

    # explicit stack of (start, end, depth, node_slot) over idx segments
    stack_start = np.empty(max_nodes, dtype=np.int64)
    stack_end = np.empty(max_nodes, dtype=np.int64)
    stack_depth = np.empty(max_nodes, dtype=np.int64)
    stack_node = np.empty(max_nodes, dtype=np.int64)
    top = 0
    stack_start[top] = 0
    stack_end[top] = m
    stack_depth[top] = 0
    stack_node[top] = 0
    top += 1
    n_nodes = 1

    feat_pool = np.empty(d, dtype=np.int64)
    while top > 0:
        top -= 1
        lo = stack_start[top]
        hi = stack_end[top]
        depth = stack_depth[top]
        node = stack_node[top]
        n_here = hi - lo
        for i in range(lo, hi):
            hist[node, y[idx[i]]] += 1
        n_major = hist[node].max()
        if n_major == n_here or depth >= max_depth or n_here < 2:
            continue

        # sample feature subset without replacement
        for j in range(d):
            feat_pool[j] = j
        n_pick = n_sub if n_sub < d else d
        for j in range(n_pick):
            swap = j + np.random.randint(0, d - j)
            feat_pool[j], feat_pool[swap] = feat_pool[swap], feat_pool[j]

        best_cost = 1e30
        best_f = -1
        best_thr = 0.0
        vals = np.empty(n_here)
        labels_here = np.empty(n_here, dtype=np.int64)
        for j in range(n_pick):
            f = feat_pool[j]
            for i in range(n_here):
                vals[i] = x[idx[lo + i], f]
            order = np.argsort(vals, kind="mergesort")
            lcounts = np.zeros(n_classes, dtype=np.int64)
            rcounts = hist[node].copy()
            for i in range(n_here):
                labels_here[i] = y[idx[lo + order[i]]]
            for i in range(n_here - 1):
                c = labels_here[i]
                lcounts[c] += 1
                rcounts[c] -= 1
                v_here = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_next <= v_here:
                    continue
                nl = i + 1
                nr = n_here - nl
                gl = 1.0
                gr = 1.0
                for cc in range(n_classes):
                    fl = lcounts[cc] / nl
                    fr = rcounts[cc] / nr
                    gl -= fl * fl
                    gr -= fr * fr
                cost = (nl * gl + nr * gr) / n_here
                if cost < best_cost:
                    best_cost = cost
                    best_f = f
                    best_thr = 0.5 * (v_here + v_next)
        if best_f < 0:
            continue

        # partition idx[lo:hi] in place around the chosen split
        i = lo
        j = hi - 1
        while i <= j:
            if x[idx[i], best_f] < best_thr:
                i += 1
            else:
                idx[i], idx[j] = idx[j], idx[i]
                j -= 1
        mid = i
        if mid == lo or mid == hi:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_start[top] = lo
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        stack_node[top] = n_nodes
        top += 1
        stack_start[top] = mid
        stack_end[top] = hi
        stack_depth[top] = depth + 1
        stack_node[top] = n_nodes + 1
        top += 1
        n_nodes += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], \
        right[:n_nodes], hist[:n_nodes], n_nodes


@njit(cache=True)
def _tree_votes(x, feature, threshold, left, right, hist):
    n = x.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        best = 0
        best_count = hist[node, 0]
        for c in range(1, hist.shape[1]):
            if hist[node, c] > best_count:
                best_count = hist[node, c]
                best = c
        out[i] = best
    return out


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    histogram: np.ndarray


@dataclass
class ForestModel:
    trees: list[Tree]
    n_classes: int
    n_trees: int
    max_depth: int | None
    seeds: np.ndarray
    feature_subsample: int


def train_forest(x: np.ndarray, labels: np.ndarray, n_trees: int = 100,
                 max_depth: int | None = 16, seed: int = 0,
                 bootstrap: bool = True, n_classes: int | None = None) -> ForestModel:
    """Fit a forest; per-split feature subsampling uses sqrt(d) features."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(labels, dtype=np.int64)
    if y.min() < 0:
        raise ValueError("labels must be non-negative class indices")
    k = n_classes or int(y.max()) + 1
    depth_cap = _UNBOUNDED_DEPTH if max_depth is None else max_depth
    n_sub = max(1, int(round(np.sqrt(x.shape[1]))))
    seeds = np.arange(seed, seed + n_trees, dtype=np.int64)
    trees = []
    for s in seeds:
        parts = _build_tree(x, y, k, depth_cap, n_sub, s, bootstrap)
        trees.append(Tree(*parts[:5]))
    return ForestModel(trees=trees, n_classes=k, n_trees=n_trees,
                       max_depth=max_depth, seeds=seeds, feature_subsample=n_sub)


def rf_votes(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """Per-tree class votes, shape (n_trees, n_rows)."""
    x = np.ascontiguousarray(np.atleast_2d(x), dtype=np.float64)
    return np.stack([_tree_votes(x, t.feature, t.threshold, t.left, t.right,
                                 t.histogram) for t in model.trees])


def rf_predict(model: ForestModel, x: np.ndarray) -> np.ndarray:
    votes = rf_votes(model, x)
    counts = np.stack([np.bincount(votes[:, i], minlength=model.n_classes)
                       for i in range(votes.shape[1])])
    return np.argmax(counts, axis=1)


@dataclass
class GridSearchReport:
    rows: list[dict] = field(default_factory=list)
    best: dict | None = None


DEFAULT_GRID = tuple((n, d) for n in (50, 100, 200) for d in (4, 8, 16, None))


def rf_grid_search(x: np.ndarray, labels: np.ndarray,
                   grid=DEFAULT_GRID, seed: int = 0,
                   valid_fraction: float = 1.0 / 3.0) -> tuple[ForestModel, GridSearchReport]:
    """Grid search over (n_trees, max_depth) on an internal stratified split.

    Selects the grid point maximizing the validation F score of the positive
    class (label 1); ties keep the earlier grid entry. Returns the model
    refit on all rows with the winning settings plus the full report.
    """
    if not grid:
        raise ValueError("grid must be non-empty")
    x = np.asarray(x, dtype=float)
    y = np.asarray(labels)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(0xF0,)))
    valid_rows = []
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        perm = rng.permutation(len(idx))
        n_valid = max(1, int(round(valid_fraction * len(idx))))
        valid_rows.extend(idx[perm[:n_valid]])
    valid_mask = np.zeros(len(y), dtype=bool)
    valid_mask[valid_rows] = True

    report = GridSearchReport()
    best_f = -1.0
    best_entry = None
    for n_trees, depth in grid:
        model = train_forest(x[~valid_mask], y[~valid_mask], n_trees=n_trees,
                             max_depth=depth, seed=seed)
        pred = rf_predict(model, x[valid_mask])
        truth = y[valid_mask]
        tp = int(np.sum((pred == 1) & (truth == 1)))
        fp = int(np.sum((pred == 1) & (truth != 1)))
        fn = int(np.sum((pred != 1) & (truth == 1)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if precision + recall else 0.0)
        entry = {"n_trees": n_trees, "max_depth": depth, "valid_f1": f1}
        report.rows.append(entry)
        if f1 > best_f:
            best_f = f1
            best_entry = entry
    report.best = best_entry
    final = train_forest(x, y, n_trees=best_entry["n_trees"],
                         max_depth=best_entry["max_depth"], seed=seed)
    return final, report
