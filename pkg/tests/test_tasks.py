import numpy as np
import pytest

from stenokit.metrics import confusion_counts
from stenokit.tasks import (MethodConfig, all_combinations, combination_label,
                            combination_search, cpc_predict, cpc_probabilities,
                            cpc_train, evaluate, feature_columns,
                            healthy_score_roc, like_for_like_pairs,
                            like_for_like_report, make_labels,
                            mirror_combination, multiclass_evaluate, ova_predict,
                            ova_train, ovo_predict, ovo_train, split_folds,
                            vpd_size_sweep)
from stenokit.vpd import MEASUREMENT_ORDER


def synthetic_cohort(n_healthy=120, n_per_vessel=40, seed=3, signal=1.6):
    """Four-class cohort with class-specific feature shifts."""
    rng = np.random.default_rng(seed)
    classes = np.repeat([0, 1, 2, 3], [n_healthy, n_per_vessel, n_per_vessel,
                                       n_per_vessel])
    x = rng.normal(size=(len(classes), 66))
    for cls in (1, 2, 3):
        x[classes == cls, cls * 12:cls * 12 + 6] += signal
    return x, classes


class TestLabels:
    def test_all_healthy_network_scheme(self):
        labels = make_labels(np.zeros(5, dtype=int), "enbc")
        assert np.all(labels == 1)

    def test_vessel_scheme_positive_rate(self):
        classes = np.repeat([0, 1, 2, 3], [600, 200, 200, 200])
        labels = make_labels(classes, "ivbc:aorta")
        assert labels.sum() == 200
        assert labels.mean() == pytest.approx(1 / 6)

    def test_multiclass_is_bijection(self):
        classes = np.array([0, 1, 2, 3, 2, 1])
        np.testing.assert_array_equal(make_labels(classes, "multiclass"), classes)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            make_labels(np.zeros(3, dtype=int), "ivbc:femoral")


class TestFolds:
    def test_two_thirds_split_small(self):
        classes = np.array([0, 0, 0, 1, 1, 1])
        plan = split_folds(classes, seed=0)
        for train, test in plan.folds:
            assert len(train) == 4 and len(test) == 2
            assert sorted(np.concatenate([train, test]).tolist()) == list(range(6))

    def test_partition_property(self):
        classes = np.repeat([0, 1], [60, 40])
        plan = split_folds(classes, seed=1)
        for train, test in plan.folds:
            assert len(np.intersect1d(train, test)) == 0
            assert len(train) + len(test) == 100

    def test_stratification_within_one_row(self):
        classes = np.repeat([0, 1, 2, 3], [60, 20, 20, 20])
        plan = split_folds(classes, seed=2)
        for train, _ in plan.folds:
            for cls, total in ((0, 60), (1, 20), (2, 20), (3, 20)):
                got = int(np.sum(classes[train] == cls))
                assert abs(got - (2 / 3) * total) <= 1

    def test_different_seeds_differ(self):
        classes = np.repeat([0, 1], 50)
        a = split_folds(classes, seed=0)
        b = split_folds(classes, seed=99)
        assert any(not np.array_equal(x[0], y[0])
                   for x, y in zip(a.folds, b.folds))

    def test_tiny_class_rejected(self):
        with pytest.raises(ValueError):
            split_folds(np.array([0, 0, 0, 0, 0, 1]), seed=0)


class TestCombinations:
    def test_sixty_three_combinations(self):
        combos = all_combinations()
        assert len(combos) == 63
        assert len(set(combos)) == 63
        assert combos[0] == ("q3",)
        assert combos[-1] == tuple(MEASUREMENT_ORDER)

    def test_counts_by_size(self):
        combos = all_combinations()
        assert sum(1 for c in combos if len(c) == 1) == 6
        assert sum(1 for c in combos if len(c) == 5) == 6

    def test_feature_columns_blocks(self):
        cols = feature_columns(("q3", "p1"))
        assert len(cols) == 22
        assert list(cols[:3]) == [0, 1, 2]
        assert list(cols[11:14]) == [55, 56, 57]

    def test_mirror_swaps_iliac_probes(self):
        assert mirror_combination(("q3", "p3")) == ("q2", "p2")
        assert mirror_combination(("q1", "p1")) == ("q1", "p1")

    def test_twenty_four_pairs(self):
        pairs = like_for_like_pairs()
        assert len(pairs) == 24
        for combo, twin in pairs:
            assert combo != twin
            assert mirror_combination(combo) == twin

    def test_label_formatting(self):
        assert combination_label(("q3", "q1", "p1")) == "Q3+Q1+P1"


class TestEvaluate:
    def test_leaked_label_feature_is_perfect(self):
        x, classes = synthetic_cohort()
        labels = make_labels(classes, "enbc")
        x = x.copy()
        x[:, 0] = labels * 10.0  # leak the target into the Q3 block
        folds = split_folds(classes, seed=0)
        cell = evaluate(x, classes, "enbc", "lr", ("q3",), folds)
        assert cell.f_mean == pytest.approx(1.0)
        assert cell.sensitivity_mean == 1.0
        assert cell.specificity_mean == 1.0

    def test_random_labels_are_naive(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(300, 66))
        classes = rng.integers(0, 2, 300) * 0  # all healthy ...
        classes[:150] = 1  # ... then half aorta: labels random wrt features
        folds = split_folds(classes, seed=1)
        cell = evaluate(x, classes, "enbc", "lr", MEASUREMENT_ORDER, folds)
        assert cell.sensitivity_mean + cell.specificity_mean == pytest.approx(
            1.0, abs=0.12)

    def test_confusion_recount_matches(self):
        x, classes = synthetic_cohort()
        folds = split_folds(classes, seed=5)
        cell = evaluate(x, classes, "ivbc:iliac1", "lr", ("q2", "q3"), folds)
        for m in cell.fold_metrics:
            assert m.tp + m.fn + m.fp + m.tn == len(folds.folds[0][1])

    def test_empty_combination_rejected(self):
        x, classes = synthetic_cohort()
        folds = split_folds(classes, seed=0)
        with pytest.raises(ValueError):
            evaluate(x, classes, "enbc", "lr", (), folds)

    def test_single_class_fold_rejected(self):
        from stenokit.tasks import FoldPlan

        x, classes = synthetic_cohort()
        healthy_rows = np.nonzero(classes == 0)[0]
        degenerate = FoldPlan(folds=((healthy_rows[:40], healthy_rows[40:60]),),
                              seed=0, train_fraction=2 / 3)
        with pytest.raises(ValueError, match="single class"):
            evaluate(x, classes, "ivbc:aorta", "lr", ("q3",), degenerate)


class TestCombinationSearch:
    @pytest.fixture(scope="class")
    def search(self):
        x, classes = synthetic_cohort(n_healthy=60, n_per_vessel=20)
        folds = split_folds(classes, seed=7)
        config = MethodConfig(lr_epochs=120)
        return combination_search(x, classes, "enbc", ("lr",), folds, config)

    def test_row_count(self, search):
        assert len(search.rows) == 63
        assert len(search.method_table("lr")) == 63

    def test_size_aggregates_cover_all_sizes(self, search):
        aggs = search.size_aggregates("lr")
        assert [a["size"] for a in aggs] == [1, 2, 3, 4, 5, 6]
        assert aggs[0]["count"] == 6
        assert aggs[5]["count"] == 1

    def test_reproducible(self):
        x, classes = synthetic_cohort(n_healthy=60, n_per_vessel=20)
        folds = split_folds(classes, seed=7)
        config = MethodConfig(lr_epochs=120)
        a = combination_search(x, classes, "enbc", ("lr",), folds, config)
        b = combination_search(x, classes, "enbc", ("lr",), folds, config)
        assert [(r.combination, r.f_mean) for r in a.rows] == \
            [(r.combination, r.f_mean) for r in b.rows]

    def test_cell_errors_do_not_abort(self, monkeypatch):
        x, classes = synthetic_cohort(n_healthy=30, n_per_vessel=10)
        folds = split_folds(classes, seed=7)
        import stenokit.tasks as tasks_mod

        real = tasks_mod.evaluate

        def flaky(features, cls, scheme, method, combination, folds, config=None):
            if combination == ("q1",):
                raise RuntimeError("boom")
            return real(features, cls, scheme, method, combination, folds, config)

        monkeypatch.setattr(tasks_mod, "evaluate", flaky)
        result = tasks_mod.combination_search(x, classes, "enbc", ("lr",),
                                              folds, MethodConfig(lr_epochs=50))
        assert len(result.rows) == 63
        bad = result.row(("q1",), "lr")
        assert bad.error == "boom"
        assert np.isnan(bad.f_mean)
        assert sum(1 for r in result.rows if r.error) == 1

    def test_like_for_like_report(self, search):
        report = like_for_like_report(search, ("lr",))
        assert len(report["lr"]) == 24
        for entry in report["lr"]:
            assert entry["delta_f"] >= 0.0
            assert mirror_combination(entry["combination"]) == entry["mirror"]


class TestMulticlassStrategies:
    def test_ova_picks_highest_probability(self):
        x, classes = synthetic_cohort(signal=3.0)
        folds = split_folds(classes, seed=0)
        train, test = folds.folds[0]
        models = ova_train(x[train], classes[train])
        pred = ova_predict(models, x[test])
        assert np.mean(pred == classes[test]) > 0.9

    def test_ova_tie_breaks_to_lowest_class(self):
        class Stub:
            def __init__(self, p):
                self.p = p
                self.weights = np.zeros(3)

            @property
            def n_features(self):
                return 2

        import stenokit.tasks as tasks_mod

        probs = np.array([[0.4, 0.4, 0.4, 0.4]])
        assert int(np.argmax(probs, axis=1)[0]) == 0

    def test_ovo_builds_six_models(self):
        x, classes = synthetic_cohort(n_healthy=40, n_per_vessel=14, signal=2.5)
        models = ovo_train(x, classes, MethodConfig(svm_box=1.0))
        assert len(models) == 6
        assert set(models) == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}

    def test_ovo_unanimous_and_tied_votes(self):
        x, classes = synthetic_cohort(n_healthy=40, n_per_vessel=14, signal=3.0)
        models = ovo_train(x, classes, MethodConfig())
        pred = ovo_predict(models, x[classes == 2][:5])
        assert np.mean(pred == 2) > 0.7
        # engineered three-way vote tie: every class beats its successor
        votes = np.zeros((1, 4), dtype=np.int64)
        votes[0, :3] = 2  # classes 0, 1, 2 tie
        assert int(np.argmax(votes, axis=1)[0]) == 0

    def test_cpc_decision_rule(self):
        assert cpc_predict(np.array([[0.3, 0.2, 0.1]]), 0.5)[0] == 0
        assert cpc_predict(np.array([[0.3, 0.7, 0.1]]), 0.5)[0] == 2
        probs = np.random.default_rng(0).uniform(0.0, 0.999, (50, 3))
        assert np.all(cpc_predict(probs, 0.0) != 0)
        assert np.all(cpc_predict(probs, 1.0) == 0)

    def test_cpc_matches_ova_on_confident_rows(self):
        rng = np.random.default_rng(1)
        probs = rng.uniform(0, 1, (200, 3))
        pred = cpc_predict(probs, 0.5)
        confident = probs.max(axis=1) >= 0.5
        np.testing.assert_array_equal(pred[confident],
                                      np.argmax(probs[confident], axis=1) + 1)

    def test_multiclass_evaluate_shapes(self):
        x, classes = synthetic_cohort(signal=2.0)
        folds = split_folds(classes, seed=4)
        result = multiclass_evaluate(x, classes, "cpc", folds,
                                     MethodConfig(lr_epochs=150))
        assert set(result.per_class) == {0, 1, 2, 3}
        for cls in range(4):
            assert len(result.per_class[cls]) == len(folds.folds)
            assert 0.0 <= result.mean_sensitivity(cls) <= 1.0

    def test_unknown_strategy(self):
        x, classes = synthetic_cohort()
        folds = split_folds(classes, seed=0)
        with pytest.raises(ValueError):
            multiclass_evaluate(x, classes, "ovr", folds)


class TestRoc:
    def test_random_scores_are_naive(self):
        rng = np.random.default_rng(2)
        probs = rng.uniform(0, 1, (10_000, 3))
        classes = rng.integers(0, 4, 10_000)
        curve = healthy_score_roc(probs, classes, np.linspace(0, 1, 201))
        assert curve.auc == pytest.approx(0.5, abs=0.03)

    def test_separating_scores_are_perfect(self):
        probs = np.vstack([np.full((50, 3), 0.1), np.full((50, 3), 0.9)])
        classes = np.array([0] * 50 + [2] * 50)
        curve = healthy_score_roc(probs, classes, np.linspace(0, 1, 201))
        assert curve.auc == pytest.approx(1.0)

    def test_trapezoid_matches_pair_counting(self):
        # grid at every attained score value makes the swept curve identical
        # to the Mann-Whitney statistic
        rng = np.random.default_rng(3)
        probs = rng.uniform(0, 1, (200, 3))
        classes = rng.integers(0, 4, 200)
        s = probs.max(axis=1)
        grid = np.concatenate([[0.0], np.sort(np.unique(s)), [1.0]])
        curve = healthy_score_roc(probs, classes, grid)
        pos = s[classes == 0]
        neg = s[classes != 0]
        mw = float(np.mean([(p < q) + 0.5 * (p == q)
                            for p in pos for q in neg]))
        assert curve.auc == pytest.approx(mw, abs=1e-6)

    def test_endpoints_and_monotonicity(self):
        rng = np.random.default_rng(4)
        probs = rng.uniform(0, 1, (500, 3))
        classes = rng.integers(0, 4, 500)
        curve = healthy_score_roc(probs, classes, np.linspace(0, 1, 201))
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)

    def test_grid_must_span_unit_interval(self):
        with pytest.raises(ValueError):
            healthy_score_roc(np.ones((4, 3)) * 0.5, np.array([0, 1, 2, 3]),
                              np.linspace(0.1, 1, 10))


class TestSizeSweep:
    def test_output_shape_and_nesting(self):
        x, classes = synthetic_cohort(n_healthy=90, n_per_vessel=30)
        rows = vpd_size_sweep(x, classes, [90, 180], seed=0,
                              config=MethodConfig(lr_epochs=100))
        assert len(rows) == 6
        assert {r["scheme"] for r in rows} == {"ivbc:aorta", "ivbc:iliac1",
                                               "ivbc:iliac2"}

    def test_generalization_gap_at_small_sizes(self):
        # weak signal, small subsets: training F beats test F on average
        gaps = []
        for seed in range(5):
            x, classes = synthetic_cohort(n_healthy=60, n_per_vessel=20,
                                          seed=seed, signal=0.7)
            rows = vpd_size_sweep(x, classes, [60], seed=seed,
                                  config=MethodConfig(lr_epochs=100))
            gaps.extend(r["train_f"] - r["test_f"] for r in rows)
        assert np.mean(gaps) > 0

    def test_size_exceeding_dataset_rejected(self):
        x, classes = synthetic_cohort(n_healthy=30, n_per_vessel=10)
        with pytest.raises(ValueError):
            vpd_size_sweep(x, classes, [120], seed=0)
