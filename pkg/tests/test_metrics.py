import numpy as np
import pytest
from hypothesis import given, strategies as st

from stenokit.metrics import Metrics, confusion_counts, f_score, roc_from_rates


class TestConfusion:
    def test_counts(self):
        truth = np.array([1, 1, 1, 0, 0, 0])
        pred = np.array([1, 1, 0, 1, 0, 0])
        m = confusion_counts(truth, pred)
        assert (m.tp, m.fn, m.fp, m.tn) == (2, 1, 1, 2)

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50),
           st.integers(0, 50))
    def test_rate_identities_exact(self, tp, fn, fp, tn):
        m = Metrics(tp=tp, fn=fn, fp=fp, tn=tn)
        if tp + fn:
            assert m.sensitivity == tp / (tp + fn)
            assert 0.0 <= m.sensitivity <= 1.0
        if tn + fp:
            assert m.specificity == tn / (tn + fp)
        if tp + fp:
            assert m.precision == tp / (tp + fp)
        assert m.recall == m.sensitivity

    def test_custom_positive_label(self):
        truth = np.array(["a", "b", "a"])
        pred = np.array(["a", "a", "b"])
        m = confusion_counts(truth, pred, positive="a")
        assert (m.tp, m.fn, m.fp, m.tn) == (1, 1, 1, 0)


class TestFScore:
    @given(st.floats(0.01, 1.0))
    def test_equal_precision_recall_is_identity(self, x):
        assert f_score(x, x) == pytest.approx(x, rel=1e-12)

    def test_balanced_cohort_reference_values(self):
        # balanced two-class set: detection rates (0.8, 0.2) and (0.2, 0.8)
        # give F scores displaying as 0.61 and 0.28 (two truncated decimals)
        m_good = Metrics(tp=80, fn=20, fp=80, tn=20)
        assert m_good.f_score() == pytest.approx(8 / 13)
        assert int(m_good.f_score() * 100) == 61
        m_poor = Metrics(tp=20, fn=80, fp=20, tn=80)
        assert m_poor.f_score() == pytest.approx(2 / 7)
        assert int(m_poor.f_score() * 100) == 28

    def test_undefined_case_flagged(self):
        m = Metrics(tp=0, fn=5, fp=0, tn=5)
        assert m.f_score() == 0.0
        assert not m.f_defined

    def test_delta_weights_recall(self):
        p, r = 0.9, 0.3
        assert f_score(p, r, delta=2.0) < f_score(p, r, delta=2.0) + 1e-12
        assert f_score(p, r, delta=2.0) == pytest.approx(
            5 * p * r / (4 * p + r), rel=1e-12)
        # delta > 1 pulls the score toward recall
        assert abs(f_score(p, r, 2.0) - r) < abs(f_score(p, r, 1.0) - r)


class TestRocAssembly:
    def test_trapezoid_on_sorted_points(self):
        curve = roc_from_rates([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], [0.0, 1.0, 1.0])
        assert curve.auc == pytest.approx(0.75)

    def test_unsorted_points_are_ordered_by_fpr(self):
        curve = roc_from_rates([1.0, 0.0, 0.5], [1.0, 0.0, 0.5],
                               [1.0, 0.0, 1.0])
        assert curve.auc == pytest.approx(0.75)
