import numpy as np
import pytest

from rescue_triage.metrics import (
    LengthMismatch,
    SingleClass,
    confusion,
    evaluate_predictions,
    metrics,
    roc_auc,
)
from rescue_triage.records import ConfusionMatrix


def mann_whitney_auc(y_true, scores):
    """Independent pairwise oracle: P(pos outscores neg), ties count half."""
    pos = [s for s, y in zip(scores, y_true) if y == 1]
    neg = [s for s, y in zip(scores, y_true) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_counts(self):
        cm = confusion([1, 1, 0, 0, 0, 0], [1, 1, 1, 0, 0, 0])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 1, 3, 0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([1, 0], [1])

    def test_total_equals_case_count(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 37)
        p = rng.integers(0, 2, 37)
        assert confusion(y, p).total == 37


class TestMetrics:
    def test_hand_computed_values(self):
        rep = metrics(ConfusionMatrix(tp=2, fp=1, tn=3, fn=0))
        assert abs(rep.accuracy - 5 / 6) < 1e-12
        assert rep.sensitivity == 1.0
        assert rep.specificity == 0.75
        assert abs(rep.precision - 2 / 3) < 1e-12
        assert abs(rep.f1 - 0.8) < 1e-12

    def test_perfect_predictor_all_ones(self):
        y = [1, 0, 1, 1, 0]
        rep = metrics(confusion(y, y))
        assert rep.accuracy == rep.sensitivity == rep.specificity == 1.0
        assert rep.precision == rep.f1 == 1.0

    def test_no_positive_predictions_precision_undefined(self):
        rep = metrics(confusion([1, 0], [0, 0]))
        assert rep.precision is None
        assert rep.f1 is None
        assert rep.specificity == 1.0

    def test_f1_is_harmonic_mean_on_random_matrices(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            cm = ConfusionMatrix(*(int(v) for v in rng.integers(0, 40, 4)))
            rep = metrics(cm)
            if rep.precision in (None,) or rep.sensitivity is None:
                continue
            if rep.precision + rep.sensitivity == 0:
                assert rep.f1 is None
                continue
            harmonic = 2.0 / (1.0 / rep.precision + 1.0 / rep.sensitivity) if rep.precision and rep.sensitivity else 0.0
            assert abs(rep.f1 - harmonic) < 1e-12


class TestRocAuc:
    def test_perfectly_ordered(self):
        auc, _ = roc_auc([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1])
        assert auc == 1.0

    def test_all_scores_equal(self):
        auc, points = roc_auc([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5])
        assert auc == 0.5
        assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)

    def test_hand_pairwise_example(self):
        auc, _ = roc_auc([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])
        assert abs(auc - 0.75) < 1e-12

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            roc_auc([1, 1], [0.5, 0.4])

    def test_points_monotone_from_origin_to_one(self):
        rng = np.random.default_rng(5)
        y = rng.integers(0, 2, 40)
        y[0], y[1] = 0, 1
        s = np.round(rng.random(40), 1)
        _, points = roc_auc(y, s)
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)
        fprs = [p[0] for p in points]
        tprs = [p[1] for p in points]
        assert fprs == sorted(fprs)
        assert tprs == sorted(tprs)

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(2, 50))
            y = rng.integers(0, 2, n)
            y[0], y[-1] = 1, 0
            s = np.round(rng.random(n) * 4) / 4  # coarse grid forces ties
            auc, _ = roc_auc(y, s)
            assert abs(auc - mann_whitney_auc(y, s)) < 1e-12


class TestEvaluatePredictions:
    def test_report_includes_auc_and_points(self):
        rep = evaluate_predictions([1, 0, 1, 0], [1, 0, 1, 1], scores=[0.9, 0.2, 0.8, 0.6])
        assert rep.auc is not None
        assert rep.roc_points
        assert rep.confusion.total == 4
