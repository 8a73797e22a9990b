import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescue_triage.featselect import (
    ZeroReference,
    filter_select,
    relative_deviation,
    rfecv,
)
from rescue_triage.learners import ModelKind, ModelSpec
from rescue_triage.records import Dataset, FeatureVector, TEXT_FEATURE_NAMES
from rescue_triage.tuning import CvSpec, cross_validate


class TestRelativeDeviation:
    def test_zero_deviation(self):
        assert relative_deviation(7, 7) == 0.0

    def test_direct_substitution(self):
        assert relative_deviation(8, 2) == 300.0

    def test_zero_reference_error(self):
        with pytest.raises(ZeroReference):
            relative_deviation(1, 0)

    @settings(max_examples=300, deadline=None)
    @given(
        x=st.floats(-1e6, 1e6, allow_nan=False),
        y=st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: abs(v) > 1e-6),
        c=st.floats(1e-3, 1e3, allow_nan=False).filter(lambda v: v > 0),
    )
    def test_scale_invariance(self, x, y, c):
        assert math.isclose(
            relative_deviation(c * x, c * y), relative_deviation(x, y),
            rel_tol=1e-9, abs_tol=1e-9,
        )

    @settings(max_examples=200, deadline=None)
    @given(
        x=st.floats(-1e6, 1e6, allow_nan=False),
        y=st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != 0),
    )
    def test_nonnegative_and_zero_iff_equal(self, x, y):
        value = relative_deviation(x, y)
        assert value >= 0.0
        assert (value == 0.0) == (x == y)


def _vectors(bits_per_feature, n):
    """Build n vectors whose text bits follow the given per-feature fractions."""
    out = []
    for i in range(n):
        bits = {f: 1.0 if i < round(frac * n) else 0.0 for f, frac in bits_per_feature.items()}
        out.append(
            FeatureVector(
                gcs=12.0, circulation_normal=1.0, systolic_bp=120.0,
                pulse_rhythm_regular=0.0, respiratory_rate=16.0,
                **{f: bits.get(f, 0.0) for f in TEXT_FEATURE_NAMES},
            )
        )
    return out


class TestFilterSelect:
    def test_hand_example_selected(self):
        patients = _vectors({"alcoholism": 0.6}, 10)
        others = _vectors({"alcoholism": 0.1}, 10)
        report = filter_select(patients, others, threshold=3.0)
        entry = next(s for s in report.scores if s.feature_name == "alcoholism")
        assert abs(entry.score - 5.0) < 1e-12
        assert "alcoholism" in report.selected

    def test_identical_distributions_rejected(self):
        patients = _vectors({"panic_like": 0.0, "intoxication": 0.4}, 10)
        others = _vectors({"intoxication": 0.4}, 10)
        report = filter_select(patients, others, threshold=3.0)
        entry = next(s for s in report.scores if s.feature_name == "intoxication")
        assert entry.score == 0.0
        assert "intoxication" in report.rejected

    def test_zero_reference_flagged_and_selected_by_default(self):
        patients = _vectors({"psychiatric_symptoms": 0.5}, 10)
        others = _vectors({}, 10)
        report = filter_select(patients, others, threshold=3.0)
        entry = next(s for s in report.scores if s.feature_name == "psychiatric_symptoms")
        assert entry.zero_reference
        assert math.isinf(entry.score)
        assert "psychiatric_symptoms" in report.selected
        off = filter_select(patients, others, threshold=3.0, select_zero_reference=False)
        assert "psychiatric_symptoms" in off.rejected

    def test_selected_union_rejected_covers_scored(self):
        patients = _vectors({"alcoholism": 0.9, "intoxication": 0.2}, 20)
        others = _vectors({"alcoholism": 0.1, "intoxication": 0.2}, 20)
        report = filter_select(patients, others, threshold=3.0)
        assert set(report.selected) | set(report.rejected) == set(TEXT_FEATURE_NAMES)
        assert not set(report.selected) & set(report.rejected)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(2)
        patients = _vectors({f: float(p) for f, p in zip(TEXT_FEATURE_NAMES, rng.random(5))}, 40)
        others = _vectors({f: float(p) for f, p in zip(TEXT_FEATURE_NAMES, rng.random(5) * 0.3 + 0.05)}, 40)
        previous = None
        for threshold in (0.5, 1.0, 2.0, 4.0, 8.0):
            selected = set(filter_select(patients, others, threshold=threshold).selected)
            if previous is not None:
                assert selected <= previous
            previous = selected

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            filter_select([], _vectors({}, 3))

    def test_report_json_shape(self):
        patients = _vectors({"alcoholism": 0.6}, 10)
        others = _vectors({"alcoholism": 0.1}, 10)
        d = filter_select(patients, others).to_dict()
        entry = next(s for s in d["scores"] if s["feature_name"] == "alcoholism")
        assert entry["score_percent"] == pytest.approx(500.0)


def _toy_dataset(seed=0, n=160):
    """One informative feature, one pure-noise feature."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    informative = y + rng.normal(0, 0.35, n)
    noise = rng.normal(0, 1.0, n)
    X = np.column_stack([informative, noise])
    return Dataset(X, y, ("informative", "noise"))


class TestRfecv:
    def test_pure_noise_feature_eliminated_first(self):
        data = _toy_dataset()
        result = rfecv(data, ModelSpec(ModelKind.LR, seed=1), CvSpec(folds=4, seed=3))
        assert result.elimination_order[0] == "noise"

    def test_best_subset_matches_exhaustive_cv(self):
        data = _toy_dataset(seed=5)
        cv = CvSpec(folds=4, seed=3)
        spec = ModelSpec(ModelKind.LR, seed=1)
        result = rfecv(data, spec, cv)

        # brute-force oracle over every nonempty feature subset
        candidates = []
        for r in (1, 2):
            for names in itertools.combinations(data.feature_names, r):
                score = cross_validate(spec, data.select(names), cv).mean
                candidates.append((score, -r, names))
        _, _, best_subset = max(candidates)
        assert set(result.best_features) == set(best_subset)

    def test_returned_subset_score_is_max_of_steps(self):
        data = _toy_dataset(seed=9)
        result = rfecv(data, ModelSpec(ModelKind.NB, seed=1), CvSpec(folds=4, seed=2))
        best_step = max(result.steps, key=lambda s: (s.mean_score, -len(s.features)))
        assert result.best_features == best_step.features

    def test_needs_two_features(self):
        data = _toy_dataset().select(["informative"])
        with pytest.raises(ValueError):
            rfecv(data, ModelSpec(ModelKind.LR), CvSpec(folds=3))

    def test_deterministic(self):
        data = _toy_dataset(seed=4)
        spec = ModelSpec(ModelKind.KNN, {"k": 5}, seed=2)
        cv = CvSpec(folds=3, seed=8)
        a = rfecv(data, spec, cv)
        b = rfecv(data, spec, cv)
        assert a == b
