import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescue_triage.records import (
    EMPTY_CASE_ID,
    FEATURE_ORDER,
    GCS_OUT_OF_RANGE,
    NEGATIVE_VITAL,
    ConfusionMatrix,
    Dataset,
    FeatureVector,
    Label,
    MissingVitalError,
    RecordValidationError,
    RescueRecord,
    TextFeatures,
    Vitals,
    check_unique_case_ids,
    record_from_dict,
    record_to_dict,
    to_feature_vector,
    validate_record,
)

from conftest import REFERENCE_CASES


def full_vitals(**overrides):
    base = dict(
        systolic_bp=130.0,
        respiratory_rate=16.0,
        gcs=15,
        circulation_normal=True,
        pulse_rhythm_regular=False,
    )
    base.update(overrides)
    return Vitals(**base)


class TestVitals:
    def test_partial_fields_allowed(self):
        v = Vitals(systolic_bp=120.0)
        assert v.missing_fields() == [
            "respiratory_rate", "gcs", "circulation_normal", "pulse_rhythm_regular"
        ]
        assert not v.complete

    def test_negative_bp_rejected_at_construction(self):
        with pytest.raises(ValueError):
            Vitals(systolic_bp=-10.0)

    def test_gcs_bounds(self):
        with pytest.raises(ValueError):
            Vitals(gcs=2)
        with pytest.raises(ValueError):
            Vitals(gcs=16)
        assert Vitals(gcs=3).gcs == 3
        assert Vitals(gcs=15).gcs == 15


class TestValidateRecord:
    def test_valid_record(self):
        rec = validate_record(
            {"case_id": "a1", "gcs": 15, "respiratory_rate": 16, "systolic_bp": 130,
             "circulation_normal": True, "pulse_rhythm_regular": False,
             "notes": ["ok"], "label": "psychiatric"}
        )
        assert rec.case_id == "a1"
        assert rec.vitals.complete
        assert rec.label == Label.PSYCHIATRIC

    def test_negative_respiratory_rate(self):
        with pytest.raises(RecordValidationError) as err:
            validate_record({"case_id": "a", "respiratory_rate": -5})
        kinds = {(i.kind, i.field) for i in err.value.issues}
        assert (NEGATIVE_VITAL, "respiratory_rate") in kinds

    def test_gcs_out_of_range(self):
        with pytest.raises(RecordValidationError) as err:
            validate_record({"case_id": "a", "gcs": 17})
        assert {(i.kind, i.field) for i in err.value.issues} == {(GCS_OUT_OF_RANGE, "gcs")}

    def test_collects_all_violations(self):
        with pytest.raises(RecordValidationError) as err:
            validate_record({"case_id": "", "gcs": 17, "systolic_bp": -1})
        kinds = {i.kind for i in err.value.issues}
        assert kinds == {EMPTY_CASE_ID, GCS_OUT_OF_RANGE, NEGATIVE_VITAL}

    def test_single_field_violations_enumerated(self):
        good = {"case_id": "a", "gcs": 15, "respiratory_rate": 16, "systolic_bp": 130,
                "circulation_normal": 1, "pulse_rhythm_regular": 0}
        validate_record(good)  # sanity: accepted
        for field, bad in [("case_id", ""), ("gcs", 16), ("gcs", 2),
                           ("respiratory_rate", -5), ("systolic_bp", 0)]:
            raw = dict(good)
            raw[field] = bad
            with pytest.raises(RecordValidationError):
                validate_record(raw)

    def test_unknown_label_permitted_prelabeling(self):
        rec = validate_record({"case_id": "a"})
        assert rec.label == Label.UNKNOWN
        assert rec.vitals is None

    def test_empty_case_id_rejected_on_type(self):
        with pytest.raises(RecordValidationError):
            RescueRecord(case_id="  ")


class TestFeatureVector:
    def test_all_text_none_direct_encoding(self):
        fv = to_feature_vector(full_vitals(circulation_normal=True), TextFeatures())
        assert fv.circulation_normal == 1.0
        assert fv.preillness == fv.intoxication == fv.alcoholism == 0.0
        assert fv.mental_abnormality == fv.psychiatric_symptoms == 0.0

    def test_reference_case_has_two_text_bits(self):
        fv, _, _ = REFERENCE_CASES["Test1"]
        bits = [fv.preillness, fv.intoxication, fv.alcoholism,
                fv.mental_abnormality, fv.psychiatric_symptoms]
        assert sum(bits) == 2.0
        assert fv.alcoholism == 1.0 and fv.intoxication == 1.0
        assert fv.gcs == 12.0 and fv.systolic_bp == 130.0 and fv.respiratory_rate == 16.0

    def test_missing_vital_raises(self):
        with pytest.raises(MissingVitalError) as err:
            to_feature_vector(Vitals(systolic_bp=120.0), TextFeatures())
        assert "gcs" in err.value.missing

    def test_bit_entries_validated(self):
        with pytest.raises(ValueError):
            FeatureVector.from_array([15, 0.5, 130, 0, 16, 0, 0, 0, 0, 0])

    def test_fixed_order(self):
        fv, _, _ = REFERENCE_CASES["Test2"]
        arr = fv.to_array()
        assert list(arr) == [getattr(fv, n) for n in FEATURE_ORDER]
        assert FEATURE_ORDER[0] == "gcs" and FEATURE_ORDER[-1] == "psychiatric_symptoms"

    @settings(max_examples=200, deadline=None)
    @given(
        gcs=st.integers(3, 15),
        bp=st.floats(1.0, 400.0, allow_nan=False),
        rr=st.floats(0.5, 80.0, allow_nan=False),
        bits=st.tuples(*[st.booleans()] * 7),
    )
    def test_roundtrip_array_and_json(self, gcs, bp, rr, bits):
        circ, pulse, *text = bits
        fv = FeatureVector(
            gcs=float(gcs), circulation_normal=float(circ), systolic_bp=bp,
            pulse_rhythm_regular=float(pulse), respiratory_rate=rr,
            preillness=float(text[0]), intoxication=float(text[1]),
            alcoholism=float(text[2]), mental_abnormality=float(text[3]),
            psychiatric_symptoms=float(text[4]),
        )
        assert FeatureVector.from_array(fv.to_array()) == fv
        assert FeatureVector.from_dict(json.loads(json.dumps(fv.to_dict()))) == fv

    def test_encoding_injective_on_field_changes(self):
        base, _, _ = REFERENCE_CASES["Test2"]
        seen = {tuple(base.to_array())}
        for i, name in enumerate(FEATURE_ORDER):
            arr = base.to_array()
            arr[i] = 1.0 - arr[i] if arr[i] in (0.0, 1.0) else arr[i] + 1.0
            assert tuple(arr) not in seen


class TestConfusionMatrix:
    def test_total(self):
        cm = ConfusionMatrix(tp=2, fp=1, tn=3, fn=0)
        assert cm.total == 6

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            ConfusionMatrix(tp=-1, fp=0, tn=0, fn=0)


class TestSerialization:
    def test_record_jsonl_roundtrip(self):
        rec = validate_record(
            {"case_id": "x9", "gcs": 12, "respiratory_rate": 18, "systolic_bp": 140,
             "circulation_normal": False, "pulse_rhythm_regular": True,
             "notes": ["erste notiz", "zweite notiz"], "label": "non_psychiatric"}
        )
        back = record_from_dict(json.loads(json.dumps(record_to_dict(rec))))
        assert back == rec

    def test_duplicate_case_ids_detected(self):
        a = RescueRecord(case_id="a")
        with pytest.raises(ValueError):
            check_unique_case_ids([a, RescueRecord(case_id="a")])


class TestDataset:
    def test_from_vectors_and_select(self):
        fv1, _, _ = REFERENCE_CASES["Test1"]
        fv2, _, _ = REFERENCE_CASES["Test2"]
        data = Dataset.from_vectors([fv1, fv2], [Label.PSYCHIATRIC, Label.NON_PSYCHIATRIC], ["a", "b"])
        assert data.y.tolist() == [1, 0]
        sub = data.select(["gcs", "alcoholism"])
        assert sub.X.shape == (2, 2)
        assert sub.X[0].tolist() == [12.0, 1.0]
