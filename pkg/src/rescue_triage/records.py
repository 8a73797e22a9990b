"""Shared domain types for the rescue triage pipeline.

Every other module depends only on the types defined here. All types are
immutable after construction and safe to share across parallel workers.

JSONL wire format (one UTF-8 JSON object per line):

* rescue record: ``{"case_id": str, "vitals": {...}|null, "notes": [str],
  "label": "psychiatric"|"non_psychiatric"|"unknown"}`` where the vitals
  object holds ``systolic_bp``, ``respiratory_rate``, ``gcs``,
  ``circulation_normal``, ``pulse_rhythm_regular`` (each nullable).
* feature vector: an object with the ten keys of ``FEATURE_ORDER``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

GCS_MIN = 3
GCS_MAX = 15

# Fixed encoding order: five vitals-derived entries, then the five
# text-derived presence bits. Serialization and model arity rely on it.
VITAL_FEATURE_NAMES = (
    "gcs",
    "circulation_normal",
    "systolic_bp",
    "pulse_rhythm_regular",
    "respiratory_rate",
)
TEXT_FEATURE_NAMES = (
    "preillness",
    "intoxication",
    "alcoholism",
    "mental_abnormality",
    "psychiatric_symptoms",
)
FEATURE_ORDER = VITAL_FEATURE_NAMES + TEXT_FEATURE_NAMES

BINARY_FEATURE_NAMES = ("circulation_normal", "pulse_rhythm_regular") + TEXT_FEATURE_NAMES


class Label(Enum):
    """Case outcome label; UNKNOWN is permitted only before labeling."""

    PSYCHIATRIC = "psychiatric"
    NON_PSYCHIATRIC = "non_psychiatric"
    UNKNOWN = "unknown"


# validation issue kinds
NEGATIVE_VITAL = "negative_vital"
GCS_OUT_OF_RANGE = "gcs_out_of_range"
EMPTY_CASE_ID = "empty_case_id"
BAD_VALUE = "bad_value"


@dataclass(frozen=True)
class ValidationIssue:
    """One invariant violation found while validating a raw record."""

    kind: str
    field: str
    value: object

    def __str__(self) -> str:
        return f"{self.kind}: field {self.field!r} = {self.value!r}"


class RecordValidationError(ValueError):
    """Raised by validate_record; carries every issue found, not just the first."""

    def __init__(self, issues: Sequence[ValidationIssue], case_id: str = ""):
        self.issues = list(issues)
        self.case_id = case_id
        detail = "; ".join(str(i) for i in self.issues)
        super().__init__(f"invalid record {case_id!r}: {detail}")


class MissingVitalError(ValueError):
    """A vitals field is still absent where a complete set is required."""

    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__(f"missing vitals: {', '.join(self.missing)}")


class VitalsError(ValueError):
    pass


def _check_vital_field(name: str, value) -> None:
    if name in ("systolic_bp", "respiratory_rate"):
        if value <= 0:
            raise VitalsError(f"{name} must be positive, got {value!r}")
    elif name == "gcs":
        if value != int(value):
            raise VitalsError(f"gcs must be an integer, got {value!r}")
        if not GCS_MIN <= value <= GCS_MAX:
            raise VitalsError(f"gcs must lie in [{GCS_MIN}, {GCS_MAX}], got {value!r}")


@dataclass(frozen=True)
class Vitals:
    """Health vitals for one case. Fields are optional until imputation.

    Present values are validated at construction: blood pressure and
    respiratory rate must be positive, GCS must lie in [3, 15].
    """

    systolic_bp: Optional[float] = None
    respiratory_rate: Optional[float] = None
    gcs: Optional[int] = None
    circulation_normal: Optional[bool] = None
    pulse_rhythm_regular: Optional[bool] = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                _check_vital_field(f.name, value)

    def missing_fields(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name) is None]

    @property
    def complete(self) -> bool:
        return not self.missing_fields()


@dataclass(frozen=True)
class RescueRecord:
    """One merged rescue case: vitals, free-text notes, ground-truth label."""

    case_id: str
    vitals: Optional[Vitals] = None
    notes: tuple[str, ...] = ()
    label: Label = Label.UNKNOWN

    def __post_init__(self):
        if not self.case_id or not self.case_id.strip():
            raise RecordValidationError(
                [ValidationIssue(EMPTY_CASE_ID, "case_id", self.case_id)], self.case_id
            )
        object.__setattr__(self, "notes", tuple(self.notes))


@dataclass(frozen=True)
class TextFeatures:
    """One slot per keyword category; a populated slot holds the matched keyword."""

    preillness: Optional[str] = None
    intoxication: Optional[str] = None
    alcoholism: Optional[str] = None
    mental_abnormality: Optional[str] = None
    psychiatric_symptoms: Optional[str] = None

    def slot(self, name: str) -> Optional[str]:
        if name not in TEXT_FEATURE_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def presence_bits(self) -> tuple[float, ...]:
        return tuple(0.0 if self.slot(n) is None else 1.0 for n in TEXT_FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    """The ten model-ready features, in the fixed FEATURE_ORDER encoding.

    Boolean-derived entries must be exactly 0 or 1; serialization round-trips
    bit-exactly through JSON.
    """

    gcs: float
    circulation_normal: float
    systolic_bp: float
    pulse_rhythm_regular: float
    respiratory_rate: float
    preillness: float
    intoxication: float
    alcoholism: float
    mental_abnormality: float
    psychiatric_symptoms: float

    def __post_init__(self):
        for name in BINARY_FEATURE_NAMES:
            v = getattr(self, name)
            if v not in (0.0, 1.0):
                raise ValueError(f"{name} must be 0 or 1, got {v!r}")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_ORDER], dtype=np.float64)

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "FeatureVector":
        if len(arr) != len(FEATURE_ORDER):
            raise ValueError(f"expected {len(FEATURE_ORDER)} entries, got {len(arr)}")
        return cls(**{n: float(v) for n, v in zip(FEATURE_ORDER, arr)})

    def to_dict(self) -> dict:
        return {n: getattr(self, n) for n in FEATURE_ORDER}

    @classmethod
    def from_dict(cls, d: Mapping[str, float]) -> "FeatureVector":
        return cls(**{n: float(d[n]) for n in FEATURE_ORDER})


@dataclass(frozen=True)
class ConfusionMatrix:
    """TP/FP/TN/FN counts; the source of every scalar metric."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v < 0 or v != int(v):
                raise ValueError(f"{f.name} must be a non-negative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RelevanceScore:
    """Relevance of one feature: mean occurrence in the observed group (x)
    against the reference group (y), scored as the relative deviation ratio."""

    feature_name: str
    observed_mean: float
    reference_mean: float
    score: float
    zero_reference: bool = False


def validate_record(raw: Mapping[str, object]) -> RescueRecord:
    """Build a RescueRecord from one ingest row, applying every invariant.

    Collects all violations instead of stopping at the first and raises a
    single RecordValidationError naming each offending field and value.
    """
    issues: list[ValidationIssue] = []

    case_id = str(raw.get("case_id", "") or "").strip()
    if not case_id:
        issues.append(ValidationIssue(EMPTY_CASE_ID, "case_id", raw.get("case_id")))

    def numeric(field: str):
        value = raw.get(field)
        if value is None or value == "":
            return None
        try:
            return float(value)
        except (TypeError, ValueError):
            issues.append(ValidationIssue(BAD_VALUE, field, value))
            return None

    bp = numeric("systolic_bp")
    if bp is not None and bp <= 0:
        issues.append(ValidationIssue(NEGATIVE_VITAL, "systolic_bp", bp))
        bp = None
    rr = numeric("respiratory_rate")
    if rr is not None and rr <= 0:
        issues.append(ValidationIssue(NEGATIVE_VITAL, "respiratory_rate", rr))
        rr = None

    gcs_raw = numeric("gcs")
    gcs: Optional[int] = None
    if gcs_raw is not None:
        if gcs_raw != int(gcs_raw):
            issues.append(ValidationIssue(BAD_VALUE, "gcs", gcs_raw))
        elif not GCS_MIN <= gcs_raw <= GCS_MAX:
            issues.append(ValidationIssue(GCS_OUT_OF_RANGE, "gcs", gcs_raw))
        else:
            gcs = int(gcs_raw)

    def flag(field: str) -> Optional[bool]:
        value = raw.get(field)
        if value is None or value == "":
            return None
        if isinstance(value, bool):
            return value
        if value in (0, 1, 0.0, 1.0):
            return bool(value)
        if isinstance(value, str) and value.strip().lower() in ("true", "false"):
            return value.strip().lower() == "true"
        issues.append(ValidationIssue(BAD_VALUE, field, value))
        return None

    circulation = flag("circulation_normal")
    pulse = flag("pulse_rhythm_regular")

    notes_raw = raw.get("notes")
    if notes_raw is None:
        notes: tuple[str, ...] = ()
    elif isinstance(notes_raw, str):
        notes = (notes_raw,) if notes_raw else ()
    else:
        notes = tuple(str(n) for n in notes_raw)

    label_raw = raw.get("label")
    if label_raw is None or label_raw == "":
        label = Label.UNKNOWN
    elif isinstance(label_raw, Label):
        label = label_raw
    else:
        try:
            label = Label(str(label_raw).strip().lower())
        except ValueError:
            issues.append(ValidationIssue(BAD_VALUE, "label", label_raw))
            label = Label.UNKNOWN

    if issues:
        raise RecordValidationError(issues, case_id)

    vitals_values = dict(
        systolic_bp=bp,
        respiratory_rate=rr,
        gcs=gcs,
        circulation_normal=circulation,
        pulse_rhythm_regular=pulse,
    )
    vitals = None
    if any(v is not None for v in vitals_values.values()):
        vitals = Vitals(**vitals_values)
    return RescueRecord(case_id=case_id, vitals=vitals, notes=notes, label=label)


def to_feature_vector(vitals: Vitals, text: TextFeatures) -> FeatureVector:
    """Deterministic fixed-order encoding of complete vitals plus text slots.

    Text slots map present -> 1, none -> 0. Raises MissingVitalError when any
    vitals field is still absent (imputation must run first).
    """
    missing = vitals.missing_fields()
    if missing:
        raise MissingVitalError(missing)
    bits = text.presence_bits()
    return FeatureVector(
        gcs=float(vitals.gcs),
        circulation_normal=1.0 if vitals.circulation_normal else 0.0,
        systolic_bp=float(vitals.systolic_bp),
        pulse_rhythm_regular=1.0 if vitals.pulse_rhythm_regular else 0.0,
        respiratory_rate=float(vitals.respiratory_rate),
        **dict(zip(TEXT_FEATURE_NAMES, bits)),
    )


def check_unique_case_ids(records: Iterable[RescueRecord]) -> None:
    """Corpus-level invariant: case ids must be unique."""
    seen: set[str] = set()
    for rec in records:
        if rec.case_id in seen:
            raise ValueError(f"duplicate case_id {rec.case_id!r}")
        seen.add(rec.case_id)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus binary labels in model-ready form.

    ``y`` uses 1 for psychiatric, 0 for non-psychiatric. Column order follows
    ``feature_names``.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    case_ids: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be (n, d) and y (n,) with matching n")
        if X.shape[1] != len(self.feature_names):
            raise ValueError("feature_names must match X columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "case_ids", tuple(self.case_ids))

    def __len__(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_vectors(
        cls,
        vectors: Sequence[FeatureVector],
        labels: Sequence[Label],
        case_ids: Sequence[str] = (),
    ) -> "Dataset":
        X = np.array([v.to_array() for v in vectors], dtype=np.float64)
        y = np.array([1 if l == Label.PSYCHIATRIC else 0 for l in labels], dtype=np.int64)
        return cls(X=X, y=y, feature_names=FEATURE_ORDER, case_ids=tuple(case_ids))

    def select(self, names: Sequence[str]) -> "Dataset":
        """Return a new dataset restricted to the named feature columns."""
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(self.X[:, idx], self.y, tuple(names), self.case_ids)

    def take(self, indices: Sequence[int]) -> "Dataset":
        ids = tuple(self.case_ids[i] for i in indices) if self.case_ids else ()
        return Dataset(self.X[np.asarray(indices)], self.y[np.asarray(indices)], self.feature_names, ids)


# ---------------------------------------------------------------------------
# JSONL serialization


def record_to_dict(rec: RescueRecord) -> dict:
    vitals = None
    if rec.vitals is not None:
        vitals = {
            "systolic_bp": rec.vitals.systolic_bp,
            "respiratory_rate": rec.vitals.respiratory_rate,
            "gcs": rec.vitals.gcs,
            "circulation_normal": rec.vitals.circulation_normal,
            "pulse_rhythm_regular": rec.vitals.pulse_rhythm_regular,
        }
    return {
        "case_id": rec.case_id,
        "vitals": vitals,
        "notes": list(rec.notes),
        "label": rec.label.value,
    }


def record_from_dict(d: Mapping[str, object]) -> RescueRecord:
    vitals = None
    v = d.get("vitals")
    if v is not None:
        vitals = Vitals(
            systolic_bp=v.get("systolic_bp"),
            respiratory_rate=v.get("respiratory_rate"),
            gcs=v.get("gcs"),
            circulation_normal=v.get("circulation_normal"),
            pulse_rhythm_regular=v.get("pulse_rhythm_regular"),
        )
    return RescueRecord(
        case_id=str(d["case_id"]),
        vitals=vitals,
        notes=tuple(d.get("notes") or ()),
        label=Label(d.get("label", "unknown")),
    )


def write_jsonl(path: str | Path, items: Iterable, to_dict: Callable = lambda x: x) -> int:
    """Write items as one JSON object per line; returns the line count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(to_dict(item), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path, from_dict: Callable = lambda x: x) -> Iterator:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield from_dict(json.loads(line))
