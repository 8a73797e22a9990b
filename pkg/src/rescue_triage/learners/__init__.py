"""Seven classifiers behind one train/predict/score interface.

``train(spec, X, y)`` fits any of SVM, RF, XGB, K-NN, NB, LR or MLPC on raw
feature rows; scores are probability-like values in [0, 1] and predictions
threshold them at 0.5. Models serialize to a versioned JSON text format that
round-trips scores bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .base import (
    DEFAULT_SEARCH_SPACES,
    DISPLAY_NAMES,
    ArityMismatch,
    InvalidHyperparameter,
    ModelKind,
    ModelSpec,
    SingleClassTraining,
    Standardizer,
    TrainedModel,
    check_training_inputs,
    rng_from,
)
from .boosting import fit_xgb, score_xgb
from .forest import fit_rf, score_rf
from .knn import fit_knn, score_knn
from .logistic import fit_lr, score_lr
from .mlp import fit_mlpc, score_mlpc
from .naive_bayes import fit_nb, score_nb
from .svm import fit_svm, score_svm
from .tree import TreeArrays

__all__ = [
    "ModelKind",
    "ModelSpec",
    "TrainedModel",
    "Standardizer",
    "InvalidHyperparameter",
    "SingleClassTraining",
    "ArityMismatch",
    "DEFAULT_SEARCH_SPACES",
    "DISPLAY_NAMES",
    "train",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]

_FIT = {
    ModelKind.NB: fit_nb,
    ModelKind.LR: fit_lr,
    ModelKind.KNN: fit_knn,
    ModelKind.SVM: fit_svm,
    ModelKind.RF: fit_rf,
    ModelKind.XGB: fit_xgb,
    ModelKind.MLPC: fit_mlpc,
}

_SCORE = {
    ModelKind.NB: score_nb,
    ModelKind.LR: score_lr,
    ModelKind.KNN: score_knn,
    ModelKind.SVM: score_svm,
    ModelKind.RF: score_rf,
    ModelKind.XGB: score_xgb,
    ModelKind.MLPC: score_mlpc,
}

# fixed per-kind stream ids so RNG draws never overlap across kinds
_KIND_STREAM = {kind: 1000 + i for i, kind in enumerate(ModelKind)}


def train(spec: ModelSpec, X, y, feature_names: tuple[str, ...] = ()) -> TrainedModel:
    """Fit the spec on (X, y); deterministic given (spec, data)."""
    X, y = check_training_inputs(np.asarray(X, dtype=np.float64), y)
    std = Standardizer.fit(X)
    rng = rng_from(spec.seed, _KIND_STREAM[spec.kind])
    state = _FIT[spec.kind](spec.hyperparameters, std.transform(X), y, rng)
    return TrainedModel(
        spec=spec,
        standardizer=std,
        state=state,
        arity=X.shape[1],
        feature_names=tuple(feature_names),
    )


def _score_state(kind: ModelKind, state: dict, Xs: np.ndarray) -> np.ndarray:
    return _SCORE[kind](state, Xs)


# ---------------------------------------------------------------------------
# JSON model format

FORMAT_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, TreeArrays):
        return {"__tree__": obj.to_dict()}
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist()}
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _restore(obj):
    if isinstance(obj, dict):
        if "__tree__" in obj:
            return TreeArrays.from_dict(obj["__tree__"])
        if "__array__" in obj:
            return np.asarray(obj["__array__"], dtype=np.float64)
        return {k: _restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore(v) for v in obj]
    return obj


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "standardizer": model.standardizer.to_dict(),
        "arity": model.arity,
        "decision_threshold": model.decision_threshold,
        "feature_names": list(model.feature_names),
        "state": _jsonable(model.state),
    }


def model_from_dict(d: dict) -> TrainedModel:
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    return TrainedModel(
        spec=ModelSpec.from_dict(d["spec"]),
        standardizer=Standardizer.from_dict(d["standardizer"]),
        state=_restore(d["state"]),
        arity=int(d["arity"]),
        decision_threshold=float(d.get("decision_threshold", 0.5)),
        feature_names=tuple(d.get("feature_names", ())),
    )


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
