"""Shared learner machinery: specs, schemas, standardization, model container.

Every classifier trains behind the same contract: ``train(spec, X, y)``
standardizes features with statistics from the training rows only, fits the
kind-specific state, and returns an immutable TrainedModel whose ``score``
lies in [0, 1] and whose ``predict`` thresholds the score at 0.5 (the
threshold is configurable). Identical (spec, data) pairs produce identical
models regardless of scheduling: every random stream derives from the spec
seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np


class ModelKind(Enum):
    SVM = "SVM"
    RF = "RF"
    XGB = "XGB"
    KNN = "KNN"
    NB = "NB"
    LR = "LR"
    MLPC = "MLPC"


DISPLAY_NAMES = {
    ModelKind.SVM: "SVM",
    ModelKind.RF: "RF",
    ModelKind.XGB: "XGB",
    ModelKind.KNN: "K-NN",
    ModelKind.NB: "NB",
    ModelKind.LR: "LR",
    ModelKind.MLPC: "MLPC",
}


class InvalidHyperparameter(ValueError):
    pass


class SingleClassTraining(ValueError):
    pass


class ArityMismatch(ValueError):
    pass


def _pos_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _pos_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _nonneg_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0


def _opt_pos_int(v) -> bool:
    return v is None or _pos_int(v)


# name -> (default, validator, description)
SCHEMAS: dict[ModelKind, dict[str, tuple]] = {
    ModelKind.KNN: {
        "k": (5, _pos_int, "neighbor count"),
    },
    ModelKind.RF: {
        "n_trees": (100, _pos_int, "ensemble size"),
        "max_depth": (None, _opt_pos_int, "tree depth cap (None = unbounded)"),
        "min_samples_leaf": (1, _pos_int, "minimum samples per leaf"),
        "n_bins": (32, lambda v: _pos_int(v) and v >= 2, "histogram bins per feature"),
    },
    ModelKind.XGB: {
        "n_rounds": (50, lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
                     "boosting rounds (0 = prior-only)"),
        "learning_rate": (0.1, _pos_real, "shrinkage"),
        "max_depth": (3, _pos_int, "tree depth cap"),
        "reg_lambda": (1.0, _nonneg_real, "L2 leaf penalty"),
        "n_bins": (32, lambda v: _pos_int(v) and v >= 2, "histogram bins per feature"),
    },
    ModelKind.NB: {
        "var_floor": (1e-9, _pos_real, "Gaussian variance floor"),
    },
    ModelKind.LR: {
        "l2": (1e-2, _nonneg_real, "L2 strength"),
        "learning_rate": (0.5, _pos_real, "gradient step size"),
        "max_epochs": (500, _pos_int, "epoch cap"),
        "tol": (1e-6, _nonneg_real, "gradient-norm stop tolerance"),
    },
    ModelKind.SVM: {
        "l2": (1e-2, _pos_real, "L2 strength"),
        "epochs": (30, _pos_int, "passes over the data"),
        "batch_size": (32, _pos_int, "subgradient batch size"),
    },
    ModelKind.MLPC: {
        "hidden": (8, _pos_int, "hidden layer width"),
        "learning_rate": (0.1, _pos_real, "gradient step size"),
        "epochs": (200, _pos_int, "training epochs"),
        "batch_size": (32, _pos_int, "mini-batch size"),
    },
}

# desk-scale default grids for hyperparameter search
DEFAULT_SEARCH_SPACES: dict[ModelKind, dict[str, list]] = {
    ModelKind.KNN: {"k": [3, 5, 7, 9]},
    ModelKind.RF: {"n_trees": [100, 300], "max_depth": [None, 10]},
    ModelKind.XGB: {"n_rounds": [50, 200], "learning_rate": [0.1, 0.3], "max_depth": [2, 3]},
    ModelKind.LR: {"l2": [1e-4, 1e-3, 1e-2, 1e-1, 1.0]},
    ModelKind.SVM: {"l2": [1e-4, 1e-3, 1e-2, 1e-1, 1.0]},
    ModelKind.NB: {"var_floor": [1e-9]},
    ModelKind.MLPC: {"hidden": [8, 32], "learning_rate": [0.01, 0.1]},
}


def resolve_hyperparameters(kind: ModelKind, given: Mapping) -> dict:
    """Validate against the kind's schema and fill defaults."""
    schema = SCHEMAS[kind]
    unknown = set(given) - set(schema)
    if unknown:
        raise InvalidHyperparameter(f"{kind.value}: unknown hyperparameters {sorted(unknown)}")
    resolved = {}
    for name, (default, validator, description) in schema.items():
        value = given.get(name, default)
        if not validator(value):
            raise InvalidHyperparameter(
                f"{kind.value}: bad value {value!r} for {name} ({description})"
            )
        resolved[name] = value
    return resolved


@dataclass(frozen=True)
class ModelSpec:
    """A classifier kind, its resolved hyperparameters, and the RNG seed."""

    kind: ModelKind
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "hyperparameters", resolve_hyperparameters(self.kind, self.hyperparameters)
        )

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.kind]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "hyperparameters": dict(self.hyperparameters),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(ModelKind(d["kind"]), dict(d.get("hyperparameters", {})), int(d.get("seed", 0)))


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-scoring learned from training rows only.

    Columns whose training values are all 0/1 pass through unchanged so that
    Bernoulli treatment and distance scales stay meaningful.
    """

    mean: np.ndarray
    std: np.ndarray
    binary_mask: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        binary = np.array([set(np.unique(X[:, j])) <= {0.0, 1.0} for j in range(X.shape[1])])
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        mean[binary] = 0.0
        std[binary] = 1.0
        std[std == 0.0] = 1.0
        return cls(mean=mean, std=std, binary_mask=binary)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "binary_mask": self.binary_mask.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Standardizer":
        return cls(
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
            binary_mask=np.asarray(d["binary_mask"], dtype=bool),
        )


@dataclass(frozen=True)
class TrainedModel:
    """An opaque fitted classifier exposing hard predictions and [0, 1] scores."""

    spec: ModelSpec
    standardizer: Standardizer
    state: dict
    arity: int
    decision_threshold: float = 0.5
    feature_names: tuple[str, ...] = ()

    def _check(self, X: np.ndarray) -> tuple[np.ndarray, bool]:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.arity:
            raise ArityMismatch(f"expected {self.arity} features, got shape {X.shape}")
        return X, single

    def score(self, X) -> np.ndarray | float:
        """Probability-like score in [0, 1]; monotone in the internal margin."""
        from . import _score_state  # late import to avoid a cycle

        X, single = self._check(X)
        s = _score_state(self.spec.kind, self.state, self.standardizer.transform(X))
        s = np.clip(s, 0.0, 1.0)
        return float(s[0]) if single else s

    def predict(self, X) -> np.ndarray | int:
        s = self.score(X)
        if isinstance(s, float):
            return int(s >= self.decision_threshold)
        return (s >= self.decision_threshold).astype(np.int64)


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def rng_from(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for (seed, task-id...) streams."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *[int(s) & 0xFFFFFFFF for s in stream]])


def check_training_inputs(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if len(X) != len(y):
        raise ValueError("X and y lengths differ")
    if len(X) < 2:
        raise ValueError("need at least 2 training rows")
    classes = set(np.unique(y))
    if not classes <= {0, 1}:
        raise ValueError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise SingleClassTraining("training data contains a single class")
    return X, y
