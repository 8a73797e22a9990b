"""Hyperparameter search, cross-validation, train/test splitting and the
per-model evaluation table.

Search candidates are ranked by mean CV accuracy (ties resolve to the first
candidate in deterministic enumeration order). The evaluation table is
shaped like the reporting convention used downstream: one row per model,
five metrics as percentages with two decimals.
"""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import metrics as _metrics
from .learners import ModelKind, ModelSpec, train
from .records import Dataset

log = logging.getLogger(__name__)


class DegenerateFolds(ValueError):
    pass


class EmptyPartition(ValueError):
    pass


class EmptySpace(ValueError):
    pass


@dataclass(frozen=True)
class CvSpec:
    """K-fold layout; stratified folds preserve class counts within one."""

    folds: int = 5
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass(frozen=True)
class SearchSpec:
    """Grid or random exploration of a hyperparameter space.

    Space values are lists of candidates; random mode additionally accepts
    {"low": a, "high": b} (optionally {"log": true}) for continuous draws.
    Random sampling over a fully discrete space is without replacement, so a
    budget covering the whole space visits exactly the grid.
    """

    mode: str = "grid"
    space: dict = field(default_factory=dict)
    budget: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("grid", "random"):
            raise ValueError(f"unknown search mode {self.mode!r}")
        if self.mode == "random" and self.budget < 1:
            raise ValueError("random search budget must be >= 1")


def split_train_test(
    data: Dataset, ratio: float, seed: int, stratified: bool = True
) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive, seeded-shuffle split; ratio is the train share.

    Per-class (stratified) or global sample counts round half-up.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    n = len(data)
    rng = np.random.default_rng([seed & 0xFFFFFFFF, 7001])
    if stratified:
        train_idx: list[int] = []
        test_idx: list[int] = []
        for cls in (0, 1):
            members = np.flatnonzero(data.y == cls)
            perm = members[rng.permutation(len(members))]
            n_train = int(np.floor(len(perm) * ratio + 0.5))
            train_idx.extend(perm[:n_train])
            test_idx.extend(perm[n_train:])
        train_idx.sort()
        test_idx.sort()
    else:
        perm = rng.permutation(n)
        n_train = int(np.floor(n * ratio + 0.5))
        train_idx = sorted(perm[:n_train].tolist())
        test_idx = sorted(perm[n_train:].tolist())
    if not train_idx or not test_idx:
        raise EmptyPartition(f"split {ratio} of {n} rows leaves an empty side")
    return data.take(train_idx), data.take(test_idx)


def make_folds(y: np.ndarray, cv: CvSpec) -> list[np.ndarray]:
    """Validation-index arrays for each fold."""
    n = len(y)
    if cv.folds > n:
        raise ValueError(f"cannot make {cv.folds} folds from {n} rows")
    rng = np.random.default_rng([cv.seed & 0xFFFFFFFF, 7002])
    if cv.stratified:
        assignment = np.empty(n, dtype=np.int64)
        for cls in np.unique(y):
            members = np.flatnonzero(y == cls)
            perm = members[rng.permutation(len(members))]
            assignment[perm] = np.arange(len(perm)) % cv.folds
        folds = [np.flatnonzero(assignment == f) for f in range(cv.folds)]
    else:
        perm = rng.permutation(n)
        folds = [np.sort(part) for part in np.array_split(perm, cv.folds)]
    if any(len(f) == 0 for f in folds):
        raise ValueError("fold layout produced an empty fold")
    return folds


def scalar_metric(name: str, y_true, y_pred, scores=None) -> float:
    if name == "auc":
        if scores is None:
            raise ValueError("auc needs scores")
        auc, _ = _metrics.roc_auc(y_true, scores)
        return auc
    report = _metrics.metrics(_metrics.confusion(y_true, y_pred))
    value = report.scalar_dict().get(name)
    if value is None:
        raise ValueError(f"metric {name!r} undefined on this fold")
    return value


@dataclass(frozen=True)
class CvResult:
    fold_scores: tuple[float, ...]
    mean: float


def cross_validate(
    spec: ModelSpec, data: Dataset, cv: CvSpec, metric: str = "accuracy"
) -> CvResult:
    """Train on k-1 folds, evaluate on the held-out one, average the metric.

    Raises DegenerateFolds when a fold's training side lacks both classes.
    """
    folds = make_folds(data.y, cv)
    scores = []
    for i, val_idx in enumerate(folds):
        train_mask = np.ones(len(data), dtype=bool)
        train_mask[val_idx] = False
        train_idx = np.flatnonzero(train_mask)
        y_train = data.y[train_idx]
        if len(np.unique(y_train)) < 2:
            raise DegenerateFolds(f"fold {i}: training side has a single class")
        model = train(spec, data.X[train_idx], y_train)
        s = model.score(data.X[val_idx])
        y_pred = (np.asarray(s) >= model.decision_threshold).astype(int)
        scores.append(scalar_metric(metric, data.y[val_idx], y_pred, scores=s))
    return CvResult(tuple(scores), float(np.mean(scores)))


def _enumerate_grid(space: dict) -> list[dict]:
    names = sorted(space)
    for name in names:
        if not isinstance(space[name], (list, tuple)):
            raise ValueError(f"grid mode needs a value list for {name!r}")
        if len(space[name]) == 0:
            raise EmptySpace(f"no values for {name!r}")
    combos = []
    for values in itertools.product(*(space[n] for n in names)):
        combos.append(dict(zip(names, values)))
    return combos


def _draw_candidates(search: SearchSpec) -> list[dict]:
    if not search.space:
        raise EmptySpace("empty hyperparameter space")
    if search.mode == "grid":
        return _enumerate_grid(search.space)

    rng = np.random.default_rng([search.seed & 0xFFFFFFFF, 7003])
    discrete = all(isinstance(v, (list, tuple)) for v in search.space.values())
    if discrete:
        grid = _enumerate_grid(search.space)
        take = min(search.budget, len(grid))
        order = rng.permutation(len(grid))[:take]
        return [grid[i] for i in order]
    candidates = []
    names = sorted(search.space)
    for _ in range(search.budget):
        combo = {}
        for name in names:
            values = search.space[name]
            if isinstance(values, (list, tuple)):
                combo[name] = values[int(rng.integers(0, len(values)))]
            elif isinstance(values, dict):
                low, high = values["low"], values["high"]
                if values.get("log"):
                    combo[name] = float(np.exp(rng.uniform(np.log(low), np.log(high))))
                else:
                    combo[name] = float(rng.uniform(low, high))
            else:
                raise ValueError(f"bad space entry for {name!r}")
        candidates.append(combo)
    return candidates


@dataclass(frozen=True)
class LeaderboardEntry:
    spec: ModelSpec
    mean_score: float
    fold_scores: tuple[float, ...]


@dataclass(frozen=True)
class SearchResult:
    best: ModelSpec
    leaderboard: tuple[LeaderboardEntry, ...]


def search(
    kind: ModelKind,
    search_spec: SearchSpec,
    cv: CvSpec,
    data: Dataset,
    metric: str = "accuracy",
    model_seed: int = 0,
) -> SearchResult:
    """Evaluate every candidate by mean CV metric and return the winner.

    Ties resolve to the earliest candidate in enumeration order.
    """
    candidates = _draw_candidates(search_spec)
    entries = []
    for params in candidates:
        spec = ModelSpec(kind, params, seed=model_seed)
        result = cross_validate(spec, data, cv, metric)
        entries.append(LeaderboardEntry(spec, result.mean, result.fold_scores))
    ranked = sorted(range(len(entries)), key=lambda i: (-entries[i].mean_score, i))
    leaderboard = tuple(entries[i] for i in ranked)
    return SearchResult(best=leaderboard[0].spec, leaderboard=leaderboard)


@dataclass(frozen=True)
class EvalRow:
    name: str
    spec: ModelSpec
    report: Optional[_metrics.MetricsReport]
    error: Optional[str] = None


def evaluate_all(
    specs: Sequence[ModelSpec],
    data: Dataset,
    split_ratio: float = 0.8,
    split_seed: int = 0,
    stratified: bool = True,
) -> list[EvalRow]:
    """Train each spec on the train split, evaluate on the held-out test.

    Per-model failures become error rows instead of aborting the table.
    Rows are ordered by test accuracy descending.
    """
    if not specs:
        raise ValueError("need at least one model spec")
    train_set, test_set = split_train_test(data, split_ratio, split_seed, stratified)
    rows: list[EvalRow] = []
    for spec in specs:
        name = spec.display_name
        try:
            model = train(spec, train_set.X, train_set.y)
            s = np.asarray(model.score(test_set.X))
            y_pred = (s >= model.decision_threshold).astype(int)
            report = _metrics.evaluate_predictions(test_set.y, y_pred, scores=s)
            rows.append(EvalRow(name, spec, report))
        except Exception as exc:  # propagate per-model failure into the table
            log.error("evaluation failed for %s: %s", name, exc)
            rows.append(EvalRow(name, spec, None, error=str(exc)))
    rows.sort(
        key=lambda r: (
            -(r.report.accuracy if r.report and r.report.accuracy is not None else -1.0),
            r.name,
        )
    )
    return rows


METRIC_COLUMNS = ("accuracy", "sensitivity", "specificity", "precision", "f1")


def _fmt_pct(value: Optional[float]) -> str:
    return "NA" if value is None else f"{100.0 * value:.2f}"


def write_metrics_csv(rows: Sequence[EvalRow], path: str | Path) -> None:
    """Model-by-metric table: percentages with two decimals, NA when undefined."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", *METRIC_COLUMNS])
        for row in rows:
            if row.report is None:
                writer.writerow([row.name] + ["NA"] * len(METRIC_COLUMNS))
            else:
                scalars = row.report.scalar_dict()
                writer.writerow([row.name] + [_fmt_pct(scalars[m]) for m in METRIC_COLUMNS])


def write_roc_csv(points: Sequence[tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in points:
            writer.writerow([repr(float(fpr)), repr(float(tpr))])
