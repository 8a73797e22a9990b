"""Random forest: bagged Gini trees with sqrt(d) feature subsampling per
split; the score is the fraction of trees voting positive."""

from __future__ import annotations

import math

import numpy as np

from .base import rng_from
from .tree import bin_columns, grow_classification_tree

_TREE_STREAM = 101


def fit_rf(params: dict, X: np.ndarray, y: np.ndarray, rng) -> dict:
    n, d = X.shape
    codes, edges = bin_columns(X, params["n_bins"])
    max_depth = params["max_depth"] if params["max_depth"] is not None else 2**31
    max_features = max(1, int(round(math.sqrt(d))))
    seed = int(rng.integers(0, 2**32))

    trees = []
    for t in range(params["n_trees"]):
        tree_rng = rng_from(seed, _TREE_STREAM, t)
        boot = tree_rng.integers(0, n, n)
        trees.append(
            grow_classification_tree(
                codes[boot],
                y[boot],
                edges,
                max_depth=max_depth,
                min_samples_leaf=params["min_samples_leaf"],
                max_features=max_features,
                rng=tree_rng,
            )
        )
    return {"trees": trees}


def score_rf(state: dict, X: np.ndarray) -> np.ndarray:
    votes = np.zeros(len(X))
    for tree in state["trees"]:
        votes += tree.predict_value(X) >= 0.5
    return votes / len(state["trees"])
