"""Histogram-based decision trees (classification and second-order regression).

Continuous features are quantized once per fit into at most ``n_bins``
ordered bins; split search then reduces to bin-count cumsums, which keeps
desk-scale forests fast without native code. Stored thresholds are in
original feature units; a sample goes left when value < threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TreeArrays:
    """Flat tree: internal nodes carry feature/threshold, leaves carry value."""

    feature: np.ndarray   # int32, -1 for leaves
    threshold: np.ndarray  # float64, split point in original units
    left: np.ndarray      # int32 child ids
    right: np.ndarray
    value: np.ndarray     # float64 leaf payload (class fraction or leaf weight)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int32)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] < self.threshold[nd]
            node[idx[go_left]] = self.left[nd[go_left]]
            node[idx[~go_left]] = self.right[nd[~go_left]]
            active = self.feature[node] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def bin_columns(X: np.ndarray, n_bins: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Quantize every column into ordered integer codes.

    Returns (codes, edges) where ``codes[i, j] <= c`` is equivalent to
    ``X[i, j] < edges[j][c]``. Columns with few distinct values keep exact
    midpoint edges, so binning loses nothing for binary or small-integer
    features.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    codes = np.empty((n, d), dtype=np.int32)
    edges: list[np.ndarray] = []
    for j in range(d):
        vals = np.unique(X[:, j])
        if len(vals) <= n_bins:
            e = (vals[:-1] + vals[1:]) / 2.0
        else:
            qs = np.quantile(X[:, j], np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
            e = np.unique(qs)
        codes[:, j] = np.searchsorted(e, X[:, j], side="right")
        edges.append(e)
    return codes, edges


_EPS_GAIN = 1e-12


def grow_classification_tree(
    codes: np.ndarray,
    y: np.ndarray,
    edges: list[np.ndarray],
    max_depth: int,
    min_samples_leaf: int,
    max_features: int,
    rng: np.random.Generator,
) -> TreeArrays:
    """Greedy Gini tree over binned features with per-node feature subsampling.

    A node becomes a leaf when it is pure, too small, at max depth, or when
    none of the sampled features yields a positive-gain split. Leaf value is
    the positive-class fraction.
    """
    n, d = codes.shape
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    stack: list[tuple[np.ndarray, int, int, bool]] = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        k = len(idx)
        yi = y[idx]
        pos = int(yi.sum())
        value.append(pos / k)
        if parent >= 0:
            if is_right:
                right[parent] = node_id
            else:
                left[parent] = node_id

        if depth >= max_depth or k < 2 * min_samples_leaf or pos == 0 or pos == k:
            continue

        cand = rng.choice(d, size=min(max_features, d), replace=False)
        parent_gini = 1.0 - (pos / k) ** 2 - ((k - pos) / k) ** 2
        best_gain = _EPS_GAIN
        best_f = -1
        best_code = -1
        for f in cand:
            nb = int(n_bins[f])
            if nb < 2:
                continue
            c = codes[idx, f]
            # negative and positive counts per bin in one pass
            both = np.bincount(c + nb * yi, minlength=2 * nb)
            cnt = both[:nb] + both[nb:]
            pcnt = both[nb:]
            nl = np.cumsum(cnt)[:-1]
            pl = np.cumsum(pcnt)[:-1]
            nr = k - nl
            ok = (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
            if not ok.any():
                continue
            pr = pos - pl
            with np.errstate(divide="ignore", invalid="ignore"):
                gl = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
                gr = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
                cost = (nl * gl + nr * gr) / k
            cost[~ok] = np.inf
            ci = int(np.argmin(cost))
            gain = parent_gini - cost[ci]
            if np.isfinite(cost[ci]) and gain > best_gain:
                best_gain, best_f, best_code = gain, int(f), ci
        if best_f < 0:
            continue

        feature[node_id] = best_f
        threshold[node_id] = float(edges[best_f][best_code])
        mask = codes[idx, best_f] <= best_code
        # push left last so it is grown first (ids in DFS pre-order)
        stack.append((idx[~mask], depth + 1, node_id, True))
        stack.append((idx[mask], depth + 1, node_id, False))

    return TreeArrays(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def grow_second_order_tree(
    codes: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    edges: list[np.ndarray],
    max_depth: int,
    reg_lambda: float,
) -> TreeArrays:
    """Regression tree on gradient/hessian sums with second-order leaf weights.

    Split gain is the standard half-sum of squared gradient ratios minus the
    parent term; leaf weight is -G / (H + lambda). All features are scanned.
    """
    n, d = codes.shape
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    stack: list[tuple[np.ndarray, int, int, bool]] = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        G = float(grad[idx].sum())
        H = float(hess[idx].sum())
        value.append(-G / (H + reg_lambda))
        if parent >= 0:
            if is_right:
                right[parent] = node_id
            else:
                left[parent] = node_id

        if depth >= max_depth or len(idx) < 2:
            continue

        parent_term = G * G / (H + reg_lambda)
        best_gain = _EPS_GAIN
        best_f = -1
        best_code = -1
        for f in range(d):
            nb = int(n_bins[f])
            if nb < 2:
                continue
            c = codes[idx, f]
            gsum = np.bincount(c, weights=grad[idx], minlength=nb)
            hsum = np.bincount(c, weights=hess[idx], minlength=nb)
            gl = np.cumsum(gsum)[:-1]
            hl = np.cumsum(hsum)[:-1]
            cnt = np.bincount(c, minlength=nb)
            nl = np.cumsum(cnt)[:-1]
            ok = (nl >= 1) & (nl <= len(idx) - 1)
            if not ok.any():
                continue
            gr = G - gl
            hr = H - hl
            gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent_term)
            gain[~ok] = -np.inf
            ci = int(np.argmax(gain))
            if gain[ci] > best_gain:
                best_gain, best_f, best_code = float(gain[ci]), int(f), ci
        if best_f < 0:
            continue

        feature[node_id] = best_f
        threshold[node_id] = float(edges[best_f][best_code])
        mask = codes[idx, best_f] <= best_code
        stack.append((idx[~mask], depth + 1, node_id, True))
        stack.append((idx[mask], depth + 1, node_id, False))

    return TreeArrays(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )
