"""CART regression trees with optional regularized leaves.

One builder serves three callers: plain CART (variance-reduction splits,
mean leaves), random forests (per-split feature subsampling), and boosting
(leaf values solving the L1/L2-regularized one-dimensional problem).  The
split score for a candidate child with residual sum S over n rows is

    score(S, n) = max(|S| - l1, 0)^2 / (n + l2)

and the recorded split gain is score(left) + score(right) - score(parent),
which for l1 = l2 = 0 equals the plain squared-error reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..base import BaseEstimator, check_X_y, check_array


@dataclass
class TreeArrays:
    feature: np.ndarray    # split feature per node, -1 for leaves
    threshold: np.ndarray  # split threshold (x < t goes left)
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # leaf prediction (0 for internal nodes)
    gain: np.ndarray       # recorded split gain (0 at leaves)
    n_samples: np.ndarray

    def to_state(self) -> dict:
        return {name: getattr(self, name).tolist() for name in
                ("feature", "threshold", "left", "right", "value", "gain", "n_samples")}

    @classmethod
    def from_state(cls, state: dict) -> "TreeArrays":
        return cls(
            feature=np.asarray(state["feature"], dtype=np.int64),
            threshold=np.asarray(state["threshold"], dtype=np.float64),
            left=np.asarray(state["left"], dtype=np.int64),
            right=np.asarray(state["right"], dtype=np.int64),
            value=np.asarray(state["value"], dtype=np.float64),
            gain=np.asarray(state["gain"], dtype=np.float64),
            n_samples=np.asarray(state["n_samples"], dtype=np.int64),
        )

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def gain_by_feature(self, n_features: int) -> np.ndarray:
        totals = np.zeros(n_features)
        internal = self.feature >= 0
        np.add.at(totals, self.feature[internal], self.gain[internal])
        return totals


def _leaf_value(s: float, n: int, l1: float, l2: float) -> float:
    mag = max(abs(s) - l1, 0.0)
    return float(np.sign(s) * mag / (n + l2)) if mag > 0 else 0.0


def _score(s, n, l1, l2):
    return np.maximum(np.abs(s) - l1, 0.0) ** 2 / (n + l2)


def _best_split(Xn, yn, min_leaf, l1, l2, feat_idx):
    """Best (feature, threshold, gain, left_mask) over the given features.

    Ties broken by lowest feature index, then lowest threshold, which the
    lexicographic pick below realizes exactly.
    """
    m = Xn.shape[0]
    if m < 2 * min_leaf:
        return None
    sub = Xn[:, feat_idx]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = yn[order]
    csum = np.cumsum(ys, axis=0)
    s_total = float(yn.sum())
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    s_left = csum[:-1, :]
    gains = (_score(s_left, n_left, l1, l2)
             + _score(s_total - s_left, m - n_left, l1, l2)
             - _score(s_total, float(m), l1, l2))
    valid = xs[1:, :] > xs[:-1, :]
    valid &= (n_left >= min_leaf) & ((m - n_left) >= min_leaf)
    gains = np.where(valid, gains, -np.inf)
    gmax = gains.max()
    if not np.isfinite(gmax) or gmax <= 0.0:
        return None
    cand = np.argwhere(gains == gmax)  # (pos, local feature)
    pos, local = cand[np.lexsort((cand[:, 0], cand[:, 1]))][0]
    pos, local = int(pos), int(local)
    feat = int(feat_idx[local])
    thr = 0.5 * (xs[pos, local] + xs[pos + 1, local])
    left_mask = Xn[:, feat] < thr
    if int(left_mask.sum()) != pos + 1:
        # midpoint rounded onto a data value; fall back to the upper value
        thr = float(xs[pos + 1, local])
        left_mask = Xn[:, feat] < thr
    return feat, float(thr), float(gmax), left_mask


def build_tree(X, y, *, max_depth=None, min_samples_leaf=1, l1=0.0, l2=0.0,
               max_features=None, rng=None) -> TreeArrays:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if max_features is not None and (max_features < 1 or max_features > d):
        raise ValueError(f"max_features must be in [1, {d}], got {max_features}")

    feature, threshold, left, right, value, gain, n_samples = [], [], [], [], [], [], []

    def new_node():
        for arr, fill in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                          (value, 0.0), (gain, 0.0), (n_samples, 0)):
            arr.append(fill)
        return len(feature) - 1

    stack = [(new_node(), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        m = idx.shape[0]
        n_samples[node] = m
        split = None
        if (max_depth is None or depth < max_depth) and m >= 2 * min_samples_leaf:
            if max_features is not None and max_features < d:
                feat_idx = np.sort(rng.choice(d, size=max_features, replace=False))
            else:
                feat_idx = np.arange(d)
            split = _best_split(X[idx], yn, min_samples_leaf, l1, l2, feat_idx)
        if split is None:
            value[node] = _leaf_value(float(yn.sum()), m, l1, l2)
            continue
        feat, thr, g, left_mask = split
        feature[node] = feat
        threshold[node] = thr
        gain[node] = g
        left[node] = new_node()
        right[node] = new_node()
        # push right first so the left branch is grown first (preorder)
        stack.append((right[node], idx[~left_mask], depth + 1))
        stack.append((left[node], idx[left_mask], depth + 1))

    return TreeArrays(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        gain=np.asarray(gain, dtype=np.float64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
    )


def tree_predict(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feats = tree.feature[node]
        active = np.where(feats >= 0)[0]
        if active.size == 0:
            break
        cur = node[active]
        go_left = X[active, feats[active]] < tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
    return tree.value[node]


class DecisionTreeRegressor(BaseEstimator):
    """Greedy CART regressor with variance-reduction splits."""

    def __init__(self, max_depth=None, min_samples_leaf=1):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        self.n_features_ = X.shape[1]
        self.tree_ = build_tree(X, y, max_depth=self.max_depth,
                                min_samples_leaf=self.min_samples_leaf)
        return self

    def predict(self, X):
        self._check_fitted("tree_")
        X = check_array(X)
        return tree_predict(self.tree_, X)

    def split_gains(self) -> np.ndarray:
        self._check_fitted("tree_")
        return self.tree_.gain_by_feature(self.n_features_)

    def _get_state(self) -> dict:
        return {"n_features": self.n_features_, "tree": self.tree_.to_state()}

    def _set_state(self, state: dict):
        self.n_features_ = int(state["n_features"])
        self.tree_ = TreeArrays.from_state(state["tree"])
        return self
