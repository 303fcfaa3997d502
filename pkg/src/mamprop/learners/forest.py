"""Random forest regression: bootstrapped CART trees, averaged."""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator, check_X_y, check_array, rng_stream
from .trees import TreeArrays, build_tree, tree_predict


class RandomForestRegressor(BaseEstimator):
    """Bagged CART ensemble.

    Each tree sees a bootstrap resample of the rows and, when
    ``max_features`` is set, a fresh feature subset at every split.  Each
    tree owns an independent counter-based random stream keyed by
    ``(seed, tree index)``, so results do not depend on build order.
    """

    def __init__(self, n_estimators=100, max_depth=None, min_samples_leaf=1,
                 max_features=None, seed=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        n, d = X.shape
        self.n_features_ = d
        self.trees_ = []
        for t in range(self.n_estimators):
            rng = rng_stream(self.seed, t)
            boot = rng.integers(0, n, size=n)
            self.trees_.append(build_tree(
                X[boot], y[boot], max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                max_features=self.max_features, rng=rng))
        return self

    def predict(self, X):
        self._check_fitted("trees_")
        X = check_array(X)
        acc = np.zeros(X.shape[0])
        for tree in self.trees_:
            acc += tree_predict(tree, X)
        return acc / len(self.trees_)

    def split_gains(self) -> np.ndarray:
        self._check_fitted("trees_")
        totals = np.zeros(self.n_features_)
        for tree in self.trees_:
            totals += tree.gain_by_feature(self.n_features_)
        return totals

    def _get_state(self) -> dict:
        return {"n_features": self.n_features_,
                "trees": [t.to_state() for t in self.trees_]}

    def _set_state(self, state: dict):
        self.n_features_ = int(state["n_features"])
        self.trees_ = [TreeArrays.from_state(s) for s in state["trees"]]
        return self
