"""Stagewise gradient boosting on squared loss.

Plain gradient boosting and the regularized ("extreme") variant share this
implementation: with ``l1_leaf = l2_leaf = 0`` leaves are residual means and
split gains are squared-error reductions; nonzero values soft-threshold and
shrink the leaf solutions and the gains become regularized objective
reductions.
"""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator, check_X_y, check_array
from .trees import TreeArrays, build_tree, tree_predict


class GradientBoostingRegressor(BaseEstimator):
    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3,
                 l1_leaf=0.0, l2_leaf=0.0, seed=0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.l1_leaf = l1_leaf
        self.l2_leaf = l2_leaf
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not (0 < self.learning_rate <= 1):
            raise ValueError("learning_rate must be in (0, 1]")
        if self.l1_leaf < 0 or self.l2_leaf < 0:
            raise ValueError("leaf penalties must be >= 0")
        self.n_features_ = X.shape[1]
        self.base_ = float(y.mean())
        current = np.full(y.shape[0], self.base_)
        self.trees_ = []
        self.train_loss_path_ = [float(np.mean((y - current) ** 2))]
        for _ in range(self.n_estimators):
            residual = y - current
            tree = build_tree(X, residual, max_depth=self.max_depth,
                              l1=self.l1_leaf, l2=self.l2_leaf)
            current = current + self.learning_rate * tree_predict(tree, X)
            self.trees_.append(tree)
            self.train_loss_path_.append(float(np.mean((y - current) ** 2)))
        return self

    def predict(self, X):
        self._check_fitted("trees_")
        X = check_array(X)
        acc = np.full(X.shape[0], self.base_)
        for tree in self.trees_:
            acc += self.learning_rate * tree_predict(tree, X)
        return acc

    def split_gains(self) -> np.ndarray:
        self._check_fitted("trees_")
        totals = np.zeros(self.n_features_)
        for tree in self.trees_:
            totals += tree.gain_by_feature(self.n_features_)
        return totals

    def _get_state(self) -> dict:
        return {"n_features": self.n_features_, "base": self.base_,
                "trees": [t.to_state() for t in self.trees_]}

    def _set_state(self, state: dict):
        self.n_features_ = int(state["n_features"])
        self.base_ = float(state["base"])
        self.trees_ = [TreeArrays.from_state(s) for s in state["trees"]]
        self.train_loss_path_ = []
        return self
