"""Penalized linear regression: closed-form ridge and coordinate-descent lasso."""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator, check_X_y, check_array


class RidgeRegressor(BaseEstimator):
    """min ||y - Xw - b||^2 + lam * ||w||^2, intercept unpenalized."""

    def __init__(self, lam=1.0):
        self.lam = lam

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
        gram = Xc.T @ Xc + self.lam * np.eye(X.shape[1])
        try:
            coef = np.linalg.solve(gram, Xc.T @ yc)
        except np.linalg.LinAlgError:
            coef = np.linalg.lstsq(gram, Xc.T @ yc, rcond=None)[0]
        self.coef_ = coef
        self.intercept_ = y_mean - float(x_mean @ coef)
        return self

    def predict(self, X):
        self._check_fitted("coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def _get_state(self) -> dict:
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def _set_state(self, state: dict):
        self.coef_ = np.asarray(state["coef"], dtype=np.float64)
        self.intercept_ = float(state["intercept"])
        return self


def _soft(x: float, t: float) -> float:
    return np.sign(x) * max(abs(x) - t, 0.0)


class LassoRegressor(BaseEstimator):
    """min (1/2n) ||y - Xw - b||^2 + lam * ||w||_1 by cyclic coordinate descent.

    Convergence is declared when the largest coefficient update in a sweep
    drops below ``tol``; running out of sweeps flags ``converged_ = False``
    instead of raising.
    """

    def __init__(self, lam=1.0, max_iter=1000, tol=1e-8):
        self.lam = lam
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")
        n, d = X.shape
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
        col_sq = (Xc ** 2).sum(axis=0) / n
        w = np.zeros(d)
        r = yc.copy()
        self.converged_ = False
        for _ in range(self.max_iter):
            max_delta = 0.0
            for j in range(d):
                if col_sq[j] == 0.0:
                    continue
                w_old = w[j]
                rho = float(Xc[:, j] @ r) / n + col_sq[j] * w_old
                w_new = _soft(rho, self.lam) / col_sq[j]
                if w_new != w_old:
                    r -= Xc[:, j] * (w_new - w_old)
                    w[j] = w_new
                    max_delta = max(max_delta, abs(w_new - w_old))
            if max_delta < self.tol:
                self.converged_ = True
                break
        self.coef_ = w
        self.intercept_ = y_mean - float(x_mean @ w)
        return self

    def predict(self, X):
        self._check_fitted("coef_")
        X = check_array(X)
        return X @ self.coef_ + self.intercept_

    def _get_state(self) -> dict:
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_,
                "converged": bool(self.converged_)}

    def _set_state(self, state: dict):
        self.coef_ = np.asarray(state["coef"], dtype=np.float64)
        self.intercept_ = float(state["intercept"])
        self.converged_ = bool(state["converged"])
        return self


def lasso_lambda_max(X, y) -> float:
    """Smallest lam for which the lasso solution is identically zero."""
    X, y = check_X_y(X, y)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    return float(np.max(np.abs(Xc.T @ yc)) / X.shape[0])
