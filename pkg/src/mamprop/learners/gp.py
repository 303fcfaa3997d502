"""Gaussian process regression with an RBF kernel."""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator, ConvergenceError, check_X_y, check_array

# Jitter escalation ladder tried when the kernel matrix fails Cholesky.
_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def _sq_dists(A, B):
    aa = np.sum(A ** 2, axis=1)[:, None]
    bb = np.sum(B ** 2, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)


class GaussianProcessRegressor(BaseEstimator):
    """Zero-mean GP on centered targets.

    k(x, x') = signal_var * exp(-||x - x'||^2 / (2 length_scale^2)), plus
    noise_var on the diagonal.  The training system is factorized with a
    Cholesky decomposition, escalating diagonal jitter up to 1e-4 before
    giving up.
    """

    def __init__(self, length_scale=1.0, signal_var=1.0, noise_var=1e-8):
        self.length_scale = length_scale
        self.signal_var = signal_var
        self.noise_var = noise_var

    def _kernel(self, A, B):
        return self.signal_var * np.exp(-_sq_dists(A, B) / (2.0 * self.length_scale ** 2))

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.length_scale <= 0 or self.signal_var <= 0 or self.noise_var <= 0:
            raise ValueError("length_scale, signal_var, and noise_var must be > 0")
        K = self._kernel(X, X) + self.noise_var * np.eye(X.shape[0])
        for jitter in _JITTERS:
            try:
                np.linalg.cholesky(K + jitter * np.eye(X.shape[0]))
                break
            except np.linalg.LinAlgError:
                continue
        else:
            raise ConvergenceError("kernel matrix not positive definite after jitter escalation to 1e-4")
        self.jitter_ = jitter
        self.X_ = X
        self.y_mean_ = float(y.mean())
        Ky = K + jitter * np.eye(X.shape[0])
        self.alpha_ = np.linalg.solve(Ky, y - self.y_mean_)
        self._Ky = Ky
        return self

    def predict(self, X):
        self._check_fitted("alpha_")
        X = check_array(X)
        Ks = self._kernel(self.X_, X)
        return Ks.T @ self.alpha_ + self.y_mean_

    def predict_var(self, X):
        """Posterior variance at the query points (may dip to -1e-9 numerically)."""
        self._check_fitted("alpha_")
        X = check_array(X)
        Ks = self._kernel(self.X_, X)
        v = np.linalg.solve(self._Ky, Ks)
        return self.signal_var - np.einsum("ij,ij->j", Ks, v)

    def _get_state(self) -> dict:
        return {"X": self.X_.tolist(), "alpha": self.alpha_.tolist(),
                "y_mean": self.y_mean_, "jitter": self.jitter_}

    def _set_state(self, state: dict):
        self.X_ = np.asarray(state["X"], dtype=np.float64)
        self.alpha_ = np.asarray(state["alpha"], dtype=np.float64)
        self.y_mean_ = float(state["y_mean"])
        self.jitter_ = float(state["jitter"])
        K = self._kernel(self.X_, self.X_)
        self._Ky = K + (self.noise_var + self.jitter_) * np.eye(self.X_.shape[0])
        return self
