"""Support vector regression via SMO-style pairwise coordinate ascent.

The dual is expressed in the net coefficients beta_i = alpha_i - alpha_i*:

    max  -1/2 beta' K beta + y' beta - epsilon ||beta||_1
    s.t. sum(beta) = 0,  -C <= beta_i <= C

Each iteration picks the maximal KKT-violating pair and solves the
one-dimensional subproblem exactly (it is piecewise quadratic with
breakpoints where either coefficient crosses zero).  Iteration stops when
the violation drops below ``tol``; exhausting ``max_iter`` flags the model
non-converged rather than raising.
"""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator, check_X_y, check_array

KERNELS = ("linear", "poly", "rbf", "sigmoid")


def _sq_dists(A, B):
    aa = np.sum(A ** 2, axis=1)[:, None]
    bb = np.sum(B ** 2, axis=1)[None, :]
    return np.maximum(aa + bb - 2.0 * (A @ B.T), 0.0)


def kernel_matrix(kind: str, A, B, gamma: float, coef0: float, degree: int):
    if kind == "linear":
        return A @ B.T
    if kind == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    if kind == "rbf":
        return np.exp(-gamma * _sq_dists(A, B))
    if kind == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    raise ValueError(f"unknown kernel {kind!r}")


def _pair_step(K, beta, E, i, j, C, eps):
    """Exact maximizer of the pair (i, j) subproblem; returns (t - beta_i, gain)."""
    bi, bj = beta[i], beta[j]
    s = bi + bj
    lo, hi = max(-C, s - C), min(C, s + C)
    if hi - lo < 1e-15:
        return 0.0, 0.0
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    dE = E[i] - E[j]

    points = {lo, hi}
    if lo < 0.0 < hi:
        points.add(0.0)
    if lo < s < hi:
        points.add(s)
    points = sorted(points)
    candidates = list(points)
    if eta > 1e-12:
        for a, b in zip(points[:-1], points[1:]):
            mid = 0.5 * (a + b)
            sig_i = np.sign(mid)
            sig_j = np.sign(s - mid)
            t = bi + (dE - eps * (sig_i - sig_j)) / eta
            candidates.append(min(max(t, a), b))

    def gain(t):
        return (-0.5 * eta * (t - bi) ** 2 + dE * (t - bi)
                - eps * (abs(t) + abs(s - t) - abs(bi) - abs(bj)))

    best_t, best_gain = bi, 0.0
    for t in candidates:
        g = gain(t)
        if g > best_gain:
            best_t, best_gain = t, g
    return best_t - bi, best_gain


class SVR(BaseEstimator):
    def __init__(self, c=1.0, epsilon=0.1, kernel="rbf", degree=3, gamma=None,
                 coef0=0.0, max_iter=20000, tol=1e-3):
        self.c = c
        self.epsilon = epsilon
        self.kernel = kernel
        self.degree = degree
        self.gamma = gamma
        self.coef0 = coef0
        self.max_iter = max_iter
        self.tol = tol

    def _resolve_gamma(self, X):
        if self.gamma is not None:
            return float(self.gamma)
        var = float(X.var())
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.c <= 0 or self.epsilon < 0 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("require c > 0, epsilon >= 0, tol > 0, max_iter >= 1")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "poly" and self.degree < 1:
            raise ValueError("degree must be >= 1")
        n = X.shape[0]
        C, eps = float(self.c), float(self.epsilon)
        self.gamma_ = self._resolve_gamma(X)
        K = kernel_matrix(self.kernel, X, X, self.gamma_, self.coef0, self.degree)

        beta = np.zeros(n)
        f = np.zeros(n)
        self.converged_ = False
        for _ in range(self.max_iter):
            E = y - f
            d_plus = np.where(beta >= 0, E - eps, E + eps)
            d_minus = np.where(beta <= 0, E + eps, E - eps)
            up = beta < C - 1e-12
            down = beta > -C + 1e-12
            if not up.any() or not down.any():
                break
            i = int(np.where(up)[0][np.argmax(d_plus[up])])
            j = int(np.where(down)[0][np.argmin(d_minus[down])])
            violation = d_plus[i] - d_minus[j]
            if violation < self.tol:
                self.converged_ = True
                break
            delta, gain = _pair_step(K, beta, E, i, j, C, eps)
            if gain <= 1e-14:
                break
            beta[i] += delta
            beta[j] -= delta
            f += K[:, i] * delta - K[:, j] * delta

        E = y - f
        d_plus = np.where(beta >= 0, E - eps, E + eps)
        d_minus = np.where(beta <= 0, E + eps, E - eps)
        up = beta < C - 1e-12
        down = beta > -C + 1e-12
        b_up = float(d_plus[up].max()) if up.any() else None
        b_low = float(d_minus[down].min()) if down.any() else None
        if b_up is not None and b_low is not None:
            self.bias_ = 0.5 * (b_up + b_low)
            self.kkt_violation_ = b_up - b_low
        else:
            self.bias_ = b_up if b_up is not None else (b_low if b_low is not None else 0.0)
            self.kkt_violation_ = 0.0

        sv = np.abs(beta) > 1e-10
        self.support_vectors_ = X[sv]
        self.dual_coef_ = beta[sv]
        self.n_support_ = int(sv.sum())
        return self

    def predict(self, X):
        self._check_fitted("dual_coef_")
        X = check_array(X)
        if self.n_support_ == 0:
            return np.full(X.shape[0], self.bias_)
        Ks = kernel_matrix(self.kernel, self.support_vectors_, X,
                           self.gamma_, self.coef0, self.degree)
        return Ks.T @ self.dual_coef_ + self.bias_

    def _get_state(self) -> dict:
        return {
            "support_vectors": self.support_vectors_.tolist(),
            "dual_coef": self.dual_coef_.tolist(),
            "bias": self.bias_,
            "gamma": self.gamma_,
            "converged": bool(self.converged_),
            "kkt_violation": self.kkt_violation_,
        }

    def _set_state(self, state: dict):
        self.support_vectors_ = np.asarray(state["support_vectors"], dtype=np.float64)
        self.dual_coef_ = np.asarray(state["dual_coef"], dtype=np.float64)
        self.bias_ = float(state["bias"])
        self.gamma_ = float(state["gamma"])
        self.converged_ = bool(state["converged"])
        self.kkt_violation_ = float(state["kkt_violation"])
        self.n_support_ = self.dual_coef_.shape[0]
        return self
