"""Fully connected feed-forward regressor trained with Adam.

Hidden layers use the softplus activation (a smooth rectifier, so analytic
gradients can be validated against finite differences); the output is
linear.  Targets are centered and scaled internally during training and
predictions are mapped back, which keeps the default learning rate usable
across label scales from MPa to percent.
"""

from __future__ import annotations

import numpy as np

from ..base import BaseEstimator, check_X_y, check_array, rng_stream

ACTIVATION = "softplus"


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_params(n_inputs: int, layer_sizes, rng) -> list:
    """He-style scaled Gaussian weights, zero biases; one (W, b) pair per layer."""
    sizes = [n_inputs] + list(layer_sizes) + [1]
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, X):
    h = X
    pre = []
    for W, b in params[:-1]:
        z = h @ W + b
        pre.append((h, z))
        h = _softplus(z)
    W, b = params[-1]
    pre.append((h, None))
    return (h @ W + b).ravel(), pre


def loss_and_grads(params, X, y, alpha: float):
    """Penalized half-MSE and its gradients w.r.t. every weight and bias.

    loss = (1/2n) sum (yhat - y)^2 + (alpha/2n) sum ||W||_F^2
    """
    n = X.shape[0]
    yhat, cache = forward(params, X)
    err = yhat - y
    loss = 0.5 * float(err @ err) / n
    loss += 0.5 * alpha * sum(float(np.sum(W ** 2)) for W, _ in params) / n

    grads = [None] * len(params)
    delta = (err / n).reshape(-1, 1)
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        h_in, z_in = cache[layer]
        gW = h_in.T @ delta + (alpha / n) * W
        gb = delta.sum(axis=0)
        grads[layer] = (gW, gb)
        if layer > 0:
            delta = (delta @ W.T) * _sigmoid(cache[layer - 1][1])
    return loss, grads


class MLPRegressor(BaseEstimator):
    def __init__(self, layer_sizes=(64, 64), alpha=1e-4, learning_rate=1e-3,
                 epochs=200, batch_size=32, seed=0):
        self.layer_sizes = layer_sizes
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be >= 1")
        if self.alpha < 0 or self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("bad MLP hyperparameters")
        n = X.shape[0]
        self.y_mean_ = float(y.mean())
        self.y_scale_ = float(y.std()) or 1.0
        ys = (y - self.y_mean_) / self.y_scale_

        params = init_params(X.shape[1], self.layer_sizes, rng_stream(self.seed, 0))
        m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0
        for epoch in range(self.epochs):
            perm = rng_stream(self.seed, 1, epoch).permutation(n)
            for start in range(0, n, self.batch_size):
                batch = perm[start:start + self.batch_size]
                _, grads = loss_and_grads(params, X[batch], ys[batch], self.alpha)
                step += 1
                new_params = []
                for layer, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                    mW, mb = m[layer]
                    vW, vb = v[layer]
                    mW = beta1 * mW + (1 - beta1) * gW
                    mb = beta1 * mb + (1 - beta1) * gb
                    vW = beta2 * vW + (1 - beta2) * gW ** 2
                    vb = beta2 * vb + (1 - beta2) * gb ** 2
                    m[layer] = (mW, mb)
                    v[layer] = (vW, vb)
                    c1 = 1 - beta1 ** step
                    c2 = 1 - beta2 ** step
                    W = W - self.learning_rate * (mW / c1) / (np.sqrt(vW / c2) + eps)
                    b = b - self.learning_rate * (mb / c1) / (np.sqrt(vb / c2) + eps)
                    new_params.append((W, b))
                params = new_params
        self.params_ = params
        return self

    def predict(self, X):
        self._check_fitted("params_")
        X = check_array(X)
        yhat, _ = forward(self.params_, X)
        return yhat * self.y_scale_ + self.y_mean_

    def _get_state(self) -> dict:
        return {
            "activation": ACTIVATION,
            "y_mean": self.y_mean_,
            "y_scale": self.y_scale_,
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.params_],
        }

    def _set_state(self, state: dict):
        if state.get("activation") != ACTIVATION:
            raise ValueError(f"unsupported activation {state.get('activation')!r}")
        self.y_mean_ = float(state["y_mean"])
        self.y_scale_ = float(state["y_scale"])
        self.params_ = [(np.asarray(l["W"], dtype=np.float64), np.asarray(l["b"], dtype=np.float64))
                        for l in state["layers"]]
        return self
