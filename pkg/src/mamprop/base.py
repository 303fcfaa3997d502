"""Shared estimator machinery: parameter introspection, input checks, seeding."""

from __future__ import annotations

import inspect

import numpy as np

__all__ = [
    "MampropError",
    "SchemaError",
    "ValidationError",
    "ConvergenceError",
    "NotFittedError",
    "BaseEstimator",
    "check_array",
    "check_X_y",
    "rng_stream",
    "derive_seed",
]


class MampropError(Exception):
    """Base class for all package errors."""


class SchemaError(MampropError):
    """File header, format version, or schema fingerprint mismatch."""


class ValidationError(MampropError):
    """Value-level violation of a documented invariant."""


class ConvergenceError(MampropError):
    """An iterative solver could not reach its stated tolerance."""


class NotFittedError(MampropError):
    """Estimator used before fit."""


class BaseEstimator:
    """Minimal scikit-learn compatible estimator base.

    Subclasses store every constructor argument verbatim on ``self`` under
    the same name; ``get_params``/``set_params`` then work by introspecting
    the ``__init__`` signature, which is enough for the duck-typed estimator
    protocol (cloning, grid search, pipelines) used across the ecosystem.
    """

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"unknown parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def clone(self):
        return type(self)(**self.get_params())

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    def _check_fitted(self, attr: str):
        if getattr(self, attr, None) is None:
            raise NotFittedError(f"{type(self).__name__} is not fitted")


def check_array(X, *, name: str = "X", ndim: int = 2, min_rows: int = 1) -> np.ndarray:
    """Coerce to a float64 array and reject non-finite entries."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1 and ndim == 2:
        arr = arr.reshape(-1, 1)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValidationError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_X_y(X, y, *, min_rows: int = 2):
    X = check_array(X, name="X", min_rows=min_rows)
    y = check_array(y, name="y", ndim=1, min_rows=min_rows)
    if X.shape[0] != y.shape[0]:
        raise ValidationError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based random stream for a (seed, path) pair.

    Every source of randomness in the package draws from one of these
    streams, keyed by the run seed plus a structural path (tree index, fold
    index, trial index, ...).  Streams are independent of execution order,
    so results do not depend on scheduling.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Stable 64-bit sub-seed for handing to a nested component."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
