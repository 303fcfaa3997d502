"""Trained-model container: schema binding and versioned JSON persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..base import SchemaError, ValidationError
from ..featurization import FeatureMatrix

FORMAT_VERSION = 1


@dataclass
class TrainedModel:
    family: str
    params: dict
    estimator: object
    schema_fingerprint: str | None = None
    schema_json: str | None = None

    def predict(self, X) -> np.ndarray:
        if isinstance(X, FeatureMatrix):
            if self.schema_fingerprint is not None and X.schema.fingerprint() != self.schema_fingerprint:
                raise SchemaError("feature schema fingerprint does not match the trained model")
            values = X.values
        else:
            values = np.asarray(X, dtype=np.float64)
        return self.estimator.predict(values)


def fit_model(family: str, X, y, **params) -> TrainedModel:
    from . import make_estimator  # local import avoids a cycle at package init

    est = make_estimator(family, **params)
    fingerprint = schema_json = None
    if isinstance(X, FeatureMatrix):
        fingerprint = X.schema.fingerprint()
        schema_json = X.schema.to_json()
        values = X.values
    else:
        values = X
    est.fit(values, np.asarray(y, dtype=np.float64))
    return TrainedModel(family=family, params=est.get_params(), estimator=est,
                        schema_fingerprint=fingerprint, schema_json=schema_json)


def model_to_json(model: TrainedModel) -> str:
    payload = {
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "params": model.params,
        "schema_fingerprint": model.schema_fingerprint,
        "schema": model.schema_json,
        "state": model.estimator._get_state(),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def model_from_json(text: str) -> TrainedModel:
    from . import make_estimator

    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"corrupt model container: {exc}") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise SchemaError("corrupt model container: missing format_version")
    version = payload["format_version"]
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    for key in ("family", "params", "state"):
        if key not in payload:
            raise SchemaError(f"corrupt model container: missing {key!r}")
    try:
        est = make_estimator(payload["family"], **payload["params"])
        est._set_state(payload["state"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"corrupt model container: {exc}") from None
    return TrainedModel(family=payload["family"], params=payload["params"], estimator=est,
                        schema_fingerprint=payload.get("schema_fingerprint"),
                        schema_json=payload.get("schema"))


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(f"cannot read model container: {exc}") from None
    return model_from_json(text)
