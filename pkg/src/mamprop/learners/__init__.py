"""Regressor suite behind a single fit/predict contract."""

from ..base import ValidationError
from .boosting import GradientBoostingRegressor
from .forest import RandomForestRegressor
from .gp import GaussianProcessRegressor
from .io import TrainedModel, fit_model, load_model, model_from_json, model_to_json, save_model
from .linear import LassoRegressor, RidgeRegressor, lasso_lambda_max
from .mlp import MLPRegressor
from .svr import SVR
from .trees import DecisionTreeRegressor

FAMILIES = {
    "ridge": RidgeRegressor,
    "lasso": LassoRegressor,
    "tree": DecisionTreeRegressor,
    "rf": RandomForestRegressor,
    "gb": GradientBoostingRegressor,
    "gpr": GaussianProcessRegressor,
    "mlp": MLPRegressor,
    "svr": SVR,
}

ALIASES = {"nn": "mlp", "xgb": "gb", "xgboost": "gb", "random_forest": "rf"}


def canonical_family(name: str) -> str:
    key = name.lower()
    key = ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ValidationError(f"unknown learner family {name!r}; choose from {sorted(FAMILIES)}")
    return key


def make_estimator(family: str, **params):
    cls = FAMILIES[canonical_family(family)]
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {family!r}: {exc}") from None


__all__ = [
    "FAMILIES", "ALIASES", "canonical_family", "make_estimator",
    "RidgeRegressor", "LassoRegressor", "DecisionTreeRegressor",
    "RandomForestRegressor", "GradientBoostingRegressor",
    "GaussianProcessRegressor", "MLPRegressor", "SVR",
    "TrainedModel", "fit_model", "save_model", "load_model",
    "model_to_json", "model_from_json", "lasso_lambda_max",
]
