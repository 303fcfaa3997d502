"""Metrics, fold generation, cross-validated benchmarking, learning curves,
and label correlation analysis."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .base import ValidationError, check_array, derive_seed, rng_stream
from .data_model import LABELS, Dataset, select_complete
from .featurization import PLANS, FeatureMatrix, Standardizer, build_features, standardize_mask
from .learners import FAMILIES, canonical_family, make_estimator

# Numeric record fields each featurization plan requires.
PLAN_REQUIREMENTS = {plan: ("beam_power", "layer_thickness") for plan in PLANS}


def r2(y, yhat) -> float:
    y = check_array(y, name="y", ndim=1, min_rows=2)
    yhat = check_array(yhat, name="yhat", ndim=1, min_rows=2)
    if y.shape[0] != yhat.shape[0]:
        raise ValidationError("y and yhat must have equal length")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValidationError("R^2 is undefined for zero-variance targets")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


def mae(y, yhat) -> float:
    y = check_array(y, name="y", ndim=1, min_rows=1)
    yhat = check_array(yhat, name="yhat", ndim=1, min_rows=1)
    if y.shape[0] != yhat.shape[0]:
        raise ValidationError("y and yhat must have equal length")
    return float(np.mean(np.abs(y - yhat)))


def kfold_indices(n: int, k: int, seed: int) -> list:
    """Shuffle once by seed, split into k near-equal disjoint folds."""
    if k < 2:
        raise ValidationError("k must be >= 2")
    if n < k:
        raise ValidationError(f"cannot split {n} rows into {k} folds")
    perm = rng_stream(seed).permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        test = perm[start:start + size]
        train = np.concatenate([perm[:start], perm[start + size:]])
        folds.append((train, test))
        start += size
    return folds


def fold_fingerprint(folds) -> str:
    h = hashlib.sha256()
    for train, test in folds:
        h.update(np.asarray(train, dtype=np.int64).tobytes())
        h.update(b"|")
        h.update(np.asarray(test, dtype=np.int64).tobytes())
        h.update(b";")
    return h.hexdigest()


@dataclass
class CvReport:
    task: str
    featurization: str
    family: str
    params: dict
    fold_r2: list
    fold_mae: list
    mean_r2: float
    std_r2: float
    mean_mae: float
    std_mae: float
    n_records: int
    seed: int
    fold_hash: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _fold_scores(family: str, params: dict, values: np.ndarray, y: np.ndarray,
                 folds, std_mask: np.ndarray, seed: int):
    """Per-fold (r2, mae) with train-only standardizer statistics."""
    family = canonical_family(family)
    seed_param = "seed" in FAMILIES[family]._param_names() and "seed" not in params
    fold_r2, fold_mae = [], []
    for f, (train, test) in enumerate(folds):
        fold_params = dict(params)
        if seed_param:
            fold_params["seed"] = derive_seed(seed, 101, f)
        std = Standardizer(columns=std_mask).fit(values[train])
        est = make_estimator(family, **fold_params)
        try:
            est.fit(std.transform(values[train]), y[train])
            pred = est.predict(std.transform(values[test]))
            fold_r2.append(r2(y[test], pred))
            fold_mae.append(mae(y[test], pred))
        except ValidationError as exc:
            raise ValidationError(f"fold {f}: {exc}") from None
    return fold_r2, fold_mae


def _prepare(ds: Dataset, plan: str, label: str, elements, drop_groups):
    if plan not in PLANS:
        raise ValidationError(f"unknown featurization plan {plan!r}")
    ds_sel = select_complete(ds, PLAN_REQUIREMENTS[plan], label)
    fm = build_features(ds_sel, plan, elements)
    for group in drop_groups:
        fm = fm.drop_group(group)
    return ds_sel, fm


def cross_validate(family: str, params: dict, ds: Dataset, plan: str, label: str,
                   k: int = 5, seed: int = 0, elements=None,
                   standardize_onehot: bool = False, drop_groups=()) -> CvReport:
    ds_sel, fm = _prepare(ds, plan, label, elements, drop_groups)
    if len(ds_sel) < k:
        raise ValidationError(f"only {len(ds_sel)} complete records for label {label!r}, need >= {k}")
    y = ds_sel.labels(label)
    folds = kfold_indices(len(ds_sel), k, seed)
    mask = standardize_mask(fm.schema, standardize_onehot)
    fold_r2, fold_mae = _fold_scores(family, params, fm.values, y, folds, mask, seed)
    tag = "selected+tuned" if drop_groups else plan
    return CvReport(
        task=label, featurization=tag, family=canonical_family(family), params=dict(params),
        fold_r2=fold_r2, fold_mae=fold_mae,
        mean_r2=float(np.mean(fold_r2)), std_r2=float(np.std(fold_r2)),
        mean_mae=float(np.mean(fold_mae)), std_mae=float(np.std(fold_mae)),
        n_records=len(ds_sel), seed=seed, fold_hash=fold_fingerprint(folds),
    )


@dataclass
class LearningCurvePoint:
    fraction: float
    mean_mae: float
    std_mae: float
    n_evaluations: int
    mae_values: list = field(default_factory=list)


def learning_curve(family: str, params: dict, ds: Dataset, plan: str, label: str,
                   fractions=(0.2, 0.4, 0.6, 0.8, 1.0), repeats: int = 5,
                   k: int = 5, seed: int = 0, elements=None,
                   standardize_onehot: bool = False) -> list:
    """Out-of-sample MAE versus training-set size.

    For every fraction, each repeat subsamples the training partition of
    every fold uniformly without replacement and evaluates on the untouched
    test fold.  Fraction 1.0 leaves the partition intact, so a single repeat
    reproduces plain cross-validation.
    """
    for frac in fractions:
        if not (0 < frac <= 1):
            raise ValidationError(f"fractions must lie in (0, 1], got {frac}")
    ds_sel, fm = _prepare(ds, plan, label, elements, ())
    if len(ds_sel) < k:
        raise ValidationError(f"only {len(ds_sel)} complete records for label {label!r}, need >= {k}")
    y = ds_sel.labels(label)
    folds = kfold_indices(len(ds_sel), k, seed)
    mask = standardize_mask(fm.schema, standardize_onehot)

    curve = []
    for frac in fractions:
        maes = []
        for rep in range(repeats):
            sub_folds = []
            for f, (train, test) in enumerate(folds):
                if frac == 1.0:
                    sub = train
                else:
                    m = int(round(frac * train.shape[0]))
                    if m < 2:
                        raise ValidationError(f"fraction {frac} leaves fewer than 2 training rows")
                    rng = rng_stream(seed, 7, rep, f)
                    sub = rng.choice(train, size=m, replace=False)
                sub_folds.append((sub, test))
            _, fold_mae = _fold_scores(family, params, fm.values, y, sub_folds, mask,
                                       derive_seed(seed, 11, rep))
            maes.extend(fold_mae)
        curve.append(LearningCurvePoint(
            fraction=float(frac), mean_mae=float(np.mean(maes)), std_mae=float(np.std(maes)),
            n_evaluations=len(maes), mae_values=[float(v) for v in maes]))
    return curve


def pearson_matrix(ds: Dataset, labels=LABELS, material_filter: str | None = None):
    """Pairwise-complete Pearson correlations between label columns.

    Entries with fewer than two joint observations (or zero variance) are
    NaN, marking them absent rather than zero.
    """
    labels = list(labels)
    for kind in labels:
        if kind not in LABELS:
            raise ValidationError(f"unknown label kind {kind!r}")
    records = ds.records
    if material_filter is not None:
        records = [rec for rec in records if rec.material == material_filter]
    cols = {kind: np.array([rec.labels.get(kind, np.nan) for rec in records], dtype=np.float64)
            for kind in labels}

    size = len(labels)
    matrix = np.full((size, size), np.nan)
    for a in range(size):
        matrix[a, a] = 1.0
        for b_idx in range(a + 1, size):
            xa, xb = cols[labels[a]], cols[labels[b_idx]]
            joint = ~np.isnan(xa) & ~np.isnan(xb)
            if joint.sum() < 2:
                continue
            va, vb = xa[joint], xb[joint]
            sa, sb = va.std(), vb.std()
            if sa == 0.0 or sb == 0.0:
                continue
            corr = float(np.mean((va - va.mean()) * (vb - vb.mean())) / (sa * sb))
            matrix[a, b_idx] = matrix[b_idx, a] = corr
    return matrix, labels
