"""Feature attribution: drop-column importance, split-gain importance, and
interventional SHAP values for tree ensembles with a brute-force oracle.

SHAP values here are interventional: the value of a coalition S is the mean
model output over background rows with the features in S replaced by the
explained instance's values.  For trees this is computed exactly by path
enumeration; for anything else the exponential-time oracle is available
behind a feature-count gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import ValidationError, check_array
from .data_model import Dataset
from .evaluation import PLAN_REQUIREMENTS, _fold_scores, _prepare, fold_fingerprint, kfold_indices
from .featurization import FeatureMatrix, standardize_mask
from .learners import (
    DecisionTreeRegressor,
    GradientBoostingRegressor,
    RandomForestRegressor,
    TrainedModel,
    canonical_family,
)
from .learners.trees import TreeArrays, tree_predict


@dataclass
class ShapExplanation:
    base_value: float
    phis: np.ndarray
    prediction: float
    feature_values: np.ndarray

    def local_accuracy_gap(self) -> float:
        return abs(self.base_value + float(self.phis.sum()) - self.prediction)


@dataclass
class ImportanceReport:
    kind: str                 # drop_column | gain | mean_abs_shap
    scores: dict              # feature/group name -> score
    baseline_score: float | None = None
    fold_hash: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scores": dict(self.scores),
                "baseline_score": self.baseline_score, "fold_hash": self.fold_hash}


# ---------------------------------------------------------------------------
# Drop-column importance

def drop_column_importance(family: str, params: dict, ds: Dataset, plan: str, label: str,
                           k: int = 5, seed: int = 0, elements=None,
                           standardize_onehot: bool = False) -> ImportanceReport:
    """Mean CV R^2 with all features minus mean CV R^2 without each group.

    Every ablation reuses the identical fold partition (asserted via the
    report's fold hash), so score differences are attributable to the
    dropped group alone.
    """
    ds_sel, fm = _prepare(ds, plan, label, elements, ())
    groups = fm.schema.groups()
    if len(groups) < 2:
        raise ValidationError("drop-column importance needs at least 2 feature groups")
    if len(ds_sel) < k:
        raise ValidationError(f"only {len(ds_sel)} complete records, need >= {k}")
    y = ds_sel.labels(label)
    folds = kfold_indices(len(ds_sel), k, seed)

    def mean_r2(matrix: FeatureMatrix) -> float:
        mask = standardize_mask(matrix.schema, standardize_onehot)
        fold_r2, _ = _fold_scores(family, params, matrix.values, y, folds, mask, seed)
        return float(np.mean(fold_r2))

    baseline = mean_r2(fm)
    scores = {}
    for name, _ in groups:
        scores[name] = baseline - mean_r2(fm.drop_group(name))
    return ImportanceReport(kind="drop_column", scores=scores, baseline_score=baseline,
                            fold_hash=fold_fingerprint(folds))


# ---------------------------------------------------------------------------
# Gain importance

def _resolve_estimator(model):
    return model.estimator if isinstance(model, TrainedModel) else model


def _feature_names(model, n_features):
    if isinstance(model, TrainedModel) and model.schema_json:
        from .featurization import FeatureSchema
        return FeatureSchema.from_json(model.schema_json).names()
    return [f"f{i}" for i in range(n_features)]


def gain_importance(model) -> ImportanceReport:
    est = _resolve_estimator(model)
    if not hasattr(est, "split_gains"):
        raise ValidationError(f"{type(est).__name__} does not record split gains")
    gains = est.split_gains()
    names = _feature_names(model, gains.shape[0])
    return ImportanceReport(kind="gain", scores={n: float(g) for n, g in zip(names, gains)})


# ---------------------------------------------------------------------------
# Interventional tree SHAP

def _leaf_constraints(tree: TreeArrays):
    """Per leaf: (feature array, lower bounds, upper bounds, leaf value).

    A leaf is reached by a row x iff lo[k] <= x[feat[k]] < hi[k] for every
    consolidated path feature k.
    """
    leaves = []

    def walk(node, bounds):
        feat = tree.feature[node]
        if feat < 0:
            items = sorted(bounds.items())
            feats = np.array([f for f, _ in items], dtype=np.int64)
            lo = np.array([b[0] for _, b in items])
            hi = np.array([b[1] for _, b in items])
            leaves.append((feats, lo, hi, float(tree.value[node])))
            return
        thr = tree.threshold[node]
        lo, hi = bounds.get(feat, (-np.inf, np.inf))
        if thr > lo:  # left: x < thr
            left = dict(bounds)
            left[feat] = (lo, min(hi, thr))
            walk(tree.left[node], left)
        if thr < hi:  # right: x >= thr
            right = dict(bounds)
            right[feat] = (max(lo, thr), hi)
            walk(tree.right[node], right)

    walk(0, {})
    return leaves


def _shapley_weight_tables(max_m: int):
    """W_U[a, b] = (a-1)! b! / (a+b)!  and  W_D[a, b] = a! (b-1)! / (a+b)!."""
    size = max_m + 1
    w_u = np.zeros((size, size))
    w_d = np.zeros((size, size))
    for a in range(size):
        for b in range(size):
            if a >= 1:
                w_u[a, b] = math.exp(math.lgamma(a) + math.lgamma(b + 1) - math.lgamma(a + b + 1))
            if b >= 1:
                w_d[a, b] = math.exp(math.lgamma(a + 1) + math.lgamma(b) - math.lgamma(a + b + 1))
    return w_u, w_d


def _tree_shap_single(tree: TreeArrays, X: np.ndarray, background: np.ndarray):
    """Interventional SHAP of one tree for a batch of instances.

    For each leaf and each (instance, background row) pair the path features
    split into U (must come from the instance) and D (must come from the
    background row); the leaf contributes the exact Shapley weight of the
    resulting conjunction game to each member of U and D.
    """
    nx, d = X.shape
    nb = background.shape[0]
    phis = np.zeros((nx, d))
    leaves = _leaf_constraints(tree)
    max_m = max((len(f) for f, _, _, _ in leaves), default=0)
    w_u, w_d = _shapley_weight_tables(max_m)

    for feats, lo, hi, value in leaves:
        if feats.size == 0:
            continue  # constant tree: no feature attribution
        x_ok = (X[:, feats] >= lo) & (X[:, feats] < hi)            # (nx, m)
        b_ok = (background[:, feats] >= lo) & (background[:, feats] < hi)  # (nb, m)
        u = x_ok[:, None, :] & ~b_ok[None, :, :]                   # (nx, nb, m)
        dmask = ~x_ok[:, None, :] & b_ok[None, :, :]
        alive = ~(~x_ok[:, None, :] & ~b_ok[None, :, :]).any(axis=2)
        a_cnt = u.sum(axis=2)
        b_cnt = dmask.sum(axis=2)
        wu = w_u[a_cnt, b_cnt] * alive
        wd = w_d[a_cnt, b_cnt] * alive
        for kk in range(feats.size):
            col = feats[kk]
            phis[:, col] += value * (u[:, :, kk] * wu).sum(axis=1) / nb
            phis[:, col] -= value * (dmask[:, :, kk] * wd).sum(axis=1) / nb

    base = float(tree_predict(tree, background).mean())
    return phis, base


def _trees_of(est):
    if isinstance(est, DecisionTreeRegressor):
        return [est.tree_], 0.0, 1.0
    if isinstance(est, RandomForestRegressor):
        return est.trees_, 0.0, 1.0 / len(est.trees_)
    if isinstance(est, GradientBoostingRegressor):
        return est.trees_, est.base_, est.learning_rate
    raise ValidationError(f"{type(est).__name__} is not a tree ensemble; use exact_shap_oracle")


def tree_shap(model, X, background) -> list:
    """Exact interventional SHAP explanations for every row of ``X``."""
    est = _resolve_estimator(model)
    trees, offset, scale = _trees_of(est)

    if isinstance(model, TrainedModel) and isinstance(X, FeatureMatrix):
        model.predict(X)  # fingerprint check
    x_vals = X.values if isinstance(X, FeatureMatrix) else check_array(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    bg_vals = background.values if isinstance(background, FeatureMatrix) else check_array(background)
    if bg_vals.shape[0] == 0:
        raise ValidationError("background must be non-empty")
    if bg_vals.shape[1] != x_vals.shape[1]:
        raise ValidationError("background and instances have different widths")

    phis = np.zeros_like(x_vals)
    base = offset
    for tree in trees:
        tp, tb = _tree_shap_single(tree, x_vals, bg_vals)
        phis += scale * tp
        base += scale * tb

    preds = est.predict(x_vals)
    return [ShapExplanation(base_value=float(base), phis=phis[i].copy(),
                            prediction=float(preds[i]), feature_values=x_vals[i].copy())
            for i in range(x_vals.shape[0])]


# ---------------------------------------------------------------------------
# Brute-force oracle

def exact_shap_oracle(model, x, background, max_features: int = 15) -> ShapExplanation:
    """Shapley values over all 2^M coalitions; reference for tree_shap."""
    est = _resolve_estimator(model)
    x = np.asarray(x, dtype=np.float64).ravel()
    bg = background.values if isinstance(background, FeatureMatrix) else check_array(background)
    m = x.shape[0]
    if m > max_features:
        raise ValidationError(f"{m} features exceeds the oracle gate of {max_features}")
    if bg.shape[0] == 0 or bg.shape[1] != m:
        raise ValidationError("background must be non-empty and match the instance width")

    n_masks = 1 << m
    bits = ((np.arange(n_masks)[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
    nb = bg.shape[0]
    v = np.empty(n_masks)
    chunk = max(1, 2_000_000 // (nb * m))
    for start in range(0, n_masks, chunk):
        sel = bits[start:start + chunk]
        composite = np.where(sel[:, None, :], x[None, None, :], bg[None, :, :])
        preds = est.predict(composite.reshape(-1, m)).reshape(sel.shape[0], nb)
        v[start:start + chunk] = preds.mean(axis=1)

    sizes = bits.sum(axis=1)
    weights = np.array([math.exp(math.lgamma(s + 1) + math.lgamma(m - s) - math.lgamma(m + 1))
                        for s in range(m)])
    phis = np.zeros(m)
    for i in range(m):
        without = np.where(~bits[:, i])[0]
        w = weights[sizes[without]]
        phis[i] = float(np.sum(w * (v[without | (1 << i)] - v[without])))

    return ShapExplanation(base_value=float(v[0]), phis=phis,
                           prediction=float(v[-1]), feature_values=x.copy())


# ---------------------------------------------------------------------------
# Figure-data exports

def _interaction_partner(phi_mat, values, names):
    """For each feature, the partner whose values correlate most with its SHAP values."""
    n, d = phi_mat.shape
    partners = [""] * d
    if n < 2:
        return partners
    for t in range(d):
        pt = phi_mat[:, t]
        if pt.std() == 0.0:
            continue
        best, best_corr = "", 0.0
        for p in range(d):
            if p == t or values[:, p].std() == 0.0:
                continue
            corr = abs(float(np.corrcoef(pt, values[:, p])[0, 1]))
            if corr > best_corr:
                best, best_corr = names[p], corr
        partners[t] = best
    return partners


def shap_exports(explanations, feature_names=None) -> dict:
    """Plot-ready tables for summary, waterfall, force, decision, and
    dependence renderings of a batch of explanations."""
    if not explanations:
        raise ValidationError("no explanations to export")
    d = explanations[0].phis.shape[0]
    if any(e.phis.shape[0] != d for e in explanations):
        raise ValidationError("explanations disagree on feature count")
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(d)]
    if len(names) != d:
        raise ValidationError("feature_names length does not match explanations")

    phi_mat = np.stack([e.phis for e in explanations])
    val_mat = np.stack([e.feature_values for e in explanations])
    mean_abs = np.abs(phi_mat).mean(axis=0)
    summary_order = np.argsort(-mean_abs, kind="stable")

    summary = [{"feature": names[j], "mean_abs_shap": float(mean_abs[j])} for j in summary_order]
    swarm = [{"instance": i, "feature": names[j], "shap": float(phi_mat[i, j]),
              "value": float(val_mat[i, j])}
             for i in range(len(explanations)) for j in range(d)]

    waterfall = []
    for i, exp in enumerate(explanations):
        order = np.argsort(-np.abs(exp.phis), kind="stable")
        cum = exp.base_value
        for step, j in enumerate(order):
            waterfall.append({
                "instance": i, "step": step, "feature": names[j],
                "value": float(exp.feature_values[j]), "contribution": float(exp.phis[j]),
                "cumulative_before": float(cum), "cumulative_after": float(cum + exp.phis[j]),
            })
            cum += float(exp.phis[j])

    force = [{"instance": i, "base_value": float(e.base_value), "prediction": float(e.prediction),
              "feature": names[j], "shap": float(e.phis[j]), "value": float(e.feature_values[j])}
             for i, e in enumerate(explanations) for j in range(d)]

    # decision paths accumulate least-important first so the plot fans out at the top
    decision_order = summary_order[::-1]
    decision = []
    for i, exp in enumerate(explanations):
        cum = exp.base_value
        for step, j in enumerate(decision_order):
            cum += float(exp.phis[j])
            decision.append({"instance": i, "step": step, "feature": names[j],
                             "shap": float(exp.phis[j]), "cumulative": float(cum)})

    partners = _interaction_partner(phi_mat, val_mat, names)
    name_index = {n: k for k, n in enumerate(names)}
    dependence = []
    for j in range(d):
        partner = partners[j]
        for i in range(len(explanations)):
            row = {"feature": names[j], "instance": i, "value": float(val_mat[i, j]),
                   "shap": float(phi_mat[i, j]), "partner": partner}
            row["partner_value"] = float(val_mat[i, name_index[partner]]) if partner else None
            dependence.append(row)

    return {"summary": summary, "summary_swarm": swarm, "waterfall": waterfall,
            "force": force, "decision": decision, "dependence": dependence}
