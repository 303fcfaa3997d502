"""Feature-matrix construction and standardization.

Three stacked schemes are supported: a baseline of processing parameters,
thermal properties, and one-hot categoricals; the baseline plus raw wt%
composition columns; and the baseline plus mixture-rule elemental features
(concentration-weighted sums of elemental properties).
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass

import numpy as np

from .base import BaseEstimator, ValidationError
from .data_model import (
    ELEMENTAL_PROPERTIES,
    ORIENTATIONS,
    PROCESSES,
    SUBPROCESSES,
    Dataset,
    ElementTable,
)

PLANS = ("baseline", "baseline+composition", "baseline+elemental")

# Numeric prefix of every plan, in contract order: processing parameters
# first, thermal properties after.
_NUMERIC_PREFIX = (
    ("beam_power", "W", "beam_power"),
    ("layer_thickness", "um", "layer_thickness"),
    ("density", "g/cm3", "density"),
    ("melting_point", "degC", "melting_temperature"),
    ("thermal_conductivity", "W/(m K)", "thermal_conductivity"),
    ("specific_heat", "J/(kg K)", "specific_heat"),
    ("cte", "1e-6/K", "cte"),
)

_ONE_HOT_GROUPS = ("material", "machine", "orientation", "post_processing", "process", "subprocess")


@dataclass(frozen=True)
class Column:
    kind: str          # numeric | one_hot | composition | elemental
    name: str          # unique across the schema
    unit: str = ""
    group: str = ""    # one_hot group name
    level: str = ""    # one_hot level
    group_size: int = 0


class FeatureSchema:
    def __init__(self, columns):
        self.columns = tuple(columns)
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValidationError("schema column names must be unique")

    def __len__(self):
        return len(self.columns)

    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def to_json(self) -> str:
        payload = [c.__dict__ for c in self.columns]
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "FeatureSchema":
        return cls([Column(**item) for item in json.loads(text)])

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def groups(self) -> list[tuple[str, list[int]]]:
        """Feature groups for ablation: one-hot groups drop as a unit,
        every other column is its own group."""
        out, seen = [], {}
        for i, col in enumerate(self.columns):
            if col.kind == "one_hot":
                if col.group not in seen:
                    seen[col.group] = []
                    out.append((col.group, seen[col.group]))
                seen[col.group].append(i)
            else:
                out.append((col.name, [i]))
        return out

    def select(self, indices) -> "FeatureSchema":
        return FeatureSchema([self.columns[i] for i in indices])


@dataclass
class FeatureMatrix:
    values: np.ndarray
    schema: FeatureSchema
    row_ids: np.ndarray
    warnings: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema):
            raise ValidationError(
                f"value matrix shape {self.values.shape} does not match schema length {len(self.schema)}")
        if self.values.shape[0] != self.row_ids.shape[0]:
            raise ValidationError("row_ids length does not match row count")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("feature matrix contains non-finite entries")

    @property
    def n_rows(self):
        return self.values.shape[0]

    def select_columns(self, indices) -> "FeatureMatrix":
        indices = list(indices)
        return FeatureMatrix(self.values[:, indices], self.schema.select(indices),
                             self.row_ids, list(self.warnings))

    def drop_group(self, group_name: str) -> "FeatureMatrix":
        drop = dict(self.schema.groups()).get(group_name)
        if drop is None:
            raise ValidationError(f"unknown feature group {group_name!r}")
        keep = [i for i in range(len(self.schema)) if i not in set(drop)]
        return self.select_columns(keep)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.schema.names()) + "\n")
        for row in self.values:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Schema construction

def _one_hot_levels(ds: Dataset) -> dict:
    post_levels = {"as_built", "HT", "HIP", "SR"}
    for rec in ds.records:
        if rec.post_processing.startswith("other:"):
            post_levels.add(rec.post_processing)
    return {
        "material": sorted(ds.registry.names()),
        "machine": sorted({rec.machine for rec in ds.records}),
        "orientation": sorted(ORIENTATIONS),
        "post_processing": sorted(post_levels),
        "process": sorted(PROCESSES),
        "subprocess": sorted(SUBPROCESSES),
    }


def build_schema(ds: Dataset, plan: str = "baseline", elements: ElementTable | None = None) -> FeatureSchema:
    if plan not in PLANS:
        raise ValidationError(f"unknown featurization plan {plan!r}")
    cols = [Column(kind="numeric", name=name, unit=unit) for name, unit, _ in _NUMERIC_PREFIX]
    levels = _one_hot_levels(ds)
    for group in _ONE_HOT_GROUPS:
        group_levels = levels[group]
        for level in group_levels:
            cols.append(Column(kind="one_hot", name=f"{group}={level}", group=group,
                               level=level, group_size=len(group_levels)))
    if plan == "baseline+composition":
        for sym in ds.registry.all_elements():
            cols.append(Column(kind="composition", name=f"wt_{sym}", unit="wt%"))
    elif plan == "baseline+elemental":
        if elements is None:
            raise ValidationError("elemental featurization requires an element table")
        units = {"atomic_number": "", "atomic_volume": "cm3/mol", "ionization_energy": "eV",
                 "heat_of_fusion": "kJ/mol", "electron_affinity": "eV"}
        for prop in ELEMENTAL_PROPERTIES:
            cols.append(Column(kind="elemental", name=f"elem_{prop}", unit=units[prop]))
    return FeatureSchema(cols)


def mixture_rule(spec, elements: ElementTable) -> dict:
    """Concentration-weighted elemental properties, weights = wt% normalized to 1."""
    present = [(sym, wt) for sym, wt in spec.composition.items() if wt > 0]
    total = sum(wt for _, wt in present)
    if total <= 0:
        raise ValidationError(f"material {spec.name!r} has an empty composition")
    out = {}
    for prop in ELEMENTAL_PROPERTIES:
        acc = 0.0
        for sym, wt in present:
            if sym not in elements:
                raise ValidationError(f"element {sym!r} (material {spec.name!r}) missing from element table")
            acc += (wt / total) * float(getattr(elements[sym], prop))
        out[prop] = acc
    return out


def build_features(ds: Dataset, plan: str = "baseline", elements: ElementTable | None = None,
                   schema: FeatureSchema | None = None) -> FeatureMatrix:
    """Build the feature matrix for ``plan``.

    Passing a frozen ``schema`` applies it to new data: levels absent from
    the schema map to an all-zero one-hot block and are reported in
    ``FeatureMatrix.warnings`` rather than failing.
    """
    if schema is None:
        schema = build_schema(ds, plan, elements)
    warnings: list[str] = []
    n = len(ds)
    values = np.zeros((n, len(schema)))

    field_of = {name: field for name, _, field in _NUMERIC_PREFIX}
    col_index = {c.name: i for i, c in enumerate(schema.columns)}

    elemental_cache, composition_cols = {}, []
    for i, col in enumerate(schema.columns):
        if col.kind == "composition":
            composition_cols.append((i, col.name[3:]))

    for r, rec in enumerate(ds.records):
        spec = ds.registry[rec.material]
        for name, _, field in _NUMERIC_PREFIX:
            if field in ("beam_power", "layer_thickness"):
                val = getattr(rec, field)
                if val is None:
                    raise ValidationError(
                        f"record {r} ({rec.material}) is missing {field}; run select_complete first")
            else:
                val = getattr(spec, field)
            values[r, col_index[name]] = val

        for group in _ONE_HOT_GROUPS:
            level = rec.material if group == "material" else getattr(rec, group)
            key = f"{group}={level}"
            if key in col_index:
                values[r, col_index[key]] = 1.0
            else:
                warnings.append(f"record {r}: level {level!r} unseen for group {group!r}, one-hot block left zero")

        for i, sym in composition_cols:
            values[r, i] = spec.composition.get(sym, 0.0)

        if any(c.kind == "elemental" for c in schema.columns):
            if elements is None:
                raise ValidationError("elemental featurization requires an element table")
            if rec.material not in elemental_cache:
                elemental_cache[rec.material] = mixture_rule(spec, elements)
            mixed = elemental_cache[rec.material]
            for prop in ELEMENTAL_PROPERTIES:
                values[r, col_index[f"elem_{prop}"]] = mixed[prop]

    return FeatureMatrix(values=values, schema=schema, row_ids=np.arange(n), warnings=warnings)


def baseline_features(ds: Dataset) -> FeatureMatrix:
    return build_features(ds, "baseline")


def composition_features(ds: Dataset, base: FeatureMatrix) -> FeatureMatrix:
    if base.n_rows != len(ds):
        raise ValidationError("base matrix row count does not match dataset")
    return build_features(ds, "baseline+composition")


def elemental_features(ds: Dataset, elements: ElementTable, base: FeatureMatrix) -> FeatureMatrix:
    if base.n_rows != len(ds):
        raise ValidationError("base matrix row count does not match dataset")
    return build_features(ds, "baseline+elemental", elements=elements)


# ---------------------------------------------------------------------------
# Standardization

def standardize_mask(schema: FeatureSchema, include_onehot: bool = False) -> np.ndarray:
    """Columns eligible for standardization: numeric-origin kinds by default."""
    kinds = {"numeric", "composition", "elemental"}
    if include_onehot:
        kinds.add("one_hot")
    return np.array([c.kind in kinds for c in schema.columns], dtype=bool)


class Standardizer(BaseEstimator):
    """Per-column zero-mean unit-variance scaling with population std.

    ``columns`` is an optional boolean mask restricting which columns are
    scaled; excluded columns pass through untouched.  Columns whose training
    variance is zero are only centered (all zeros on the data they were fit
    on) and flagged in ``passthrough_``.
    """

    def __init__(self, columns=None):
        self.columns = columns

    def fit(self, X):
        values = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError("standardizer needs a non-empty 2-d matrix")
        mask = np.ones(values.shape[1], dtype=bool) if self.columns is None \
            else np.asarray(self.columns, dtype=bool)
        if mask.shape[0] != values.shape[1]:
            raise ValidationError("column mask length does not match matrix width")
        self.mask_ = mask
        self.means_ = values.mean(axis=0)
        self.stds_ = values.std(axis=0)  # population (divisor n)
        self.passthrough_ = mask & (self.stds_ == 0.0)
        return self

    def transform(self, X):
        self._check_fitted("means_")
        is_fm = isinstance(X, FeatureMatrix)
        values = X.values if is_fm else np.asarray(X, dtype=np.float64)
        if values.shape[1] != self.means_.shape[0]:
            raise ValidationError("matrix width does not match fitted standardizer")
        out = values.astype(np.float64).copy()
        scale = self.mask_ & ~self.passthrough_
        out[:, scale] = (out[:, scale] - self.means_[scale]) / self.stds_[scale]
        out[:, self.passthrough_] = out[:, self.passthrough_] - self.means_[self.passthrough_]
        if is_fm:
            return FeatureMatrix(out, X.schema, X.row_ids, list(X.warnings))
        return out

    def fit_transform(self, X):
        return self.fit(X).transform(X)

    def inverse_transform(self, X):
        self._check_fitted("means_")
        is_fm = isinstance(X, FeatureMatrix)
        values = X.values if is_fm else np.asarray(X, dtype=np.float64)
        out = values.astype(np.float64).copy()
        scale = self.mask_ & ~self.passthrough_
        out[:, scale] = out[:, scale] * self.stds_[scale] + self.means_[scale]
        out[:, self.passthrough_] = out[:, self.passthrough_] + self.means_[self.passthrough_]
        if is_fm:
            return FeatureMatrix(out, X.schema, X.row_ids, list(X.warnings))
        return out


def fit_standardizer(X, columns=None) -> Standardizer:
    return Standardizer(columns=columns).fit(X)


def apply_standardizer(s: Standardizer, X):
    return s.transform(X)
