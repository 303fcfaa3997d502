"""Dataset and reference-table ingestion.

Everything in this module stores values in the units the source literature
prints them in (W, mm/s, um, degC, g/cm3-scale density).  SI conversion is
deliberately confined to the equation-discovery module so it happens at one
boundary only.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .base import SchemaError, ValidationError

PROCESSES = ("PBF", "DED")
SUBPROCESSES = ("L-PBF", "E-PBF", "L-DED", "E-DED", "Arc-DED", "Wire-L-DED")
ORIENTATIONS = ("horizontal", "vertical", "deg45")
POST_PROCESSING = ("as_built", "HT", "HIP", "SR")
SURFACE_CONDITIONS = ("as_built", "bead_blasted", "shot_peened", "corundum_blasted")

LABELS = ("ys", "uts", "e_mod", "elongation", "hv", "hrc", "rz")
LABEL_UNITS = {"ys": "MPa", "uts": "MPa", "e_mod": "GPa", "elongation": "%", "hv": "HV", "hrc": "HRC", "rz": "um"}

NUMERIC_FIELDS = ("beam_power", "scan_speed", "layer_thickness", "beam_diameter")
NUMERIC_UNITS = {"beam_power": "W", "scan_speed": "mm/s", "layer_thickness": "um", "beam_diameter": "um"}

THERMAL_FIELDS = ("density", "specific_heat", "thermal_conductivity", "melting_temperature", "cte")

# Plausibility windows for reference-table values.  Out-of-window cells are
# loaded verbatim with a warning; the source appendix itself contains cells
# that fail these (a 9.6 degC melting point, for one).
_PLAUSIBLE = {
    "density": (0.5, 25.0),            # g/cm3 scale
    "specific_heat": (50.0, 2000.0),   # J/(kg K)
    "thermal_conductivity": (0.1, 500.0),
    "melting_temperature": (400.0, 3500.0),  # degC
    "cte": (0.1, 50.0),                # 1e-6/K
}

_ORIENTATION_ALIASES = {
    "xy": "horizontal", "horizontal": "horizontal",
    "z": "vertical", "vertical": "vertical",
    "45": "deg45", "deg45": "deg45", "45deg": "deg45",
}

_POST_ALIASES = {
    "as_built": "as_built", "as-built": "as_built", "as built": "as_built",
    "ht": "HT", "hip": "HIP", "sr": "SR",
}

_SURFACE_ALIASES = {
    "as_built": "as_built", "as-built": "as_built", "as built": "as_built",
    "bead_blasted": "bead_blasted", "bead blasted": "bead_blasted",
    "shot_peened": "shot_peened", "shot peened": "shot_peened",
    "corundum_blasted": "corundum_blasted", "corundum blasted": "corundum_blasted",
}


@dataclass(frozen=True)
class MaterialSpec:
    name: str
    composition: dict  # element symbol -> wt%
    density: float            # g/cm3 scale, as printed
    specific_heat: float      # J/(kg K)
    thermal_conductivity: float  # W/(m K)
    melting_temperature: float   # degC
    cte: float                # 1e-6/K

    def elements(self) -> tuple:
        return tuple(sym for sym, wt in self.composition.items() if wt > 0)


@dataclass(frozen=True)
class ElementProperties:
    symbol: str
    atomic_number: int
    atomic_volume: float      # cm3/mol
    ionization_energy: float  # eV
    heat_of_fusion: float     # kJ/mol
    electron_affinity: float  # eV


ELEMENTAL_PROPERTIES = ("atomic_number", "atomic_volume", "ionization_energy", "heat_of_fusion", "electron_affinity")


class MaterialRegistry:
    """Ordered name -> MaterialSpec mapping with load-time warnings."""

    def __init__(self, specs=(), warnings=()):
        self._specs: dict[str, MaterialSpec] = {}
        for spec in specs:
            self.add(spec)
        self.warnings: list[str] = list(warnings)

    def add(self, spec: MaterialSpec):
        if spec.name in self._specs:
            raise ValidationError(f"duplicate material name {spec.name!r}")
        self._specs[spec.name] = spec

    def __contains__(self, name):
        return name in self._specs

    def __getitem__(self, name) -> MaterialSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise ValidationError(f"unknown material {name!r}") from None

    def __len__(self):
        return len(self._specs)

    def names(self) -> list[str]:
        return list(self._specs)

    def specs(self) -> list[MaterialSpec]:
        return list(self._specs.values())

    def all_elements(self) -> list[str]:
        seen = {}
        for spec in self._specs.values():
            for sym in spec.elements():
                seen[sym] = True
        return sorted(seen)


class ElementTable:
    def __init__(self, rows=()):
        self._rows: dict[str, ElementProperties] = {}
        for row in rows:
            if row.symbol in self._rows:
                raise ValidationError(f"duplicate element symbol {row.symbol!r}")
            self._rows[row.symbol] = row

    def __contains__(self, symbol):
        return symbol in self._rows

    def __getitem__(self, symbol) -> ElementProperties:
        try:
            return self._rows[symbol]
        except KeyError:
            raise ValidationError(f"element {symbol!r} not in table") from None

    def __len__(self):
        return len(self._rows)

    def symbols(self) -> list[str]:
        return list(self._rows)


@dataclass
class DataRecord:
    material: str
    process: str
    subprocess: str
    machine: str
    orientation: str
    post_processing: str          # as_built | HT | HIP | SR | other:<tag>
    surface_condition: str | None = None
    beam_power: float | None = None       # W
    scan_speed: float | None = None       # mm/s
    layer_thickness: float | None = None  # um
    beam_diameter: float | None = None    # um
    labels: dict = field(default_factory=dict)  # label kind -> value

    def get(self, field_name: str):
        return getattr(self, field_name)

    def has_fields(self, names) -> bool:
        return all(getattr(self, n) is not None for n in names)


@dataclass
class Dataset:
    records: list
    provenance: list
    registry: MaterialRegistry

    def __len__(self):
        return len(self.records)

    def labels(self, kind: str) -> np.ndarray:
        if kind not in LABELS:
            raise ValidationError(f"unknown label kind {kind!r}")
        vals = [rec.labels.get(kind) for rec in self.records]
        if any(v is None for v in vals):
            raise ValidationError(f"label {kind!r} missing on some records; filter with select_complete first")
        return np.asarray(vals, dtype=np.float64)


# ---------------------------------------------------------------------------
# CSV parsing helpers

def _parse_float(text: str, *, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"row {row}, column {column!r}: cannot parse number from {text!r}") from None


def _open_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    return rows


def _header_index(header, required, *, what):
    missing = [col for col in required if col not in header]
    if missing:
        raise SchemaError(f"{what} header missing column(s): {', '.join(missing)}")
    return {col: header.index(col) for col in header}


# ---------------------------------------------------------------------------
# Loading operations

def load_materials(path) -> MaterialRegistry:
    """Load the material reference table.

    Columns: ``name``, one column per element symbol (wt%), then the five
    thermal-property columns.  Empty element cells count as 0 wt%; empty
    thermal cells are rejected because every spec requires all five.
    """
    rows = _open_rows(path)
    registry = MaterialRegistry()
    if not rows:
        return registry
    header = rows[0]
    idx = _header_index(header, ("name",) + THERMAL_FIELDS, what="materials")
    element_cols = [c for c in header if c != "name" and c not in THERMAL_FIELDS]

    for rownum, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        name = row[idx["name"]].strip()
        if not name:
            raise ValidationError(f"row {rownum}: empty material name")
        thermal = {}
        for col in THERMAL_FIELDS:
            cell = row[idx[col]].strip()
            if cell == "":
                raise ValidationError(f"row {rownum}, column {col!r}: missing thermal property for {name!r}")
            thermal[col] = _parse_float(cell, row=rownum, column=col)
            if thermal[col] <= 0:
                raise ValidationError(f"row {rownum}: {name!r} has non-positive {col} ({thermal[col]})")
        composition = {}
        for col in element_cols:
            cell = row[idx[col]].strip()
            wt = _parse_float(cell, row=rownum, column=col) if cell else 0.0
            if wt < 0:
                raise ValidationError(f"row {rownum}: {name!r} has negative {col} wt% ({wt})")
            composition[col] = wt
        spec = MaterialSpec(name=name, composition=composition, **thermal)
        registry.add(spec)

        total = sum(composition.values())
        if not (98.0 <= total <= 102.0):
            registry.warnings.append(f"{name}: composition sums to {total:g} wt%, outside [98, 102]")
        for col, (lo, hi) in _PLAUSIBLE.items():
            if not (lo <= thermal[col] <= hi):
                registry.warnings.append(f"{name}: {col} = {thermal[col]:g} outside plausible range [{lo:g}, {hi:g}]")
    return registry


def load_elements(path, registry: MaterialRegistry | None = None) -> ElementTable:
    """Load elemental properties; optionally verify registry coverage."""
    rows = _open_rows(path)
    if not rows:
        raise SchemaError("elements file is empty")
    header = rows[0]
    idx = _header_index(header, ("symbol",) + ELEMENTAL_PROPERTIES, what="elements")

    parsed = []
    for rownum, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        symbol = row[idx["symbol"]].strip()
        values = {}
        for col in ELEMENTAL_PROPERTIES:
            cell = row[idx[col]].strip()
            if cell == "":
                raise ValidationError(f"row {rownum}, column {col!r}: missing value for element {symbol!r}")
            values[col] = _parse_float(cell, row=rownum, column=col)
        atomic_number = int(values.pop("atomic_number"))
        if atomic_number < 1:
            raise ValidationError(f"row {rownum}: element {symbol!r} has atomic_number {atomic_number} < 1")
        parsed.append(ElementProperties(symbol=symbol, atomic_number=atomic_number, **values))
    table = ElementTable(parsed)

    if registry is not None:
        missing = [sym for sym in registry.all_elements() if sym not in table]
        if missing:
            raise ValidationError(f"element table missing symbol(s) used by registered materials: {', '.join(missing)}")
    return table


_RECORD_COLUMNS = (
    ("material", "process", "subprocess", "machine", "orientation", "post_processing", "surface_condition", "source")
    + NUMERIC_FIELDS
    + LABELS
)


def _normalize_level(raw: str, aliases: dict):
    return aliases.get(raw.strip().lower())


def load_dataset(path, registry: MaterialRegistry, *, unknown_levels: str = "reject") -> Dataset:
    """Load experiment records, resolving material names against the registry.

    ``unknown_levels`` controls what happens to unrecognized post-processing
    or surface-condition strings: ``"reject"`` raises, ``"map_to_other"``
    stores them as ``other:<tag>``.  Process, subprocess, and orientation
    have closed vocabularies and always reject.
    """
    if unknown_levels not in ("reject", "map_to_other"):
        raise ValidationError(f"unknown_levels must be 'reject' or 'map_to_other', got {unknown_levels!r}")
    rows = _open_rows(path)
    if not rows:
        raise SchemaError("records file is empty")
    header = rows[0]
    required = ("material", "process", "subprocess", "machine", "orientation", "post_processing")
    idx = _header_index(header, required, what="records")
    known = set(_RECORD_COLUMNS)
    extra = [c for c in header if c not in known]
    if extra:
        raise SchemaError(f"records header has unknown column(s): {', '.join(extra)}")

    def cell(row, col):
        if col not in idx:
            return ""
        pos = idx[col]
        return row[pos].strip() if pos < len(row) else ""

    records, provenance = [], []
    for rownum, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        material = cell(row, "material")
        if material not in registry:
            raise ValidationError(f"row {rownum}: unknown material {material!r}")

        process = cell(row, "process").upper()
        if process not in PROCESSES:
            raise ValidationError(f"row {rownum}: unknown process {process!r}")
        sub_raw = cell(row, "subprocess")
        sub = {s.lower(): s for s in SUBPROCESSES}.get(sub_raw.lower())
        if sub is None:
            raise ValidationError(f"row {rownum}: unknown subprocess {sub_raw!r}")
        orient = _normalize_level(cell(row, "orientation"), _ORIENTATION_ALIASES)
        if orient is None:
            raise ValidationError(f"row {rownum}: unknown orientation {cell(row, 'orientation')!r}")

        post_raw = cell(row, "post_processing")
        post = _POST_ALIASES.get(post_raw.lower())
        if post is None:
            if post_raw.lower().startswith("other:"):
                post = "other:" + post_raw[6:]
            elif unknown_levels == "map_to_other":
                post = f"other:{post_raw}"
            else:
                raise ValidationError(f"row {rownum}: unknown post-processing condition {post_raw!r}")

        surf_raw = cell(row, "surface_condition")
        surface = None
        if surf_raw:
            surface = _SURFACE_ALIASES.get(surf_raw.lower())
            if surface is None:
                if unknown_levels == "map_to_other":
                    surface = f"other:{surf_raw}"
                else:
                    raise ValidationError(f"row {rownum}: unknown surface condition {surf_raw!r}")

        numerics = {}
        for col in NUMERIC_FIELDS:
            raw = cell(row, col)
            if raw == "":
                numerics[col] = None
                continue
            val = _parse_float(raw, row=rownum, column=col)
            if val <= 0:
                raise ValidationError(f"row {rownum}: {col} must be strictly positive, got {val:g}")
            numerics[col] = val

        labels = {}
        for kind in LABELS:
            raw = cell(row, kind)
            if raw == "":
                continue
            val = _parse_float(raw, row=rownum, column=kind)
            if val <= 0:
                raise ValidationError(f"row {rownum}: label {kind} must be strictly positive, got {val:g}")
            labels[kind] = val
        if not labels:
            raise ValidationError(f"row {rownum}: record has no label")

        records.append(DataRecord(
            material=material, process=process, subprocess=sub, machine=cell(row, "machine"),
            orientation=orient, post_processing=post, surface_condition=surface,
            labels=labels, **numerics,
        ))
        provenance.append(cell(row, "source") or str(path))
    return Dataset(records=records, provenance=provenance, registry=registry)


# ---------------------------------------------------------------------------
# Canonical serialization (fixed point: serialize(load(serialize(x))) == serialize(x))

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_dataset(ds: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_RECORD_COLUMNS)
    for rec, source in zip(ds.records, ds.provenance):
        row = [rec.material, rec.process, rec.subprocess, rec.machine, rec.orientation,
               rec.post_processing, rec.surface_condition or "", source]
        row += [_fmt(getattr(rec, col)) for col in NUMERIC_FIELDS]
        row += [_fmt(rec.labels.get(kind)) for kind in LABELS]
        writer.writerow(row)
    return buf.getvalue()


def serialize_registry(registry: MaterialRegistry) -> str:
    elements = registry.all_elements()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name"] + elements + list(THERMAL_FIELDS))
    for spec in registry.specs():
        row = [spec.name]
        row += [_fmt(float(spec.composition.get(sym, 0.0))) for sym in elements]
        row += [_fmt(float(getattr(spec, col))) for col in THERMAL_FIELDS]
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Filtering and summarizing

def select_complete(ds: Dataset, required_features, label: str | None = None) -> Dataset:
    """Keep records that carry ``label`` and every feature in ``required_features``.

    Order-preserving, idempotent, and monotone in the feature request.
    """
    required = list(required_features)
    for name in required:
        if name not in NUMERIC_FIELDS and name != "surface_condition":
            raise ValidationError(f"unknown required feature {name!r}")
    if label is not None and label not in LABELS:
        raise ValidationError(f"unknown label kind {label!r}")

    keep_records, keep_prov = [], []
    for rec, src in zip(ds.records, ds.provenance):
        if label is not None and label not in rec.labels:
            continue
        if not rec.has_fields(required):
            continue
        keep_records.append(rec)
        keep_prov.append(src)
    return Dataset(records=keep_records, provenance=keep_prov, registry=ds.registry)


CATEGORY_AXES = ("subprocess", "orientation", "post_processing", "surface_condition", "material", "machine")


@dataclass
class SummaryStats:
    n_records: int
    category_counts: dict   # axis -> {level: count}
    histograms: dict        # field -> {"edges": [...], "counts": [...], "n": int}
    label_counts: dict      # label kind -> count


def summarize(ds: Dataset, *, bins: int = 20) -> SummaryStats:
    if len(ds) == 0:
        raise ValidationError("cannot summarize an empty dataset")
    if bins < 1:
        raise ValidationError("bins must be >= 1")

    category_counts = {}
    for axis in CATEGORY_AXES:
        counts = {}
        for rec in ds.records:
            level = getattr(rec, axis)
            if level is None:
                continue
            counts[level] = counts.get(level, 0) + 1
        category_counts[axis] = dict(sorted(counts.items()))

    histograms = {}
    for fieldname in NUMERIC_FIELDS:
        values = np.array([rec.get(fieldname) for rec in ds.records if rec.get(fieldname) is not None])
        if values.size == 0:
            histograms[fieldname] = {"edges": [], "counts": [], "n": 0}
            continue
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            edges = np.array([lo - 0.5, hi + 0.5])
            counts = np.array([values.size])
        else:
            counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
        histograms[fieldname] = {"edges": edges.tolist(), "counts": counts.tolist(), "n": int(values.size)}

    label_counts = {kind: sum(1 for rec in ds.records if kind in rec.labels) for kind in LABELS}
    return SummaryStats(n_records=len(ds), category_counts=category_counts,
                        histograms=histograms, label_counts=label_counts)
