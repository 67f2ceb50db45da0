"""Typed tabular dataset: schema, missing-value tracking, descriptive stats, splits.

Columns are stored column-major. Numeric columns are float64 arrays with NaN at
missing cells; categorical and binary columns are object arrays of strings with
None at missing cells. A Dataset is immutable after construction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"

KINDS = (NUMERIC, CATEGORICAL, BINARY)
ROLES = ("feature", "target", "identifier")

#: strings treated as a missing cell in CSV input
MISSING_SENTINELS = ("", "NA")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    role: str = "feature"
    levels: tuple[str, ...] = ()
    units: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise DataError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind == CATEGORICAL and not self.levels:
            raise DataError(f"categorical column {self.name!r} declares no levels")
        if self.kind == BINARY and not self.levels:
            object.__setattr__(self, "levels", ("0", "1"))
        if len(set(self.levels)) != len(self.levels):
            raise DataError(f"column {self.name!r}: duplicate levels")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC


def validate_schema(schema: list[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DataError(f"duplicate column names in schema: {dupes}")
    targets = [c for c in schema if c.role == "target"]
    if len(targets) != 1:
        raise DataError(f"schema must declare exactly one target column, found {len(targets)}")
    if targets[0].kind != NUMERIC:
        raise DataError(f"target column {targets[0].name!r} must be numeric")


class Dataset:
    """Immutable column store with a per-cell missing mask."""

    def __init__(self, schema: list[ColumnSchema],
                 columns: dict[str, np.ndarray],
                 missing: dict[str, np.ndarray]):
        validate_schema(schema)
        if set(columns) != {c.name for c in schema}:
            raise DataError("columns do not match schema names")
        lengths = {len(v) for v in columns.values()}
        if len(lengths) != 1:
            raise DataError(f"ragged columns: lengths {sorted(lengths)}")
        n = lengths.pop()
        if n == 0:
            raise DataError("dataset has no rows")

        self.schema = list(schema)
        self._by_name = {c.name: c for c in schema}
        self._columns: dict[str, np.ndarray] = {}
        self._missing: dict[str, np.ndarray] = {}
        for col in schema:
            values = columns[col.name]
            mask = np.asarray(missing[col.name], dtype=bool).copy()
            if col.is_numeric:
                values = np.asarray(values, dtype=float).copy()
                values[mask] = np.nan
                if not np.all(np.isfinite(values[~mask])):
                    raise DataError(f"column {col.name!r}: non-finite value in a non-missing cell")
            else:
                values = np.asarray(values, dtype=object).copy()
                values[mask] = None
                observed = {v for v in values[~mask]}
                bad = observed - set(col.levels)
                if bad:
                    raise DataError(
                        f"column {col.name!r}: value(s) {sorted(bad)} outside declared levels {list(col.levels)}")
            values.setflags(write=False)
            mask.setflags(write=False)
            self._columns[col.name] = values
            self._missing[col.name] = mask
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]

    def missing_mask(self, name: str) -> np.ndarray:
        return self._missing[name]

    def column_schema(self, name: str) -> ColumnSchema:
        return self._by_name[name]

    @property
    def target_name(self) -> str:
        return next(c.name for c in self.schema if c.role == "target")

    def feature_names(self) -> list[str]:
        return [c.name for c in self.schema if c.role == "feature"]

    def replace_columns(self, columns: dict[str, np.ndarray],
                        missing: dict[str, np.ndarray]) -> "Dataset":
        """New Dataset with some columns overridden (immutably)."""
        new_cols = {name: self._columns[name] for name in self._columns}
        new_miss = {name: self._missing[name] for name in self._missing}
        new_cols.update(columns)
        new_miss.update(missing)
        return Dataset(self.schema, new_cols, new_miss)

    def equals(self, other: "Dataset") -> bool:
        if [c.name for c in self.schema] != [c.name for c in other.schema]:
            return False
        for col in self.schema:
            a, b = self._columns[col.name], other._columns[col.name]
            ma, mb = self._missing[col.name], other._missing[col.name]
            if not np.array_equal(ma, mb):
                return False
            if col.is_numeric:
                if not np.array_equal(a[~ma], b[~mb]):
                    return False
            else:
                if list(a[~ma]) != list(b[~mb]):
                    return False
        return True


# ---------------------------------------------------------------------------
# schema sidecar + CSV I/O
# ---------------------------------------------------------------------------

def load_schema(path) -> list[ColumnSchema]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"schema file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"schema file {path} does not parse: {exc}")
    if not isinstance(doc, dict) or "columns" not in doc:
        raise DataError(f"schema file {path} must be an object with a 'columns' list")
    schema = []
    for entry in doc["columns"]:
        unknown = set(entry) - {"name", "kind", "role", "levels", "units"}
        if unknown:
            raise DataError(f"schema entry {entry.get('name')!r}: unknown keys {sorted(unknown)}")
        schema.append(ColumnSchema(
            name=entry["name"],
            kind=entry["kind"],
            role=entry.get("role", "feature"),
            levels=tuple(entry.get("levels", ())),
            units=entry.get("units", ""),
        ))
    validate_schema(schema)
    return schema


def save_schema(schema: list[ColumnSchema], path) -> None:
    doc = {"columns": [
        {"name": c.name, "kind": c.kind, "role": c.role,
         "levels": list(c.levels), "units": c.units}
        for c in schema
    ]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_csv(path, schema_path) -> Dataset:
    """Read an RFC-4180-style CSV against a schema sidecar.

    Empty cells and the literal "NA" are flagged missing. Errors carry
    1-based data-row numbers and column names.
    """
    schema = load_schema(schema_path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file")
            rows = list(reader)
    except FileNotFoundError:
        raise DataError(f"data file not found: {path}")

    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"{path}: duplicate header column(s) {dupes}")
    declared = {c.name for c in schema}
    unknown = [h for h in header if h not in declared]
    if unknown:
        raise DataError(f"{path}: unknown column(s) {unknown} not in schema")
    absent = [c.name for c in schema if c.name not in header]
    if absent:
        raise DataError(f"{path}: schema column(s) {absent} missing from header")

    col_pos = {name: header.index(name) for name in header}
    n = len(rows)
    columns: dict[str, np.ndarray] = {}
    missing: dict[str, np.ndarray] = {}
    for col in schema:
        pos = col_pos[col.name]
        mask = np.zeros(n, dtype=bool)
        if col.is_numeric:
            vals = np.empty(n, dtype=float)
            for i, row in enumerate(rows):
                if len(row) != len(header):
                    raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
                cell = row[pos]
                if cell in MISSING_SENTINELS:
                    mask[i] = True
                    vals[i] = np.nan
                else:
                    try:
                        vals[i] = float(cell)
                    except ValueError:
                        raise DataError(
                            f"{path}: row {i + 1}, column {col.name!r}: unparseable numeric cell {cell!r}")
        else:
            vals = np.empty(n, dtype=object)
            level_set = set(col.levels)
            for i, row in enumerate(rows):
                cell = row[pos]
                if cell in MISSING_SENTINELS:
                    mask[i] = True
                    vals[i] = None
                elif cell not in level_set:
                    raise DataError(
                        f"{path}: row {i + 1}, column {col.name!r}: value {cell!r} "
                        f"outside levels {list(col.levels)}")
                else:
                    vals[i] = cell
        columns[col.name] = vals
        missing[col.name] = mask
    return Dataset(schema, columns, missing)


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset back to CSV. Floats use repr so values round-trip."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        names = [c.name for c in ds.schema]
        writer.writerow(names)
        cols = [ds.column(n) for n in names]
        masks = [ds.missing_mask(n) for n in names]
        numeric = [ds.column_schema(n).is_numeric for n in names]
        for i in range(ds.n):
            row = []
            for j in range(len(names)):
                if masks[j][i]:
                    row.append("")
                elif numeric[j]:
                    row.append(repr(float(cols[j][i])))
                else:
                    row.append(cols[j][i])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# descriptive statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NumericSummary:
    mean: float | None
    std: float | None
    min: float | None
    max: float | None
    cv: float | None  # std/mean, None when undefined (mean == 0 or no data)
    n_missing: int = 0


@dataclass(frozen=True)
class DescriptiveStats:
    numeric: dict[str, NumericSummary] = field(default_factory=dict)
    # per categorical column: list of (level, count, percent)
    categorical: dict[str, list[tuple[str, int, float]]] = field(default_factory=dict)


def describe(ds: Dataset) -> DescriptiveStats:
    """Per-column statistics over non-missing cells (identifier columns skipped).

    Numeric std uses the n-1 denominator. CV = std/mean is undefined when the
    mean is zero.
    """
    numeric: dict[str, NumericSummary] = {}
    categorical: dict[str, list[tuple[str, int, float]]] = {}
    for col in ds.schema:
        if col.role == "identifier":
            continue
        mask = ds.missing_mask(col.name)
        n_missing = int(mask.sum())
        if col.is_numeric:
            vals = ds.column(col.name)[~mask]
            if len(vals) == 0:
                numeric[col.name] = NumericSummary(None, None, None, None, None, n_missing)
                continue
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            cv = std / mean if mean != 0 else None
            numeric[col.name] = NumericSummary(mean, std, float(vals.min()), float(vals.max()),
                                               cv, n_missing)
        else:
            vals = ds.column(col.name)[~mask]
            total = len(vals)
            counts = {lv: 0 for lv in col.levels}
            for v in vals:
                counts[v] += 1
            categorical[col.name] = [
                (lv, counts[lv], 100.0 * counts[lv] / total if total else math.nan)
                for lv in col.levels
            ]
    return DescriptiveStats(numeric=numeric, categorical=categorical)


# ---------------------------------------------------------------------------
# seeded splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def partitions(self) -> dict[str, np.ndarray]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def split(ds_or_n, fractions: tuple[float, float, float], seed: int) -> SplitIndices:
    """Seeded shuffle split into train/validation/test.

    |train| = floor(n * f_train); the remainder goes to validation and test,
    with validation taking the extra element when the remainder is odd.
    """
    n = ds_or_n.n if isinstance(ds_or_n, Dataset) else int(ds_or_n)
    f_train, f_val, f_test = fractions
    if min(f_train, f_val, f_test) <= 0:
        raise DataError(f"fractions must be positive, got {fractions}")
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {fractions}")
    n_train = math.floor(n * f_train)
    rest = n - n_train
    n_val = (rest + 1) // 2
    n_test = rest - n_val
    if min(n_train, n_val, n_test) == 0:
        raise DataError(
            f"split of n={n} with fractions {fractions} leaves an empty partition "
            f"(sizes {n_train}/{n_val}/{n_test})")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitIndices(
        train=np.sort(perm[:n_train]),
        validation=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
        seed=seed,
    )
