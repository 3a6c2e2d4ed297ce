"""Mixed-type CSV ingestion and numeric encoding.

The schema is inferred from the real table only and then frozen, so both
tables are encoded into the same feature space: numeric columns are
standardized with real-data statistics, binary columns become one 0/1
column, categoricals become one-hot blocks over the real vocabulary.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_MISSING = ("", "?")
MISSING_CATEGORY = "<missing>"
KINDS = ("continuous", "integer", "binary", "categorical")


@dataclass
class RawTable:
    header: list
    rows: list  # cells are str, or None when missing
    path: str = ""

    def __post_init__(self):
        w = len(self.header)
        for i, r in enumerate(self.rows):
            if len(r) != w:
                raise DataError(f"row {i} has {len(r)} cells, expected {w}")

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [r[j] for r in self.rows]

    def select(self, idx) -> "RawTable":
        return RawTable(list(self.header), [self.rows[i] for i in idx], self.path)


def load_csv(path, missing_tokens=DEFAULT_MISSING) -> RawTable:
    """Read a headed CSV; cells equal to a missing token (after stripping
    surrounding whitespace) become None."""
    missing = set(missing_tokens)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = []
            for raw in reader:
                if not raw:
                    continue
                if len(raw) != len(header):
                    raise DataError(
                        f"{path}: line {reader.line_num} has {len(raw)} cells, expected {len(header)}"
                    )
                cells = [c.strip() for c in raw]
                rows.append([None if c in missing else c for c in cells])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8") from exc
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names")
    return RawTable(header, rows, str(path))


def _parse_float(s):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


@dataclass
class ColumnSpec:
    name: str
    kind: str
    vocabulary: list = field(default_factory=list)
    mean: float = 0.0
    std: float = 1.0
    missing_indicator: bool = False

    @property
    def width(self) -> int:
        if self.kind == "categorical":
            return len(self.vocabulary)
        return 1 + int(self.missing_indicator)

    def feature_names(self) -> list:
        if self.kind == "categorical":
            return [f"{self.name}={v}" for v in self.vocabulary]
        names = [self.name]
        if self.missing_indicator:
            names.append(f"{self.name}__missing")
        return names


@dataclass
class Schema:
    columns: list

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    @property
    def width(self) -> int:
        return sum(c.width for c in self.columns)

    def feature_names(self) -> list:
        return [n for c in self.columns for n in c.feature_names()]

    def to_dict(self) -> dict:
        return {"columns": [vars(c).copy() for c in self.columns]}

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        return cls([ColumnSpec(**c) for c in d["columns"]])


def _first_appearance(values) -> list:
    return list(dict.fromkeys(values))


def infer_schema(real: RawTable) -> Schema:
    if not real.rows:
        raise DataError("cannot infer a schema from a table without rows")
    cols = []
    for name in real.header:
        cells = real.column(name)
        present = [c for c in cells if c is not None]
        if not present:
            raise DataError(f"column {name!r} has no non-missing values")
        has_missing = len(present) < len(cells)
        distinct = _first_appearance(present)
        nums = [_parse_float(c) for c in present]
        numeric = all(v is not None for v in nums)
        if len(distinct) == 2:
            # share of vocabulary[1] imputes missing binary cells
            share = sum(c == distinct[1] for c in present) / len(present)
            cols.append(ColumnSpec(name, "binary", distinct, share, 1.0, has_missing))
        elif numeric:
            arr = np.array(nums)
            kind = "integer" if np.all(arr == np.round(arr)) and len(distinct) > 2 else "continuous"
            std = float(arr.std())
            cols.append(ColumnSpec(name, kind, [], float(arr.mean()), std if std > 0 else 1.0, has_missing))
        else:
            vocab = _first_appearance(MISSING_CATEGORY if c is None else c for c in cells)
            cols.append(ColumnSpec(name, "categorical", vocab))
    return Schema(cols)


@dataclass
class DatasetMatrix:
    """Encoded rows (samples) by columns (features) with provenance."""

    values: np.ndarray
    source: str = ""
    feature_names: list = field(default_factory=list)
    report: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def align(table: RawTable, schema: Schema) -> RawTable:
    """Reorder ``table`` columns to the schema's, matching by name."""
    if set(table.header) != set(schema.names) or len(table.header) != len(schema.names):
        missing = sorted(set(schema.names) - set(table.header))
        extra = sorted(set(table.header) - set(schema.names))
        raise DataError(f"column mismatch: missing {missing}, unexpected {extra}")
    idx = [table.header.index(n) for n in schema.names]
    return RawTable(list(schema.names), [[r[j] for j in idx] for r in table.rows], table.path)


def encode(table: RawTable, schema: Schema, source: str = "") -> DatasetMatrix:
    table = align(table, schema)
    n = len(table)
    blocks = []
    report = {}
    for j, col in enumerate(schema.columns):
        cells = [r[j] for r in table.rows]
        entry = {"missing": sum(c is None for c in cells), "unknown": 0}
        if col.kind == "categorical":
            lookup = {v: i for i, v in enumerate(col.vocabulary)}
            block = np.zeros((n, len(col.vocabulary)))
            for i, c in enumerate(cells):
                k = lookup.get(MISSING_CATEGORY if c is None else c)
                if k is None:
                    entry["unknown"] += 1
                else:
                    block[i, k] = 1.0
            blocks.append(block)
        else:
            x = np.empty(n)
            miss = np.zeros(n)
            for i, c in enumerate(cells):
                if c is None:
                    miss[i] = 1.0
                    x[i] = 0.0 if col.kind != "binary" else np.nan
                    continue
                if col.kind == "binary":
                    if c == col.vocabulary[1]:
                        x[i] = 1.0
                    elif c == col.vocabulary[0]:
                        x[i] = 0.0
                    else:
                        entry["unknown"] += 1
                        x[i] = 0.0
                else:
                    v = _parse_float(c)
                    if v is None:
                        entry["unknown"] += 1
                        miss[i] = 1.0
                        x[i] = 0.0
                    else:
                        x[i] = (v - col.mean) / col.std
            if col.kind == "binary" and miss.any():
                x[np.isnan(x)] = col.mean
            block = [x]
            if col.missing_indicator:
                block.append(miss)
            blocks.append(np.column_stack(block))
        if entry["unknown"]:
            log.warning("%s: %d value(s) in column %r outside the real-data schema", source or table.path,
                        entry["unknown"], col.name)
        report[col.name] = entry
    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return DatasetMatrix(values, source or table.path, schema.feature_names(), report)


def decode_categorical(block, column: ColumnSpec):
    """Token for a one-hot row, or None for the all-zero fallback block."""
    block = np.asarray(block)
    if column.kind != "categorical" or block.shape != (len(column.vocabulary),):
        raise ValueError("block does not match the column's vocabulary")
    if not block.any():
        return None
    return column.vocabulary[int(np.argmax(block))]


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
