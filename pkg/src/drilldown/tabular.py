"""In-memory columnar datasets.

Typed columns, predicate evaluation to boolean row masks, per-field domain
statistics, and quantile binning for continuous fields. Datasets are immutable
after ingestion and safe for concurrent reads.

Null semantics are SQL-like: a null (empty CSV cell) fails every atomic
predicate.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    CellCapExceeded,
    DuplicateColumn,
    MalformedCsv,
    NotBinnable,
    TypeMismatch,
    UnknownField,
    UnparseableFilterExpression,
)

CELL_CAP = 10_000_000
DEFAULT_BIN_COUNT = 4

NUMERIC = "numeric"
TEMPORAL = "temporal"
BOOLEAN = "boolean"
CATEGORICAL = "categorical"
TEXT = "text"

#: Inference precedence is fixed so ingestion is deterministic.
COLUMN_TYPES = (NUMERIC, TEMPORAL, BOOLEAN, CATEGORICAL, TEXT)

#: Continuous types that support range predicates and binning.
CONTINUOUS_TYPES = (NUMERIC, TEMPORAL)

#: Types enumerable as drill candidates (text is excluded: unbounded domain).
ENUMERABLE_TYPES = (NUMERIC, TEMPORAL, BOOLEAN, CATEGORICAL)


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Equals:
    field: str
    value: Any


@dataclass(frozen=True)
class InSet:
    field: str
    values: tuple


@dataclass(frozen=True)
class Range:
    """Interval predicate; a ``None`` bound is unbounded on that side."""

    field: str
    low: Any = None
    high: Any = None
    low_inclusive: bool = True
    high_inclusive: bool = True


@dataclass(frozen=True)
class Conjunction:
    members: tuple = ()


AtomicPredicate = Union[Equals, InSet, Range]
Predicate = Union[Equals, InSet, Range, Conjunction]

#: Boolean row mask aligned with a dataset's rows.
RowMask = np.ndarray


def in_set(field: str, values: Iterable) -> InSet:
    """Build an in-set predicate with deduplicated, stably ordered members."""
    return InSet(field, tuple(sorted(set(values), key=repr)))


def range_pred(
    field: str,
    low: Any = None,
    high: Any = None,
    low_inclusive: bool = True,
    high_inclusive: bool = True,
) -> Range:
    """Build a range predicate, normalizing unbounded sides.

    An unbounded side's inclusive flag is forced to False so structurally
    equal intervals compare equal. Raises ValueError when low > high.
    """
    if low is None:
        low_inclusive = False
    if high is None:
        high_inclusive = False
    if low is not None and high is not None:
        lo, hi = _bound_key(low), _bound_key(high)
        if lo > hi:
            raise ValueError(f"range low {low!r} exceeds high {high!r}")
    return Range(field, low, high, low_inclusive, high_inclusive)


def conjunction(members: Iterable[Predicate]) -> Predicate:
    """Flatten members into a conjunction; a single member stays bare."""
    flat: list[Predicate] = []
    for m in members:
        if isinstance(m, Conjunction):
            flat.extend(m.members)
        else:
            flat.append(m)
    if len(flat) == 1:
        return flat[0]
    return Conjunction(tuple(flat))


def predicate_fields(predicate: Predicate) -> tuple[str, ...]:
    """All field names referenced by the predicate, in first-seen order."""
    if isinstance(predicate, Conjunction):
        seen: dict[str, None] = {}
        for m in predicate.members:
            for f in predicate_fields(m):
                seen.setdefault(f, None)
        return tuple(seen)
    return (predicate.field,)


def _bound_key(value: Any) -> float:
    """Comparable key for a range bound (ISO-8601 strings map to epoch ms)."""
    if isinstance(value, str):
        ms = _parse_temporal(value)
        if ms is None:
            raise ValueError(f"range bound {value!r} is not numeric or ISO-8601")
        return ms
    return float(value)


# --- rendering ---------------------------------------------------------------

def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return format(value, "g")
    return str(value)


def render_predicate(predicate: Predicate) -> str:
    """Human-readable "field op value" rendering, used for labels and tags."""
    if isinstance(predicate, Equals):
        return f"{predicate.field} = {_format_value(predicate.value)}"
    if isinstance(predicate, InSet):
        inner = ", ".join(_format_value(v) for v in predicate.values)
        return f"{predicate.field} in {{{inner}}}"
    if isinstance(predicate, Range):
        f = predicate.field
        if predicate.low is not None and predicate.high is not None:
            lo = "[" if predicate.low_inclusive else "("
            hi = "]" if predicate.high_inclusive else ")"
            return (
                f"{f} in {lo}{_format_value(predicate.low)}, "
                f"{_format_value(predicate.high)}{hi}"
            )
        if predicate.low is not None:
            op = ">=" if predicate.low_inclusive else ">"
            return f"{f} {op} {_format_value(predicate.low)}"
        if predicate.high is not None:
            op = "<=" if predicate.high_inclusive else "<"
            return f"{f} {op} {_format_value(predicate.high)}"
        return f"{f} is not null"
    if isinstance(predicate, Conjunction):
        if not predicate.members:
            return "true"
        return " AND ".join(render_predicate(m) for m in predicate.members)
    raise TypeError(f"not a predicate: {predicate!r}")


_LABEL_OPS = ("<=", ">=", "<", ">", "=")


def parse_predicate_label(text: str) -> Predicate | None:
    """Inverse of :func:`render_predicate` for atomic filters.

    Returns None when the text does not match the label grammar. Values are
    coerced: ``true``/``false`` to bool, numeric literals to float, anything
    else kept as a string.
    """
    text = text.strip()
    if " in [" in text or " in (" in text:
        for sep in (" in [", " in ("):
            if sep in text:
                field, rest = text.split(sep, 1)
                low_inc = sep.endswith("[")
                break
        if not rest or rest[-1] not in "])":
            return None
        high_inc = rest[-1] == "]"
        parts = rest[:-1].split(", ")
        if len(parts) != 2:
            return None
        try:
            return range_pred(
                field.strip(),
                _coerce_label_value(parts[0]),
                _coerce_label_value(parts[1]),
                low_inc,
                high_inc,
            )
        except ValueError:
            return None
    if " in {" in text and text.endswith("}"):
        field, rest = text.split(" in {", 1)
        values = [_coerce_label_value(v) for v in rest[:-1].split(", ") if v]
        if not values:
            return None
        return in_set(field.strip(), values)
    for op in _LABEL_OPS:
        token = f" {op} "
        if token in text:
            field, value = text.split(token, 1)
            field, value = field.strip(), _coerce_label_value(value)
            if not field:
                return None
            if op == "=":
                return Equals(field, value)
            if op == ">=":
                return range_pred(field, low=value)
            if op == ">":
                return range_pred(field, low=value, low_inclusive=False)
            if op == "<=":
                return range_pred(field, high=value)
            return range_pred(field, high=value, high_inclusive=False)
    return None


def _coerce_label_value(raw: str) -> Any:
    raw = raw.strip()
    if raw.lower() == "true":
        return True
    if raw.lower() == "false":
        return False
    try:
        f = float(raw)
        if math.isfinite(f):
            return f
    except ValueError:
        pass
    return raw


# --- JSON wire format --------------------------------------------------------

def predicate_to_json(predicate: Predicate) -> dict:
    if isinstance(predicate, Equals):
        return {"kind": "equals", "field": predicate.field, "value": predicate.value}
    if isinstance(predicate, InSet):
        return {"kind": "in_set", "field": predicate.field, "values": list(predicate.values)}
    if isinstance(predicate, Range):
        return {
            "kind": "range",
            "field": predicate.field,
            "low": predicate.low,
            "high": predicate.high,
            "low_inclusive": predicate.low_inclusive,
            "high_inclusive": predicate.high_inclusive,
        }
    if isinstance(predicate, Conjunction):
        return {"kind": "conjunction", "members": [predicate_to_json(m) for m in predicate.members]}
    raise TypeError(f"not a predicate: {predicate!r}")


def predicate_from_json(doc: Mapping) -> Predicate:
    try:
        kind = doc["kind"]
        if kind == "equals":
            return Equals(doc["field"], doc["value"])
        if kind == "in_set":
            return in_set(doc["field"], doc["values"])
        if kind == "range":
            return range_pred(
                doc["field"],
                doc.get("low"),
                doc.get("high"),
                doc.get("low_inclusive", True),
                doc.get("high_inclusive", True),
            )
        if kind == "conjunction":
            return Conjunction(tuple(predicate_from_json(m) for m in doc["members"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise UnparseableFilterExpression(f"bad predicate document: {exc}") from exc
    raise UnparseableFilterExpression(f"unknown predicate kind {doc.get('kind')!r}")


# ---------------------------------------------------------------------------
# Columns and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    name: str
    ctype: str
    data: np.ndarray   # float64 for numeric/temporal, object otherwise
    nulls: np.ndarray  # bool mask, True where the value is null


@dataclass(frozen=True)
class Dataset:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DuplicateColumn(f"duplicate column names in {self.name!r}")
        lengths = {len(c.data) for c in self.columns}
        if len(lengths) > 1:
            raise MalformedCsv("ragged columns")
        if self.cell_count > CELL_CAP:
            raise CellCapExceeded(
                f"{self.cell_count} cells exceeds the {CELL_CAP} cap"
            )

    @property
    def row_count(self) -> int:
        return len(self.columns[0].data) if self.columns else 0

    @property
    def cell_count(self) -> int:
        return self.row_count * len(self.columns)

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def field(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownField(f"field {name!r} not in dataset {self.name!r}")

    def has_field(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)


@dataclass(frozen=True)
class FieldDomain:
    """Distinct-value statistics for one field.

    ``values`` holds the sorted distinct values for categorical/boolean
    columns; ``minmax`` holds (min, max) for numeric/temporal columns.
    """

    field: str
    ctype: str
    cardinality: int
    values: tuple = ()
    minmax: tuple | None = None


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _parse_number(raw: str) -> float | None:
    try:
        value = float(raw)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_temporal(raw: str) -> float | None:
    """ISO-8601 date or datetime to epoch milliseconds (naive = UTC)."""
    try:
        dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp() * 1000.0


def epoch_ms_to_iso(ms: float) -> str:
    return datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc).isoformat()


_BOOL_TOKENS = {"true": True, "false": False, "0": False, "1": True}


#: A column this small in distinct values is categorical at any row count.
_CATEGORICAL_FLOOR = 3


def _infer_type(values: Sequence[str], row_count: int) -> str:
    """Fixed-order inference: numeric, temporal, boolean, categorical, text."""
    non_null = [v for v in values if v != ""]
    if all(_parse_number(v) is not None for v in non_null):
        return NUMERIC
    if all(_parse_temporal(v) is not None for v in non_null):
        return TEMPORAL
    if all(v.lower() in _BOOL_TOKENS for v in non_null):
        return BOOLEAN
    if len(set(non_null)) <= max(0.5 * row_count, _CATEGORICAL_FLOOR):
        return CATEGORICAL
    return TEXT


def _build_column(name: str, ctype: str, values: Sequence[str]) -> Column:
    nulls = np.array([v == "" for v in values], dtype=bool)
    if ctype == NUMERIC:
        data = np.array(
            [_parse_number(v) if v != "" else np.nan for v in values], dtype=np.float64
        )
    elif ctype == TEMPORAL:
        data = np.array(
            [_parse_temporal(v) if v != "" else np.nan for v in values], dtype=np.float64
        )
    elif ctype == BOOLEAN:
        data = np.array(
            [_BOOL_TOKENS[v.lower()] if v != "" else None for v in values], dtype=object
        )
    else:
        data = np.array([v if v != "" else None for v in values], dtype=object)
    return Column(name, ctype, data, nulls)


def ingest_csv(data: bytes | str, name: str, max_cells: int = CELL_CAP) -> Dataset:
    """Parse an RFC-4180 CSV (UTF-8, header row required) into a Dataset.

    Types are inferred per column in the fixed order numeric, temporal,
    boolean, categorical (distinct count at most half the rows), text.
    Raises CellCapExceeded as soon as rows x columns passes ``max_cells``.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise MalformedCsv(f"not UTF-8: {exc}") from exc
    else:
        text = data.lstrip("﻿")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except (StopIteration, csv.Error):
        raise MalformedCsv("empty input: header row required") from None
    header = [h.strip() for h in header]
    if not header or any(h == "" for h in header):
        raise MalformedCsv("blank column name in header")
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DuplicateColumn(f"duplicate column(s): {', '.join(dupes)}")

    n_cols = len(header)
    cap = min(max_cells, CELL_CAP)
    rows: list[list[str]] = []
    try:
        for row in reader:
            if not row:
                continue
            if len(row) != n_cols:
                raise MalformedCsv(
                    f"row {len(rows) + 2} has {len(row)} fields, expected {n_cols}"
                )
            rows.append(row)
            if (len(rows)) * n_cols > cap:
                raise CellCapExceeded(
                    f"more than {cap} cells ({len(rows)} rows x {n_cols} columns)"
                )
    except csv.Error as exc:
        raise MalformedCsv(str(exc)) from exc

    columns = []
    for i, col_name in enumerate(header):
        raw = [r[i] for r in rows]
        ctype = _infer_type(raw, len(rows))
        columns.append(_build_column(col_name, ctype, raw))
    return Dataset(name, tuple(columns))


def build_dataset(
    name: str,
    columns: Mapping[str, Sequence],
    types: Mapping[str, str] | None = None,
) -> Dataset:
    """Assemble a Dataset from Python sequences (None marks a null).

    Types are taken from ``types`` when given, otherwise inferred from the
    Python values (bool, int/float, datetime, str) with the same categorical
    threshold as CSV ingestion.
    """
    built = []
    lengths = {len(v) for v in columns.values()}
    if len(lengths) > 1:
        raise MalformedCsv("ragged columns")
    row_count = lengths.pop() if lengths else 0
    for col_name, values in columns.items():
        ctype = (types or {}).get(col_name) or _infer_python_type(values, row_count)
        nulls = np.array([v is None for v in values], dtype=bool)
        if ctype in CONTINUOUS_TYPES:
            data = np.array(
                [_to_continuous(v, ctype) if v is not None else np.nan for v in values],
                dtype=np.float64,
            )
        else:
            data = np.array(list(values), dtype=object)
        built.append(Column(col_name, ctype, data, nulls))
    return Dataset(name, tuple(built))


def _infer_python_type(values: Sequence, row_count: int) -> str:
    non_null = [v for v in values if v is not None]
    if all(isinstance(v, bool) for v in non_null):
        return BOOLEAN
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in non_null):
        return NUMERIC
    if all(isinstance(v, datetime) for v in non_null):
        return TEMPORAL
    if len(set(map(str, non_null))) <= max(0.5 * row_count, _CATEGORICAL_FLOOR):
        return CATEGORICAL
    return TEXT


def _to_continuous(value: Any, ctype: str) -> float:
    if ctype == TEMPORAL:
        if isinstance(value, datetime):
            dt = value if value.tzinfo else value.replace(tzinfo=timezone.utc)
            return dt.timestamp() * 1000.0
        if isinstance(value, str):
            ms = _parse_temporal(value)
            if ms is None:
                raise TypeMismatch(f"{value!r} is not ISO-8601")
            return ms
    return float(value)


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

def field_domain(dataset: Dataset, field: str) -> FieldDomain:
    """Exact distinct-count statistics for one field."""
    col = dataset.field(field)
    if col.ctype in CONTINUOUS_TYPES:
        non_null = col.data[~np.isnan(col.data)]
        distinct = np.unique(non_null)
        minmax = (
            (float(distinct[0]), float(distinct[-1])) if distinct.size else None
        )
        return FieldDomain(field, col.ctype, int(distinct.size), minmax=minmax)
    non_null_values = [v for v, is_null in zip(col.data, col.nulls) if not is_null]
    distinct_vals = sorted(set(non_null_values), key=repr)
    return FieldDomain(field, col.ctype, len(distinct_vals), values=tuple(distinct_vals))


def all_domains(dataset: Dataset) -> dict[str, FieldDomain]:
    return {f: field_domain(dataset, f) for f in dataset.fields}


# ---------------------------------------------------------------------------
# Predicate evaluation
# ---------------------------------------------------------------------------

def popcount(mask: RowMask) -> int:
    return int(np.count_nonzero(mask))


def evaluate_predicate(dataset: Dataset, predicate: Predicate) -> RowMask:
    """Boolean mask with bit i set iff row i satisfies the predicate.

    A conjunction is the bitwise AND of its members; the empty conjunction is
    vacuously true. Nulls fail every atomic predicate.
    """
    if isinstance(predicate, Conjunction):
        mask = np.ones(dataset.row_count, dtype=bool)
        for member in predicate.members:
            mask &= evaluate_predicate(dataset, member)
        return mask
    col = dataset.field(predicate.field)
    if isinstance(predicate, Equals):
        return _eval_equals(col, predicate.value)
    if isinstance(predicate, InSet):
        mask = np.zeros(len(col.data), dtype=bool)
        for v in predicate.values:
            mask |= _eval_equals(col, v)
        return mask
    if isinstance(predicate, Range):
        return _eval_range(col, predicate)
    raise TypeError(f"not a predicate: {predicate!r}")


def _coerce_continuous(col: Column, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise TypeMismatch(
            f"{value!r} is not comparable with {col.ctype} column {col.name!r}"
        )
    if isinstance(value, str):
        if col.ctype != TEMPORAL:
            raise TypeMismatch(f"string value {value!r} on numeric column {col.name!r}")
        ms = _parse_temporal(value)
        if ms is None:
            raise TypeMismatch(f"{value!r} is not ISO-8601 for column {col.name!r}")
        return ms
    return float(value)


def _eval_equals(col: Column, value: Any) -> RowMask:
    if col.ctype in CONTINUOUS_TYPES:
        target = _coerce_continuous(col, value)
        return np.asarray(col.data == target, dtype=bool)
    if col.ctype == BOOLEAN:
        if not isinstance(value, bool):
            raise TypeMismatch(f"{value!r} is not boolean for column {col.name!r}")
        return np.asarray(col.data == value, dtype=bool) & ~col.nulls
    if not isinstance(value, str):
        raise TypeMismatch(f"{value!r} is not a string for column {col.name!r}")
    return np.asarray(col.data == value, dtype=bool) & ~col.nulls


def _eval_range(col: Column, predicate: Range) -> RowMask:
    if col.ctype not in CONTINUOUS_TYPES:
        raise TypeMismatch(
            f"range predicate on non-continuous column {col.name!r} ({col.ctype})"
        )
    data = col.data
    mask = ~np.isnan(data)
    if predicate.low is not None:
        low = _coerce_continuous(col, predicate.low)
        mask &= (data >= low) if predicate.low_inclusive else (data > low)
    if predicate.high is not None:
        high = _coerce_continuous(col, predicate.high)
        mask &= (data <= high) if predicate.high_inclusive else (data < high)
    return mask


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------

def bin_numeric(dataset: Dataset, field: str, bin_count: int = DEFAULT_BIN_COUNT) -> list[Range]:
    """Equal-frequency bins over a numeric/temporal field.

    Bins are pairwise disjoint (half-open except the last) and their union
    covers every non-null row. Duplicate quantile edges collapse, so fewer
    than ``bin_count`` ranges may come back; an all-null column yields none.
    """
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    col = dataset.field(field)
    if col.ctype not in CONTINUOUS_TYPES:
        raise NotBinnable(f"column {field!r} has type {col.ctype}")
    values = col.data[~np.isnan(col.data)]
    if values.size == 0:
        return []
    edges = np.quantile(values, np.linspace(0.0, 1.0, bin_count + 1))
    unique_edges: list[float] = []
    for e in edges:
        if not unique_edges or e > unique_edges[-1]:
            unique_edges.append(float(e))
    fmt = (lambda v: epoch_ms_to_iso(v)) if col.ctype == TEMPORAL else (lambda v: v)
    if len(unique_edges) == 1:
        v = unique_edges[0]
        return [range_pred(field, fmt(v), fmt(v))]
    bins = []
    for i in range(len(unique_edges) - 1):
        last = i == len(unique_edges) - 2
        bins.append(
            range_pred(
                field,
                fmt(unique_edges[i]),
                fmt(unique_edges[i + 1]),
                low_inclusive=True,
                high_inclusive=last,
            )
        )
    return bins


__all__ = [
    "CELL_CAP",
    "DEFAULT_BIN_COUNT",
    "NUMERIC",
    "TEMPORAL",
    "BOOLEAN",
    "CATEGORICAL",
    "TEXT",
    "COLUMN_TYPES",
    "CONTINUOUS_TYPES",
    "ENUMERABLE_TYPES",
    "Equals",
    "InSet",
    "Range",
    "Conjunction",
    "AtomicPredicate",
    "Predicate",
    "RowMask",
    "in_set",
    "range_pred",
    "conjunction",
    "predicate_fields",
    "render_predicate",
    "parse_predicate_label",
    "predicate_to_json",
    "predicate_from_json",
    "Column",
    "Dataset",
    "FieldDomain",
    "ingest_csv",
    "build_dataset",
    "field_domain",
    "all_domains",
    "popcount",
    "evaluate_predicate",
    "bin_numeric",
    "epoch_ms_to_iso",
]
