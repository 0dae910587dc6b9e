"""Declarative chart documents and drill execution.

ChartSpec is the engine's single wire format: a Vega-Lite v5 compatible JSON
document holding a named data reference, cumulative filter transforms,
encodings, and selection params. New drill predicates are appended
incrementally (duplicates skipped, same-field ranges intersected, empty
intersections rejected), every generated spec passes structural then semantic
validation, and a failed drill rolls the session back untouched after bounded
corrective re-prompts.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Mapping, Sequence

from .errors import (
    AdapterTimeout,
    AdapterUnavailable,
    ConflictingFilter,
    DrilldownError,
    SchemaMismatch,
    StructuralError,
    UnknownField,
    UnparseableFilterExpression,
    UnparseablePayload,
    UnsupportedFeature,
)
from .intent import IntentBundle, build_intent_prompt
from .llm import LlmAdapter, parse_structured
from . import prompts
from .rules import EnumerationConfig, enumerate_candidates, render_rule
from .tabular import (
    BOOLEAN,
    CATEGORICAL,
    NUMERIC,
    TEMPORAL,
    TEXT,
    Conjunction,
    Dataset,
    Equals,
    InSet,
    Predicate,
    Range,
    conjunction,
    evaluate_predicate,
    in_set,
    popcount,
    predicate_fields,
    predicate_from_json,
    predicate_to_json,
    range_pred,
    render_predicate,
    parse_predicate_label,
)

if TYPE_CHECKING:
    from .service import Session

MARKS = ("bar", "line", "point", "area", "boxplot", "heatmap-rect")
CHANNELS = (
    "x", "y", "color", "size", "shape", "opacity", "row", "column",
    "tooltip", "detail", "theta",
)
VEGA_TYPES = ("quantitative", "nominal", "ordinal", "temporal")
AGGREGATES = ("count", "sum", "mean", "median", "min", "max")

_MARK_TO_VEGA = {"heatmap-rect": "rect"}
_VEGA_TO_MARK = {"rect": "heatmap-rect"}

_CTYPE_TO_VEGA = {
    NUMERIC: "quantitative",
    TEMPORAL: "temporal",
    CATEGORICAL: "nominal",
    BOOLEAN: "nominal",
    TEXT: "nominal",
}
_VEGA_TO_CTYPE = {
    "quantitative": NUMERIC,
    "temporal": TEMPORAL,
    "nominal": CATEGORICAL,
    "ordinal": CATEGORICAL,
}

#: Column types each vega encoding type may legally carry.
_COMPATIBLE_VEGA = {
    NUMERIC: {"quantitative", "ordinal", "nominal"},
    TEMPORAL: {"temporal", "ordinal", "nominal"},
    CATEGORICAL: {"nominal", "ordinal"},
    BOOLEAN: {"nominal", "ordinal"},
    TEXT: {"nominal", "ordinal"},
}

DEFAULT_MAX_RETRIES = 2
BASIC_DIMENSION_LIMIT = 3
CANDIDATE_POOL_SIZE = 12


@dataclass(frozen=True)
class Encoding:
    field: str | None
    vega_type: str
    aggregate: str | None = None


@dataclass(frozen=True)
class SelectionDecl:
    name: str
    kind: str  # "interval" | "point"
    encodings: tuple[str, ...] = ()
    fields: tuple[str, ...] = ()


@dataclass(frozen=True)
class ChartSpec:
    data_ref: str
    mark: str
    encodings: Mapping[str, Encoding]
    transforms: tuple[Predicate, ...] = ()
    selections: tuple[SelectionDecl, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        """Vega-Lite v5 document; the inverse of :func:`parse_spec`."""
        doc: dict[str, Any] = {}
        if "$schema" in self.extra:
            doc["$schema"] = self.extra["$schema"]
        if self.data_ref:
            doc["data"] = {"name": self.data_ref}
        doc["mark"] = _MARK_TO_VEGA.get(self.mark, self.mark)
        if self.encodings:
            enc_doc = {}
            for channel in sorted(
                self.encodings, key=lambda c: (CHANNELS.index(c) if c in CHANNELS else 99, c)
            ):
                enc = self.encodings[channel]
                entry: dict[str, Any] = {}
                if enc.field is not None:
                    entry["field"] = enc.field
                entry["type"] = enc.vega_type
                if enc.aggregate is not None:
                    entry["aggregate"] = enc.aggregate
                enc_doc[channel] = entry
            doc["encoding"] = enc_doc
        if self.transforms:
            doc["transform"] = [{"filter": predicate_to_vega(p)} for p in self.transforms]
        if self.selections:
            doc["params"] = [
                {
                    "name": s.name,
                    "select": {
                        "type": s.kind,
                        **({"encodings": list(s.encodings)} if s.encodings else {}),
                        **({"fields": list(s.fields)} if s.fields else {}),
                    },
                }
                for s in self.selections
            ]
        for key in sorted(self.extra):
            if key != "$schema":
                doc[key] = self.extra[key]
        return doc


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    path: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    stage: str  # "structural" | "semantic"
    issues: tuple[ValidationIssue, ...] = ()

    def describe(self) -> str:
        return "; ".join(f"{i.code} at {i.path}: {i.message}" for i in self.issues)


@dataclass(frozen=True)
class DimensionSuggestion:
    field: str
    filter: Predicate
    label: str
    rationale: str

    def to_json(self) -> dict:
        return {
            "field": self.field,
            "label": self.label,
            "rationale": self.rationale,
            "filter": predicate_to_json(self.filter),
        }


@dataclass(frozen=True)
class DrillResult:
    status: str  # "ok" | "rolled_back" | "failed"
    new_spec: ChartSpec | None
    basic_dimensions: tuple[DimensionSuggestion, ...]
    attempts: int
    error_trace: str | None = None
    node_id: str | None = None

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "new_spec": self.new_spec.to_json() if self.new_spec else None,
            "basic_dimensions": [d.to_json() for d in self.basic_dimensions],
            "attempts": self.attempts,
            "error_trace": self.error_trace,
            "node_id": self.node_id,
        }


# ---------------------------------------------------------------------------
# Vega-Lite filter conversion
# ---------------------------------------------------------------------------

def predicate_to_vega(predicate: Predicate) -> Any:
    if isinstance(predicate, Equals):
        return {"field": predicate.field, "equal": predicate.value}
    if isinstance(predicate, InSet):
        return {"field": predicate.field, "oneOf": list(predicate.values)}
    if isinstance(predicate, Range):
        if predicate.low is None and predicate.high is None:
            return {"field": predicate.field, "valid": True}
        if (
            predicate.low is not None
            and predicate.high is not None
            and predicate.low_inclusive
            and predicate.high_inclusive
        ):
            return {"field": predicate.field, "range": [predicate.low, predicate.high]}
        parts = []
        if predicate.low is not None:
            op = "gte" if predicate.low_inclusive else "gt"
            parts.append({"field": predicate.field, op: predicate.low})
        if predicate.high is not None:
            op = "lte" if predicate.high_inclusive else "lt"
            parts.append({"field": predicate.field, op: predicate.high})
        return parts[0] if len(parts) == 1 else {"and": parts}
    if isinstance(predicate, Conjunction):
        return {"and": [predicate_to_vega(m) for m in predicate.members]}
    raise TypeError(f"not a predicate: {predicate!r}")


_EXPR_RE = re.compile(
    r"^\s*datum(?:\.([A-Za-z_]\w*)|\[['\"]([^'\"]+)['\"]\])\s*"
    r"(<=|>=|==|<|>)\s*(.+?)\s*$"
)


def _parse_expression_atom(expr: str) -> Predicate:
    m = _EXPR_RE.match(expr)
    if not m:
        raise UnparseableFilterExpression(f"cannot parse filter expression {expr!r}")
    field_name = m.group(1) or m.group(2)
    op, raw_value = m.group(3), m.group(4)
    if raw_value.startswith(("'", '"')) and raw_value.endswith(raw_value[0]):
        value: Any = raw_value[1:-1]
    elif raw_value in ("true", "false"):
        value = raw_value == "true"
    else:
        try:
            value = float(raw_value)
        except ValueError:
            raise UnparseableFilterExpression(
                f"cannot parse value {raw_value!r} in {expr!r}"
            ) from None
    if op == "==":
        return Equals(field_name, value)
    if op == ">=":
        return range_pred(field_name, low=value)
    if op == ">":
        return range_pred(field_name, low=value, low_inclusive=False)
    if op == "<=":
        return range_pred(field_name, high=value)
    return range_pred(field_name, high=value, high_inclusive=False)


def parse_filter_expression(expr: str) -> Predicate:
    """Parse a ``datum.<field> <op> <value>`` expression, with && conjunction."""
    atoms = [a for a in expr.split("&&")]
    predicates = [_parse_expression_atom(a) for a in atoms]
    return conjunction(predicates)


def _one_sided(p: Predicate) -> bool:
    return isinstance(p, Range) and (p.low is None) != (p.high is None)


def vega_to_predicate(obj: Any) -> Predicate:
    if isinstance(obj, str):
        return parse_filter_expression(obj)
    if not isinstance(obj, Mapping):
        raise UnparseableFilterExpression(f"unsupported filter {obj!r}")
    if "and" in obj:
        members = [vega_to_predicate(m) for m in obj["and"]]
        fields = {m.field for m in members if isinstance(m, Range)}
        if len(fields) == 1 and all(_one_sided(m) for m in members) and len(members) <= 2:
            merged = members[0]
            for other in members[1:]:
                merged = _intersect_ranges(merged, other)
            return merged
        return conjunction(members)
    field_name = obj.get("field")
    if not isinstance(field_name, str):
        raise UnparseableFilterExpression(f"filter without field: {obj!r}")
    if "equal" in obj:
        return Equals(field_name, obj["equal"])
    if "oneOf" in obj:
        return in_set(field_name, obj["oneOf"])
    if "range" in obj:
        low, high = obj["range"]
        return range_pred(field_name, low, high)
    if "valid" in obj:
        return range_pred(field_name)
    low = obj.get("gte", obj.get("gt"))
    high = obj.get("lte", obj.get("lt"))
    if low is None and high is None:
        raise UnparseableFilterExpression(f"filter without operator: {obj!r}")
    try:
        return range_pred(
            field_name,
            low,
            high,
            low_inclusive="gt" not in obj,
            high_inclusive="lt" not in obj,
        )
    except ValueError as exc:
        raise UnparseableFilterExpression(str(exc)) from exc


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = ("data", "mark", "encoding", "transform", "params")


def parse_spec(document: str | Mapping) -> ChartSpec:
    """Parse a Vega-Lite v5 document into a ChartSpec.

    Unknown-but-valid top-level fields are preserved verbatim for
    round-tripping; non-filter transforms are ignored; inline data values and
    marks/channels outside the supported grammar subset are rejected.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except ValueError as exc:
            raise StructuralError(f"malformed JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise StructuralError("chart document must be a JSON object")

    data_ref = ""
    data = document.get("data")
    if data is not None:
        if not isinstance(data, Mapping):
            raise StructuralError("'data' must be an object")
        if "values" in data or "url" in data:
            raise UnsupportedFeature("only named data references are supported")
        name = data.get("name", "")
        if not isinstance(name, str):
            raise StructuralError("'data.name' must be a string")
        data_ref = name

    if "mark" not in document:
        raise StructuralError("'mark' is required")
    raw_mark = document["mark"]
    if isinstance(raw_mark, Mapping):
        raw_mark = raw_mark.get("type")
    if not isinstance(raw_mark, str):
        raise StructuralError("'mark' must be a string or typed object")
    mark = _VEGA_TO_MARK.get(raw_mark, raw_mark)
    if mark not in MARKS:
        raise UnsupportedFeature(f"mark {raw_mark!r} is outside the supported grammar")

    encodings: dict[str, Encoding] = {}
    enc_doc = document.get("encoding", {})
    if not isinstance(enc_doc, Mapping):
        raise StructuralError("'encoding' must be an object")
    for channel, entry in enc_doc.items():
        if channel not in CHANNELS:
            raise UnsupportedFeature(f"channel {channel!r} is outside the supported grammar")
        if not isinstance(entry, Mapping):
            raise StructuralError(f"encoding.{channel} must be an object")
        enc_field = entry.get("field")
        if enc_field is not None and not isinstance(enc_field, str):
            raise StructuralError(f"encoding.{channel}.field must be a string")
        vega_type = entry.get("type")
        if vega_type is None and entry.get("aggregate") == "count":
            vega_type = "quantitative"
        if not isinstance(vega_type, str):
            raise StructuralError(f"encoding.{channel}.type is required")
        aggregate = entry.get("aggregate")
        if aggregate is not None and not isinstance(aggregate, str):
            raise StructuralError(f"encoding.{channel}.aggregate must be a string")
        encodings[channel] = Encoding(enc_field, vega_type, aggregate)

    transforms: list[Predicate] = []
    for i, entry in enumerate(document.get("transform", []) or []):
        if not isinstance(entry, Mapping):
            raise StructuralError(f"transform[{i}] must be an object")
        if "filter" in entry:
            transforms.append(vega_to_predicate(entry["filter"]))
        # non-filter transforms are ignored

    selections: list[SelectionDecl] = []
    for i, entry in enumerate(document.get("params", []) or []):
        if not isinstance(entry, Mapping) or "name" not in entry:
            raise StructuralError(f"params[{i}] must be a named object")
        select = entry.get("select")
        if select is None:
            raise UnsupportedFeature(f"params[{i}]: variable params are not supported")
        if isinstance(select, str):
            select = {"type": select}
        kind = select.get("type")
        if kind not in ("interval", "point"):
            raise UnsupportedFeature(f"params[{i}]: selection type {kind!r} not supported")
        selections.append(
            SelectionDecl(
                name=str(entry["name"]),
                kind=kind,
                encodings=tuple(select.get("encodings", ())),
                fields=tuple(select.get("fields", ())),
            )
        )

    extra = {
        k: v for k, v in document.items() if k not in _TOP_LEVEL_KEYS
    }
    return ChartSpec(
        data_ref=data_ref,
        mark=mark,
        encodings=encodings,
        transforms=tuple(transforms),
        selections=tuple(selections),
        extra=extra,
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_structure(spec: ChartSpec) -> ValidationReport:
    issues: list[ValidationIssue] = []
    if spec.mark not in MARKS:
        issues.append(ValidationIssue("MARK_INVALID", f"mark {spec.mark!r}", "mark"))
    for channel, enc in spec.encodings.items():
        path = f"encoding.{channel}"
        if channel not in CHANNELS:
            issues.append(ValidationIssue("CHANNEL_INVALID", f"channel {channel!r}", path))
        if enc.vega_type not in VEGA_TYPES:
            issues.append(ValidationIssue("TYPE_INVALID", f"type {enc.vega_type!r}", path))
        if enc.aggregate is not None and enc.aggregate not in AGGREGATES:
            issues.append(
                ValidationIssue("AGGREGATE_INVALID", f"aggregate {enc.aggregate!r}", path)
            )
        if enc.field is None and enc.aggregate != "count":
            issues.append(
                ValidationIssue("FIELD_MISSING", "field required unless aggregate=count", path)
            )
        elif enc.field == "":
            issues.append(ValidationIssue("FIELD_EMPTY", "field name is empty", path))
    names = [s.name for s in spec.selections]
    for i, sel in enumerate(spec.selections):
        path = f"params[{i}]"
        if sel.kind not in ("interval", "point"):
            issues.append(ValidationIssue("SELECTION_INVALID", f"type {sel.kind!r}", path))
        if not sel.name:
            issues.append(ValidationIssue("SELECTION_NAME", "empty selection name", path))
    if len(set(names)) != len(names):
        issues.append(ValidationIssue("SELECTION_NAME", "duplicate selection names", "params"))
    for i, p in enumerate(spec.transforms):
        if p in spec.transforms[:i]:
            issues.append(
                ValidationIssue(
                    "DUPLICATE_TRANSFORM", render_predicate(p), f"transform[{i}]"
                )
            )
    return ValidationReport(ok=not issues, stage="structural", issues=tuple(issues))


def validate(spec: ChartSpec, dataset: Dataset) -> ValidationReport:
    """Structural grammar checks, then semantic binding against the dataset."""
    structural = validate_structure(spec)
    if not structural.ok:
        return structural
    issues: list[ValidationIssue] = []
    if spec.data_ref and spec.data_ref != dataset.name:
        issues.append(
            ValidationIssue(
                "DATA_REF_MISMATCH",
                f"spec references {spec.data_ref!r}, bound dataset is {dataset.name!r}",
                "data.name",
            )
        )
    for channel, enc in spec.encodings.items():
        path = f"encoding.{channel}"
        if enc.field is None:
            continue
        if not dataset.has_field(enc.field):
            issues.append(
                ValidationIssue("FIELD_NOT_FOUND", f"field {enc.field!r}", path)
            )
            continue
        ctype = dataset.field(enc.field).ctype
        if enc.vega_type not in _COMPATIBLE_VEGA[ctype]:
            issues.append(
                ValidationIssue(
                    "TYPE_INCONSISTENT",
                    f"{ctype} field {enc.field!r} encoded as {enc.vega_type}",
                    path,
                )
            )
        if enc.aggregate in ("sum", "mean", "median") and ctype != NUMERIC:
            issues.append(
                ValidationIssue(
                    "TYPE_INCONSISTENT",
                    f"aggregate {enc.aggregate!r} needs a numeric field, got {ctype}",
                    path,
                )
            )
        elif enc.aggregate in ("min", "max") and ctype not in (NUMERIC, TEMPORAL):
            issues.append(
                ValidationIssue(
                    "TYPE_INCONSISTENT",
                    f"aggregate {enc.aggregate!r} needs an orderable field, got {ctype}",
                    path,
                )
            )
    for i, p in enumerate(spec.transforms):
        path = f"transform[{i}]"
        missing = [f for f in predicate_fields(p) if not dataset.has_field(f)]
        if missing:
            issues.append(
                ValidationIssue("FIELD_NOT_FOUND", f"field(s) {missing}", path)
            )
            continue
        try:
            evaluate_predicate(dataset, p)
        except DrilldownError as exc:
            issues.append(ValidationIssue("TYPE_INCONSISTENT", str(exc), path))
    for i, sel in enumerate(spec.selections):
        for f in sel.fields:
            if not dataset.has_field(f):
                issues.append(
                    ValidationIssue("FIELD_NOT_FOUND", f"field {f!r}", f"params[{i}]")
                )
    return ValidationReport(ok=not issues, stage="semantic", issues=tuple(issues))


# ---------------------------------------------------------------------------
# Incremental filter appending
# ---------------------------------------------------------------------------

def _bound_sort_key(value: Any) -> float:
    from .tabular import _bound_key

    return _bound_key(value)


def _intersect_ranges(a: Range, b: Range) -> Range:
    """Tightest range implied by both; raises ConflictingFilter when empty."""
    if a.field != b.field:
        raise ValueError("cannot intersect ranges on different fields")
    low, low_inc = a.low, a.low_inclusive
    if a.low is None or (
        b.low is not None and _bound_sort_key(b.low) > _bound_sort_key(a.low)
    ):
        low, low_inc = b.low, b.low_inclusive
    elif b.low is not None and _bound_sort_key(b.low) == _bound_sort_key(a.low):
        low_inc = a.low_inclusive and b.low_inclusive
    high, high_inc = a.high, a.high_inclusive
    if a.high is None or (
        b.high is not None and _bound_sort_key(b.high) < _bound_sort_key(a.high)
    ):
        high, high_inc = b.high, b.high_inclusive
    elif b.high is not None and _bound_sort_key(b.high) == _bound_sort_key(a.high):
        high_inc = a.high_inclusive and b.high_inclusive
    if low is not None and high is not None:
        lo_key, hi_key = _bound_sort_key(low), _bound_sort_key(high)
        if lo_key > hi_key or (lo_key == hi_key and not (low_inc and high_inc)):
            raise ConflictingFilter(
                f"empty intersection on {a.field!r}: "
                f"{render_predicate(a)} with {render_predicate(b)}"
            )
    return Range(a.field, low, high, low_inc if low is not None else False,
                 high_inc if high is not None else False)


def append_filters(spec: ChartSpec, new_predicates: Sequence[Predicate]) -> ChartSpec:
    """Append predicates incrementally, avoiding conflicts.

    Conjunctions are decomposed into their atomic members. A predicate
    structurally equal to an existing transform is skipped; a range on a field
    already range-filtered is intersected into a single tightened range; an
    empty intersection raises ConflictingFilter.
    """
    transforms = list(spec.transforms)
    queue: list[Predicate] = []
    for p in new_predicates:
        if isinstance(p, Conjunction):
            queue.extend(p.members)
        else:
            queue.append(p)
    for p in queue:
        if p in transforms:
            continue
        if isinstance(p, Range):
            merged = False
            for i, existing in enumerate(transforms):
                if isinstance(existing, Range) and existing.field == p.field:
                    transforms[i] = _intersect_ranges(existing, p)
                    merged = True
                    break
            if merged:
                continue
        transforms.append(p)
    return replace(spec, transforms=tuple(transforms))


# ---------------------------------------------------------------------------
# Chart-type heuristics
# ---------------------------------------------------------------------------

def vega_type_for(ctype: str) -> str:
    """Default grammar encoding type for a column type."""
    return _CTYPE_TO_VEGA[ctype]


def select_chart_heuristic(task_kind: str, x_type: str, y_type: str) -> str:
    """Deterministic task-semantic mark lookup; unknown combinations fall back to bar."""
    return prompts.HEURISTIC_RULES.get((task_kind, x_type, y_type), prompts.FALLBACK_MARK)


def mark_for_vega_types(task_kind: str, spec: ChartSpec) -> str | None:
    """Heuristic mark for a spec's x/y encodings, or None when either is absent."""
    x = spec.encodings.get("x")
    y = spec.encodings.get("y")
    if x is None or y is None:
        return None
    return select_chart_heuristic(
        task_kind,
        _VEGA_TO_CTYPE.get(x.vega_type, CATEGORICAL),
        _VEGA_TO_CTYPE.get(y.vega_type, CATEGORICAL),
    )


# ---------------------------------------------------------------------------
# Basic drill dimensions
# ---------------------------------------------------------------------------

def candidate_pool(
    dataset: Dataset, spec: ChartSpec, limit: int = CANDIDATE_POOL_SIZE
) -> list[dict]:
    """Top-coverage single-filter candidates over fields not yet on the path."""
    path_fields = set()
    for p in spec.transforms:
        path_fields.update(predicate_fields(p))
    config = EnumerationConfig(k=1, max_candidates=max(limit, 1))
    pool = []
    for rule in enumerate_candidates(dataset, path_fields, config):
        pool.append(
            {
                "label": render_rule(rule),
                "field": rule.fields[0],
                "filter": predicate_to_json(rule.filters[0]),
            }
        )
    return pool


def filter_suggestions(
    raw_dimensions: Sequence[Mapping[str, Any]],
    spec: ChartSpec,
    dataset: Dataset,
    limit: int = BASIC_DIMENSION_LIMIT,
) -> list[DimensionSuggestion]:
    """Engine-side post-filter over adapter-ranked dimension proposals.

    Rejects proposals whose filter is logically implied by the spec's current
    transforms (redundancy minimization, checked on row sets) or would leave
    the view empty; keeps at most ``limit`` survivors in proposal order.
    """
    current = evaluate_predicate(dataset, Conjunction(spec.transforms))
    out: list[DimensionSuggestion] = []
    for entry in raw_dimensions:
        if not isinstance(entry, Mapping):
            continue
        try:
            raw_filter = entry.get("filter")
            if isinstance(raw_filter, Mapping):
                pred = predicate_from_json(raw_filter)
            else:
                pred = parse_predicate_label(str(entry.get("label", "")))
            if pred is None:
                continue
            mask = evaluate_predicate(dataset, pred)
        except DrilldownError:
            continue
        if not bool((current & ~mask).any()):
            continue  # implied by current filters
        if popcount(current & mask) == 0:
            continue  # would empty the view
        field_name = entry.get("field") or predicate_fields(pred)[0]
        label = entry.get("label") or render_predicate(pred)
        rationale = entry.get("rationale") or "ranked by intent alignment"
        out.append(DimensionSuggestion(str(field_name), pred, str(label), str(rationale)))
        if len(out) >= limit:
            break
    return out


def basic_drill_dimensions(
    spec: ChartSpec,
    bundle: IntentBundle,
    dataset: Dataset,
    adapter: LlmAdapter,
    config=None,
) -> list[DimensionSuggestion]:
    """Adapter-ranked drill dimensions from the same invocation as spec generation.

    Unparseable adapter output degrades to the top-coverage enumeration
    candidates; the deterministic inclusion post-filter always runs.
    """
    from .llm import ProviderConfig

    config = config or ProviderConfig()
    pool = candidate_pool(dataset, spec)
    prompt = build_intent_prompt(bundle, spec, candidate_pool=pool)
    result = adapter.complete(config, prompt)
    raw = None
    try:
        payload = result.parsed if result.parsed is not None else parse_structured(
            result, "chart_spec"
        )
        raw = payload.get("basic_dimensions")
    except (UnparseablePayload, SchemaMismatch):
        raw = None
    if not isinstance(raw, list):
        raw = pool
    return filter_suggestions(raw, spec, dataset)


# ---------------------------------------------------------------------------
# Drill execution
# ---------------------------------------------------------------------------

def apply_drill(session: "Session", bundle: IntentBundle, adapter: LlmAdapter) -> DrillResult:
    """Run one drill: prompt, generate, validate, commit or roll back.

    On validation failure the error is fed back as a corrective prompt, up to
    ``session.max_retries`` regenerations. Exhausting retries leaves the
    session untouched and reports rolled_back. A transport failure on the very
    first call propagates as AdapterUnavailable/Timeout; mid-loop transport
    failures report status "failed" (session equally untouched).
    """
    spec = session.active_spec
    dataset = session.active_data
    pool = candidate_pool(dataset, spec)
    prompt = build_intent_prompt(
        bundle, spec, candidate_pool=pool, corrective=session.pending_corrective
    )
    max_attempts = session.max_retries + 1
    errors_seen: list[str] = []
    for attempt in range(1, max_attempts + 1):
        try:
            result = adapter.complete(session.provider, prompt)
        except (AdapterUnavailable, AdapterTimeout):
            if attempt == 1:
                raise
            return DrillResult(
                "failed", None, (), attempt, "; ".join(errors_seen) or "adapter failure"
            )
        error: str | None = None
        try:
            payload = result.parsed if result.parsed is not None else parse_structured(
                result, "chart_spec"
            )
            new_spec = parse_spec(payload["spec"])
            if not new_spec.data_ref:
                new_spec = replace(new_spec, data_ref=dataset.name)
            report = validate(new_spec, dataset)
            if not report.ok:
                error = report.describe()
        except (
            UnparseablePayload,
            SchemaMismatch,
            StructuralError,
            UnsupportedFeature,
            UnparseableFilterExpression,
            ConflictingFilter,
            UnknownField,
        ) as exc:
            error = f"{exc.code}: {exc}"
        if error is None:
            labels = tuple(render_predicate(p) for p in new_spec.transforms)
            node_id = session.tree.add_child(
                session.tree.active_id,
                new_spec,
                applied_filter_labels=labels,
                created_at=session.clock(),
            )
            raw_dims = payload.get("basic_dimensions")
            if not isinstance(raw_dims, list):
                raw_dims = pool
            dims = filter_suggestions(raw_dims, new_spec, dataset)
            session.pending_corrective = None
            return DrillResult("ok", new_spec, tuple(dims), attempt, None, node_id)
        errors_seen.append(error)
        prompt = build_intent_prompt(bundle, spec, candidate_pool=pool, corrective=error)
    return DrillResult(
        "rolled_back", None, (), max_attempts, "\n".join(errors_seen)
    )


__all__ = [
    "MARKS",
    "CHANNELS",
    "VEGA_TYPES",
    "AGGREGATES",
    "DEFAULT_MAX_RETRIES",
    "Encoding",
    "SelectionDecl",
    "ChartSpec",
    "ValidationIssue",
    "ValidationReport",
    "DimensionSuggestion",
    "DrillResult",
    "predicate_to_vega",
    "vega_to_predicate",
    "parse_filter_expression",
    "parse_spec",
    "validate_structure",
    "validate",
    "append_filters",
    "select_chart_heuristic",
    "mark_for_vega_types",
    "candidate_pool",
    "filter_suggestions",
    "basic_drill_dimensions",
    "apply_drill",
]
