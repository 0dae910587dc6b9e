"""Insight generation and ranking.

The adapter analyzes a compact data summary of the current filtered view and
returns scored insight candidates in three categories; the engine (never the
model) computes binary intent-alignment flags and ranks deterministically by
the lexicographic key (alignment, significance), realized as
``s_final = s_vis + lambda * i_align`` with lambda one above the batch's
maximum significance.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping, Sequence

import numpy as np

from .chartspec import ChartSpec
from .errors import (
    DrilldownError,
    EmptyCandidates,
    SchemaMismatch,
    UnparseableInsightPayload,
    UnparseablePayload,
)
from .intent import IntentBundle
from .llm import (
    LlmAdapter,
    PromptDocument,
    ProviderConfig,
    parse_structured,
    relevance_coefficients,
)
from . import prompts
from .rules import (
    DrillRule,
    EnumerationConfig,
    RelevanceMap,
    ScoredCandidate,
    enumerate_candidates,
    greedy_top_k,
)
from .tabular import (
    CONTINUOUS_TYPES,
    ENUMERABLE_TYPES,
    Conjunction,
    Dataset,
    Equals,
    Predicate,
    Range,
    evaluate_predicate,
    popcount,
    predicate_fields,
    _bound_key,
)

if TYPE_CHECKING:
    from .service import Session

CATEGORIES = ("data_feature", "domain_specific", "drill_down")

S_VIS_MIN, S_VIS_MAX = 0, 10

#: Insights shown per category in the panel payload.
PANEL_TOP_M = 3

#: High-level recommended drill dimensions per request.
RECOMMENDED_K = 3


@dataclass(frozen=True)
class InsightCandidate:
    category: str
    title: str
    observations: tuple[str, ...]
    involved_fields: tuple[str, ...]
    value_ranges: Mapping[str, tuple] | None
    s_vis: int
    domain_label: str | None = None

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown insight category {self.category!r}")
        if not S_VIS_MIN <= self.s_vis <= S_VIS_MAX:
            raise ValueError(f"s_vis {self.s_vis} outside [{S_VIS_MIN}, {S_VIS_MAX}]")
        if self.category in ("data_feature", "drill_down") and not self.involved_fields:
            raise ValueError(f"{self.category} insights need involved_fields")


@dataclass(frozen=True)
class RankedInsight:
    candidate: InsightCandidate
    i_align: int
    s_final: float

    def to_json(self) -> dict:
        doc = {
            "category": self.candidate.category,
            "title": self.candidate.title,
            "observations": list(self.candidate.observations),
            "involved_fields": list(self.candidate.involved_fields),
            "s_vis": self.candidate.s_vis,
            "i_align": self.i_align,
            "s_final": self.s_final,
        }
        if self.candidate.domain_label:
            doc["domain_label"] = self.candidate.domain_label
        return doc


@dataclass(frozen=True)
class InsightPanelPayload:
    sections: Mapping[str, tuple[RankedInsight, ...]]
    errors: Mapping[str, str]

    def to_json(self) -> dict:
        return {
            "sections": {
                category: [r.to_json() for r in ranked]
                for category, ranked in self.sections.items()
            },
            "errors": dict(self.errors),
        }


# ---------------------------------------------------------------------------
# Visualization analysis
# ---------------------------------------------------------------------------

def view_summary(spec: ChartSpec, dataset: Dataset) -> dict:
    """Compact stats of the spec's filtered view, per encoded field."""
    mask = evaluate_predicate(dataset, Conjunction(spec.transforms))
    fields = []
    for enc in spec.encodings.values():
        if enc.field is not None and enc.field not in fields and dataset.has_field(enc.field):
            fields.append(enc.field)
    stats: dict[str, Any] = {}
    for name in fields:
        col = dataset.field(name)
        if col.ctype in CONTINUOUS_TYPES:
            values = col.data[mask & ~np.isnan(col.data)]
            stats[name] = {
                "type": col.ctype,
                "min": float(values.min()) if values.size else None,
                "max": float(values.max()) if values.size else None,
                "mean": float(values.mean()) if values.size else None,
            }
        else:
            counts: dict[str, int] = {}
            for value, keep, is_null in zip(col.data, mask, col.nulls):
                if keep and not is_null:
                    key = str(value)
                    counts[key] = counts.get(key, 0) + 1
            top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
            stats[name] = {"type": col.ctype, "top_values": top}
    return {
        "dataset": dataset.name,
        "columns": list(dataset.fields),
        "row_count": popcount(mask),
        "filters": [p for p in map(_render_safe, spec.transforms)],
        "fields": stats,
    }


def _render_safe(p: Predicate) -> str:
    from .tabular import render_predicate

    return render_predicate(p)


def _fallback_fields(spec: ChartSpec, dataset: Dataset) -> tuple[str, ...]:
    for p in spec.transforms:
        fields = predicate_fields(p)
        if fields:
            return fields
    encoded = tuple(
        e.field for e in spec.encodings.values() if e.field is not None
    )
    if encoded:
        return encoded
    return dataset.fields[:1]


def build_insight_prompt(spec: ChartSpec, dataset: Dataset) -> PromptDocument:
    summary = view_summary(spec, dataset)
    user_text = (
        "## View summary\n"
        + json.dumps(summary, sort_keys=True)
        + "\n\n## Task\nReport scored insights for the three categories."
    )
    return PromptDocument(
        system_text=prompts.INSIGHT_SYSTEM,
        user_text=user_text,
        expected_schema="insight_batch",
        context={"summary": summary, "spec": spec.to_json()},
    )


def _clamp_s_vis(raw: Any) -> int:
    try:
        value = int(round(float(raw)))
    except (TypeError, ValueError):
        value = 0
    return max(S_VIS_MIN, min(S_VIS_MAX, value))


def _candidates_from_payload(
    payload: Sequence[Mapping], spec: ChartSpec, dataset: Dataset
) -> list[InsightCandidate]:
    fallback = _fallback_fields(spec, dataset)
    out = []
    for entry in payload:
        category = entry.get("category")
        if category not in CATEGORIES:
            category = "data_feature"
        involved = tuple(str(f) for f in entry.get("involved_fields", []) if f)
        if not involved:
            involved = fallback
        ranges = entry.get("value_ranges")
        value_ranges = None
        if isinstance(ranges, Mapping):
            parsed = {}
            for f, pair in ranges.items():
                if isinstance(pair, (list, tuple)) and len(pair) == 2:
                    parsed[str(f)] = (pair[0], pair[1])
            value_ranges = parsed or None
        out.append(
            InsightCandidate(
                category=category,
                title=str(entry["title"]),
                observations=tuple(str(o) for o in entry.get("observations", [])),
                involved_fields=involved,
                value_ranges=value_ranges,
                s_vis=_clamp_s_vis(entry.get("s_vis", 0)),
                domain_label=entry.get("domain_label") or None,
            )
        )
    return out


def analyze_visualization(
    spec: ChartSpec,
    dataset: Dataset,
    adapter: LlmAdapter,
    config: ProviderConfig | None = None,
) -> list[InsightCandidate]:
    """LLM analysis of the current view's data summary into scored candidates.

    An empty filtered view short-circuits to a single zero-significance
    candidate without an adapter call. One corrective re-prompt is attempted
    on unparseable output before raising UnparseableInsightPayload.
    """
    config = config or ProviderConfig()
    mask = evaluate_predicate(dataset, Conjunction(spec.transforms))
    if popcount(mask) == 0:
        return [
            InsightCandidate(
                category="data_feature",
                title="Empty selection",
                observations=("The current filters match no rows.",),
                involved_fields=_fallback_fields(spec, dataset),
                value_ranges=None,
                s_vis=0,
            )
        ]
    prompt = build_insight_prompt(spec, dataset)
    last_error: Exception | None = None
    for attempt in (1, 2):
        result = adapter.complete(config, prompt)
        try:
            payload = result.parsed if result.parsed is not None else parse_structured(
                result, "insight_batch"
            )
            return _candidates_from_payload(payload, spec, dataset)
        except (UnparseablePayload, SchemaMismatch) as exc:
            last_error = exc
            prompt = PromptDocument(
                system_text=prompt.system_text,
                user_text=prompts.CORRECTIVE_PREFIX.format(error=exc) + prompt.user_text,
                expected_schema="insight_batch",
                context=prompt.context,
            )
    raise UnparseableInsightPayload(f"insight reply unusable after retry: {last_error}")


# ---------------------------------------------------------------------------
# Alignment and ranking
# ---------------------------------------------------------------------------

def _bundle_predicates(bundle: IntentBundle) -> list[Predicate]:
    return list(bundle.base_filters) + [s.predicate for s in bundle.interactions]


def _flatten(predicates: Sequence[Predicate]) -> list[Predicate]:
    flat: list[Predicate] = []
    for p in predicates:
        if isinstance(p, Conjunction):
            flat.extend(_flatten(p.members))
        else:
            flat.append(p)
    return flat


def _ranges_intersect(a: tuple, b: tuple) -> bool:
    a_lo = _bound_key(a[0]) if a[0] is not None else float("-inf")
    a_hi = _bound_key(a[1]) if a[1] is not None else float("inf")
    b_lo = _bound_key(b[0]) if b[0] is not None else float("-inf")
    b_hi = _bound_key(b[1]) if b[1] is not None else float("inf")
    return a_lo <= b_hi and b_lo <= a_hi


def alignment_flag(candidate: InsightCandidate, bundle: IntentBundle | None) -> int:
    """Binary intent-alignment indicator; rule-based, never calls the adapter.

    Per involved field: when both the candidate and the bundle carry a value
    range for it, only an intersecting range aligns (presence alone does not);
    otherwise a field aligns by appearing in a bundle predicate or as an exact
    case-insensitive token of the instruction text.
    """
    if bundle is None:
        return 0
    atoms = _flatten(_bundle_predicates(bundle))
    bundle_fields = {a.field for a in atoms}
    bundle_ranges: dict[str, list[tuple]] = {}
    for atom in atoms:
        if isinstance(atom, Range):
            bundle_ranges.setdefault(atom.field, []).append((atom.low, atom.high))
        elif isinstance(atom, Equals) and isinstance(atom.value, (int, float)) and not isinstance(atom.value, bool):
            bundle_ranges.setdefault(atom.field, []).append((atom.value, atom.value))
    instruction_tokens = (
        set(re.findall(r"[a-z0-9_]+", bundle.instruction.lower()))
        if bundle.instruction
        else set()
    )
    for field_name in candidate.involved_fields:
        cand_range = (candidate.value_ranges or {}).get(field_name)
        field_ranges = bundle_ranges.get(field_name)
        if cand_range is not None and field_ranges:
            if any(_ranges_intersect(cand_range, r) for r in field_ranges):
                return 1
            continue  # disjoint ranges: same-field presence is not enough
        if field_name in bundle_fields or field_name.lower() in instruction_tokens:
            return 1
    return 0


def rank_insights(
    candidates: Sequence[InsightCandidate], bundle: IntentBundle | None
) -> list[RankedInsight]:
    """Deterministic final ranking by s_final = s_vis + lambda * i_align.

    lambda is the batch's maximum s_vis plus one, so the ordering equals the
    descending lexicographic key (i_align, s_vis). Ties break by category
    order then title.
    """
    if not candidates:
        raise EmptyCandidates("no insight candidates to rank")
    lam = max(c.s_vis for c in candidates) + 1
    ranked = [
        RankedInsight(c, alignment_flag(c, bundle), c.s_vis + lam * alignment_flag(c, bundle))
        for c in candidates
    ]
    ranked.sort(
        key=lambda r: (
            -r.s_final,
            CATEGORIES.index(r.candidate.category),
            r.candidate.title,
        )
    )
    return ranked


def panel_sections(
    ranked: Sequence[RankedInsight], top_m: int = PANEL_TOP_M
) -> dict[str, tuple[RankedInsight, ...]]:
    sections: dict[str, list[RankedInsight]] = {c: [] for c in CATEGORIES}
    for r in ranked:
        bucket = sections[r.candidate.category]
        if len(bucket) < top_m:
            bucket.append(r)
    return {c: tuple(v) for c, v in sections.items()}


# ---------------------------------------------------------------------------
# Combined generation
# ---------------------------------------------------------------------------

def recommend_dimensions(
    spec: ChartSpec,
    dataset: Dataset,
    bundle: IntentBundle | None,
    adapter: LlmAdapter,
    config: ProviderConfig,
    k: int = RECOMMENDED_K,
) -> list[ScoredCandidate]:
    """Greedy top-k drill recommendations with LLM-derived relevance."""
    fields = [c.name for c in dataset.columns if c.ctype in ENUMERABLE_TYPES]
    if not fields:
        return []
    relevance = RelevanceMap(relevance_coefficients(fields, bundle, adapter, config))
    path_fields: set[str] = set()
    for p in spec.transforms:
        path_fields.update(predicate_fields(p))
    candidates = enumerate_candidates(dataset, path_fields, EnumerationConfig(k=k))
    if not candidates:
        return []
    ruleset = ruleset_from_transforms(spec.transforms)
    return greedy_top_k(dataset, candidates, ruleset, relevance, k)


def ruleset_from_transforms(transforms: Sequence[Predicate]) -> list[DrillRule]:
    """The view's base filters as the initial rule set, one rule per atom."""
    return [DrillRule((atom,)) for atom in _flatten(transforms)]


def generate_insights(
    session: "Session", adapter: LlmAdapter
) -> tuple[InsightPanelPayload, list[ScoredCandidate]]:
    """Concurrently produce the insight panel and the high-level drill dimensions.

    The two tasks run independently; if one fails its error is reported as a
    per-part marker while the other's result still comes back.
    """
    spec = session.active_spec
    dataset = session.active_data
    bundle = session.bundle_or_none()
    config = session.provider

    def insights_task() -> dict[str, tuple[RankedInsight, ...]]:
        candidates = analyze_visualization(spec, dataset, adapter, config)
        ranked = rank_insights(candidates, bundle)
        return panel_sections(ranked)

    def recommend_task() -> list[ScoredCandidate]:
        return recommend_dimensions(spec, dataset, bundle, adapter, config)

    errors: dict[str, str] = {}
    with ThreadPoolExecutor(max_workers=2) as pool:
        insights_future = pool.submit(insights_task)
        recommend_future = pool.submit(recommend_task)
        try:
            sections = insights_future.result()
        except DrilldownError as exc:
            errors["insights"] = f"{exc.code}: {exc}"
            sections = {c: () for c in CATEGORIES}
        try:
            dimensions = recommend_future.result()
        except DrilldownError as exc:
            errors["recommendation"] = f"{exc.code}: {exc}"
            dimensions = []
    return InsightPanelPayload(sections=sections, errors=errors), dimensions


__all__ = [
    "CATEGORIES",
    "PANEL_TOP_M",
    "RECOMMENDED_K",
    "InsightCandidate",
    "RankedInsight",
    "InsightPanelPayload",
    "view_summary",
    "build_insight_prompt",
    "analyze_visualization",
    "alignment_flag",
    "rank_insights",
    "panel_sections",
    "recommend_dimensions",
    "ruleset_from_transforms",
    "generate_insights",
]
