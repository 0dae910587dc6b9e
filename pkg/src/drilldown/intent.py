"""User-intent capture and fusion.

Three signals feed drill-down generation: the chart's own filter transforms
(explicit settings), semantic interaction events (implicit cues), and the
analyst's instruction text. Interactions are logged in a semantic schema with
data-space predicates, debounced at 500 ms, and fused most-recent-first with
repeat counts standing in for frequency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Any, Mapping, Sequence

from .errors import (
    EmptyIntent,
    OutOfOrderTimestamp,
    UnmappableGesture,
)
from .llm import PromptDocument
from . import prompts
from .tabular import (
    Conjunction,
    Equals,
    Predicate,
    conjunction,
    predicate_fields,
    predicate_from_json,
    predicate_to_json,
    range_pred,
    render_predicate,
)

if TYPE_CHECKING:
    from .chartspec import ChartSpec

#: Interactions shorter than this are noise and are never recorded.
DEBOUNCE_MS = 500

ACTION_TYPES = ("brush", "click_select", "hover", "pan_zoom", "filter_widget")

#: Fixed action-to-intent vocabulary injected into generation prompts.
ACTION_INTENT_MAP = {
    "filter_widget": "constrain",
    "brush": "select-range",
    "hover": "inspect",
    "click_select": "focus",
    "pan_zoom": "navigate",
}

#: Significant digits used when normalizing range bounds for deduplication,
#: so repeated brushes with sub-pixel jitter count as the same action.
_DEDUP_SIG_DIGITS = 4


@dataclass(frozen=True)
class InteractionEvent:
    action_type: str
    target_fields: tuple[str, ...]
    predicate: Predicate
    value_range: Mapping[str, tuple] | None
    timestamp_ms: int
    duration_ms: int

    def __post_init__(self) -> None:
        if self.action_type not in ACTION_TYPES:
            raise ValueError(f"unknown action_type {self.action_type!r}")
        if self.duration_ms < 0:
            raise ValueError("duration_ms must be >= 0")
        extra = set(predicate_fields(self.predicate)) - set(self.target_fields)
        if extra:
            raise ValueError(f"predicate references non-target fields: {sorted(extra)}")

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "action_type": self.action_type,
            "target_fields": list(self.target_fields),
            "predicate": predicate_to_json(self.predicate),
            "timestamp_ms": self.timestamp_ms,
            "duration_ms": self.duration_ms,
        }
        if self.value_range is not None:
            doc["value_range"] = {f: list(r) for f, r in self.value_range.items()}
        return doc


def event_from_json(doc: Mapping) -> InteractionEvent:
    value_range = doc.get("value_range")
    if value_range is not None:
        value_range = {f: tuple(r) for f, r in value_range.items()}
    try:
        return InteractionEvent(
            action_type=doc["action_type"],
            target_fields=tuple(doc["target_fields"]),
            predicate=predicate_from_json(doc["predicate"]),
            value_range=value_range,
            timestamp_ms=int(doc["timestamp_ms"]),
            duration_ms=int(doc["duration_ms"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad interaction event: {exc}") from exc


@dataclass(frozen=True)
class InteractionLog:
    events: tuple[InteractionEvent, ...] = ()
    tracking_enabled: bool = True

    def to_json(self) -> dict:
        return {
            "tracking_enabled": self.tracking_enabled,
            "events": [e.to_json() for e in self.events],
        }


def log_from_json(doc: Mapping) -> InteractionLog:
    return InteractionLog(
        events=tuple(event_from_json(e) for e in doc.get("events", ())),
        tracking_enabled=bool(doc.get("tracking_enabled", True)),
    )


def record_event(log: InteractionLog, event: InteractionEvent) -> InteractionLog:
    """Append the event unless debounced (< 500 ms) or tracking is off."""
    if log.events and event.timestamp_ms < log.events[-1].timestamp_ms:
        raise OutOfOrderTimestamp(
            f"event at {event.timestamp_ms} predates log tail {log.events[-1].timestamp_ms}"
        )
    if not log.tracking_enabled or event.duration_ms < DEBOUNCE_MS:
        return log
    return replace(log, events=log.events + (event,))


def set_tracking(log: InteractionLog, enabled: bool) -> InteractionLog:
    return replace(log, tracking_enabled=enabled)


# ---------------------------------------------------------------------------
# Gesture translation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gesture:
    """Raw interaction descriptor in data coordinates.

    ``ranges`` maps fields to (low, high) extents (either side may be None);
    ``values`` maps fields to clicked/hovered datum values. The chart library
    supplies these in data space, never pixels.
    """

    kind: str
    ranges: Mapping[str, tuple] | None = None
    values: Mapping[str, Any] | None = None
    timestamp_ms: int = 0
    duration_ms: int = 0


def translate_interaction(gesture: Gesture, chart_context: "ChartSpec") -> InteractionEvent:
    """Turn a physical gesture into a semantic, encoding-invariant event.

    Fields are processed in sorted name order, so the emitted predicate is
    identical across re-encodings (e.g. swapped axes) of the same fields.
    """
    if gesture.kind not in ACTION_TYPES:
        raise UnmappableGesture(f"unknown gesture kind {gesture.kind!r}")
    encoded = {
        enc.field for enc in chart_context.encodings.values() if enc.field is not None
    }
    if gesture.ranges:
        fields = sorted(f for f in gesture.ranges if f in encoded)
        if not fields:
            raise UnmappableGesture("gesture touches no data encoding")
        members = []
        for f in fields:
            low, high = gesture.ranges[f]
            members.append(range_pred(f, low, high))
        predicate = conjunction(members)
        value_range = {f: tuple(gesture.ranges[f]) for f in fields}
        return InteractionEvent(
            gesture.kind, tuple(fields), predicate, value_range,
            gesture.timestamp_ms, gesture.duration_ms,
        )
    if gesture.values:
        fields = sorted(f for f in gesture.values if f in encoded)
        if not fields:
            raise UnmappableGesture("gesture touches no data encoding")
        predicate = conjunction([Equals(f, gesture.values[f]) for f in fields])
        return InteractionEvent(
            gesture.kind, tuple(fields), predicate, None,
            gesture.timestamp_ms, gesture.duration_ms,
        )
    raise UnmappableGesture("gesture carries neither ranges nor values")


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FusedSignal:
    """One deduplicated interaction predicate with its frequency annotation."""

    predicate: Predicate
    action_type: str
    repeat_count: int
    last_timestamp_ms: int


@dataclass(frozen=True)
class IntentBundle:
    base_filters: tuple[Predicate, ...] = ()
    interactions: tuple[FusedSignal, ...] = ()
    instruction: str | None = None
    inferred_goals: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.base_filters and not self.interactions and not self.instruction:
            raise EmptyIntent("no intent signal present")

    @property
    def interaction_predicates(self) -> tuple[Predicate, ...]:
        return tuple(sig.predicate for sig in self.interactions)


def extract_base_filters(spec: "ChartSpec") -> list[Predicate]:
    """The spec's filter transforms, one predicate each, in spec order."""
    return list(spec.transforms)


def _normalize_bound(value: Any) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return value
    return float(format(float(value), f".{_DEDUP_SIG_DIGITS}g"))


def predicate_signature(predicate: Predicate) -> tuple:
    """Structural identity with range bounds rounded to 4 significant digits."""
    if isinstance(predicate, Conjunction):
        return ("and",) + tuple(predicate_signature(m) for m in predicate.members)
    if isinstance(predicate, Equals):
        return ("eq", predicate.field, _normalize_bound(predicate.value))
    from .tabular import InSet, Range

    if isinstance(predicate, InSet):
        return ("in", predicate.field, tuple(_normalize_bound(v) for v in predicate.values))
    if isinstance(predicate, Range):
        return (
            "range",
            predicate.field,
            _normalize_bound(predicate.low),
            _normalize_bound(predicate.high),
            predicate.low_inclusive,
            predicate.high_inclusive,
        )
    raise TypeError(f"not a predicate: {predicate!r}")


def fuse_intent(
    base: Sequence[Predicate],
    log: InteractionLog,
    instruction: str | None = None,
) -> IntentBundle:
    """Fuse the three intent signals into one bundle.

    Interaction predicates are deduplicated by structural equality and ordered
    most-recent-first (recency of the latest occurrence); the repeat count per
    signal carries frequency. With tracking disabled the log contributes
    nothing. Raises EmptyIntent when every signal is absent.
    """
    signals: list[FusedSignal] = []
    if log.tracking_enabled and log.events:
        grouped: dict[tuple, FusedSignal] = {}
        for event in log.events:
            sig = predicate_signature(event.predicate)
            prev = grouped.get(sig)
            grouped[sig] = FusedSignal(
                predicate=event.predicate,
                action_type=event.action_type,
                repeat_count=(prev.repeat_count + 1) if prev else 1,
                last_timestamp_ms=event.timestamp_ms,
            )
        signals = sorted(
            grouped.values(), key=lambda s: s.last_timestamp_ms, reverse=True
        )
    instruction = instruction or None
    return IntentBundle(
        base_filters=tuple(base),
        interactions=tuple(signals),
        instruction=instruction,
    )


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------

def build_intent_prompt(
    bundle: IntentBundle,
    chart: "ChartSpec",
    candidate_pool: Sequence[Mapping[str, Any]] | None = None,
    corrective: str | None = None,
) -> PromptDocument:
    """Render the single-invocation generation prompt.

    Sections: serialized chart, interaction history with the static
    action-to-intent table (hover signals ranked last), the instruction, the
    candidate pool for basic dimension ranking, and the output contract.
    Sections without content are omitted.
    """
    chart_doc = chart.to_json()
    parts: list[str] = []
    if corrective:
        parts.append(prompts.CORRECTIVE_PREFIX.format(error=corrective))
    parts.append("## Current chart\n" + json.dumps(chart_doc, sort_keys=True))
    if bundle.interactions:
        table = "\n".join(
            f"- {action} -> {meaning}" for action, meaning in ACTION_INTENT_MAP.items()
        )
        ordered = sorted(
            bundle.interactions, key=lambda s: s.action_type == "hover"
        )
        events = "\n".join(
            f"- [{sig.action_type} x{sig.repeat_count}] {render_predicate(sig.predicate)}"
            f" (intent: {ACTION_INTENT_MAP[sig.action_type]})"
            for sig in ordered
        )
        parts.append(
            "## Interaction history\nAction-intent mapping:\n"
            + table
            + "\nObserved (most recent first, frequent and recent actions first"
            " within rank):\n"
            + events
        )
    if bundle.instruction:
        parts.append("## Analyst instruction\n" + bundle.instruction)
    if candidate_pool:
        pool_lines = "\n".join(f"- {d['label']}" for d in candidate_pool)
        parts.append("## Candidate drill dimensions\n" + pool_lines)
    parts.append("## Task\n" + prompts.CHART_OUTPUT_INSTRUCTION)

    context: dict[str, Any] = {
        "chart": chart_doc,
        "new_predicates": [predicate_to_json(p) for p in bundle.interaction_predicates],
        "instruction": bundle.instruction,
    }
    if candidate_pool:
        context["candidate_pool"] = [dict(d) for d in candidate_pool]
    return PromptDocument(
        system_text=prompts.CHART_SYSTEM.format(heuristics=prompts.heuristic_constraint_lines()),
        user_text="\n\n".join(parts),
        expected_schema="chart_spec",
        context=context,
    )


__all__ = [
    "DEBOUNCE_MS",
    "ACTION_TYPES",
    "ACTION_INTENT_MAP",
    "InteractionEvent",
    "InteractionLog",
    "Gesture",
    "FusedSignal",
    "IntentBundle",
    "event_from_json",
    "log_from_json",
    "record_event",
    "set_tracking",
    "translate_interaction",
    "extract_base_filters",
    "predicate_signature",
    "fuse_intent",
    "build_intent_prompt",
]
