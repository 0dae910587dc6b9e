"""Intent capture tests: debounce, gesture translation, fusion, prompt."""

from __future__ import annotations

from pathlib import Path

import pytest

from drilldown.chartspec import ChartSpec, Encoding
from drilldown.errors import EmptyIntent, OutOfOrderTimestamp, UnmappableGesture
from drilldown.intent import (
    ACTION_INTENT_MAP,
    DEBOUNCE_MS,
    Gesture,
    InteractionEvent,
    InteractionLog,
    build_intent_prompt,
    event_from_json,
    extract_base_filters,
    fuse_intent,
    record_event,
    set_tracking,
    translate_interaction,
)
from drilldown.tabular import Conjunction, Equals, conjunction, range_pred

GOLDEN = Path(__file__).parent / "golden" / "intent_prompt.txt"


def _event(ts=1000, duration=800, action="click_select", predicate=None, fields=("Region",)):
    return InteractionEvent(
        action_type=action,
        target_fields=tuple(fields),
        predicate=predicate or Equals("Region", "N"),
        value_range=None,
        timestamp_ms=ts,
        duration_ms=duration,
    )


def scatter_chart(x="Income", y="Age"):
    return ChartSpec(
        data_ref="people",
        mark="point",
        encodings={"x": Encoding(x, "quantitative"), "y": Encoding(y, "quantitative")},
    )


# ======================================================================
# Recording and debounce
# ======================================================================


def test_debounce_drops_499ms():
    log = record_event(InteractionLog(), _event(duration=DEBOUNCE_MS - 1))
    assert log.events == ()


def test_debounce_keeps_500ms():
    log = record_event(InteractionLog(), _event(duration=DEBOUNCE_MS))
    assert len(log.events) == 1


def test_tracking_off_drops_everything():
    log = InteractionLog(tracking_enabled=False)
    assert record_event(log, _event(duration=2000)).events == ()


def test_out_of_order_timestamp():
    log = record_event(InteractionLog(), _event(ts=1000))
    with pytest.raises(OutOfOrderTimestamp):
        record_event(log, _event(ts=999))


def test_no_recorded_event_below_debounce():
    log = InteractionLog()
    for ts, dur in [(0, 100), (10, 499), (20, 500), (30, 10_000), (40, 0)]:
        log = record_event(log, _event(ts=ts, duration=dur))
    assert all(e.duration_ms >= DEBOUNCE_MS for e in log.events)
    assert len(log.events) == 2


def test_event_wire_round_trip():
    event = InteractionEvent(
        action_type="brush",
        target_fields=("Age", "Income"),
        predicate=conjunction(
            [range_pred("Age", high=30), range_pred("Income", low=100000)]
        ),
        value_range={"Age": (None, 30), "Income": (100000, None)},
        timestamp_ms=5000,
        duration_ms=900,
    )
    assert event_from_json(event.to_json()) == event


# ======================================================================
# Gesture translation
# ======================================================================


def test_brush_becomes_range_conjunction():
    gesture = Gesture(
        kind="brush",
        ranges={"Income": (100000, None), "Age": (None, 30)},
        timestamp_ms=1,
        duration_ms=600,
    )
    event = translate_interaction(gesture, scatter_chart())
    assert event.predicate == Conjunction(
        (range_pred("Age", high=30), range_pred("Income", low=100000))
    )
    assert event.target_fields == ("Age", "Income")


def test_brush_encoding_invariant():
    gesture = Gesture(kind="brush", ranges={"Income": (100000, None), "Age": (None, 30)})
    normal = translate_interaction(gesture, scatter_chart(x="Income", y="Age"))
    swapped = translate_interaction(gesture, scatter_chart(x="Age", y="Income"))
    assert normal.predicate == swapped.predicate


def test_click_becomes_equals(sales_chart):
    gesture = Gesture(kind="click_select", values={"Region": "N"}, duration_ms=600)
    event = translate_interaction(gesture, sales_chart)
    assert event.predicate == Equals("Region", "N")


def test_unmappable_gesture(sales_chart):
    with pytest.raises(UnmappableGesture):
        translate_interaction(Gesture(kind="brush", ranges={"Nope": (0, 1)}), sales_chart)
    with pytest.raises(UnmappableGesture):
        translate_interaction(Gesture(kind="hover"), sales_chart)


# ======================================================================
# Base-filter extraction
# ======================================================================


def test_extract_no_transforms(sales_chart):
    assert extract_base_filters(sales_chart) == []


def test_extract_preserves_order(sales_chart):
    from dataclasses import replace

    p1 = range_pred("stress_level", low=7, low_inclusive=False)
    p2 = Equals("Region", "N")
    spec = replace(sales_chart, transforms=(p1, p2))
    assert extract_base_filters(spec) == [p1, p2]


# ======================================================================
# Fusion
# ======================================================================


def test_cold_start_instruction_only():
    bundle = fuse_intent([], InteractionLog(), "analyze by region")
    assert bundle.instruction == "analyze by region"
    assert bundle.base_filters == ()
    assert bundle.interactions == ()


def test_fuse_dedups_repeated_brush():
    brush = conjunction([range_pred("Age", 20.0001, 30.0)])
    jitter = conjunction([range_pred("Age", 20.00012, 30.00001)])
    other = Equals("Region", "N")
    log = InteractionLog()
    log = record_event(log, _event(ts=1, duration=600, action="brush", predicate=brush, fields=("Age",)))
    log = record_event(log, _event(ts=2, duration=600, action="click_select", predicate=other))
    log = record_event(log, _event(ts=3, duration=600, action="brush", predicate=jitter, fields=("Age",)))
    bundle = fuse_intent([], log, None)
    assert len(bundle.interactions) == 2
    first = bundle.interactions[0]
    assert first.repeat_count == 2  # the two jittered brushes collapse
    assert first.last_timestamp_ms == 3


def test_fuse_all_three_signals(sales_chart):
    base = [Equals("Product", "A")]
    log = record_event(InteractionLog(), _event(duration=700))
    bundle = fuse_intent(base, log, "compare regions")
    assert bundle.base_filters == (Equals("Product", "A"),)
    assert len(bundle.interactions) == 1
    assert bundle.instruction == "compare regions"


def test_fuse_empty_raises():
    with pytest.raises(EmptyIntent):
        fuse_intent([], InteractionLog(), None)


def test_tracking_disabled_yields_no_interaction_predicates():
    log = record_event(InteractionLog(), _event(duration=900))
    log = set_tracking(log, False)
    bundle = fuse_intent([], log, "anything")
    assert bundle.interactions == ()


def test_fuse_idempotent_on_own_output():
    log = InteractionLog()
    log = record_event(log, _event(ts=1, duration=600, predicate=Equals("Region", "N")))
    log = record_event(log, _event(ts=2, duration=600, predicate=Equals("Region", "N")))
    log = record_event(log, _event(ts=3, duration=600, action="hover", predicate=Equals("Region", "S")))
    bundle = fuse_intent([Equals("Product", "A")], log, "hi")
    # rebuild a log from the fused output (oldest-first, repeats expanded)
    rebuilt = InteractionLog()
    ts = 0
    for sig in reversed(bundle.interactions):
        for _ in range(sig.repeat_count):
            ts += 1
            rebuilt = record_event(
                rebuilt,
                InteractionEvent(
                    sig.action_type,
                    tuple(sorted({f for f in _fields_of(sig.predicate)})),
                    sig.predicate,
                    None,
                    ts,
                    600,
                ),
            )
    again = fuse_intent(bundle.base_filters, rebuilt, bundle.instruction)
    assert [
        (s.predicate, s.action_type, s.repeat_count) for s in again.interactions
    ] == [(s.predicate, s.action_type, s.repeat_count) for s in bundle.interactions]
    assert again.base_filters == bundle.base_filters
    assert again.instruction == bundle.instruction


def _fields_of(predicate):
    from drilldown.tabular import predicate_fields

    return predicate_fields(predicate)


# ======================================================================
# Prompt assembly
# ======================================================================


def test_prompt_omits_absent_sections(sales_chart):
    bundle = fuse_intent([Equals("Region", "N")], InteractionLog(), None)
    prompt = build_intent_prompt(bundle, sales_chart)
    assert "## Interaction history" not in prompt.user_text
    assert "## Analyst instruction" not in prompt.user_text
    assert "## Current chart" in prompt.user_text


def test_prompt_includes_action_mapping(sales_chart):
    log = record_event(
        InteractionLog(),
        _event(duration=700, action="brush", predicate=range_pred("Age", 1, 2), fields=("Age",)),
    )
    bundle = fuse_intent([], log, None)
    prompt = build_intent_prompt(bundle, sales_chart)
    assert "brush -> select-range" in prompt.user_text
    for action, meaning in ACTION_INTENT_MAP.items():
        assert f"{action} -> {meaning}" in prompt.user_text


def test_prompt_hover_ranked_last(sales_chart):
    log = InteractionLog()
    log = record_event(log, _event(ts=1, duration=700, action="hover", predicate=Equals("Region", "S")))
    log = record_event(log, _event(ts=2, duration=700, action="click_select", predicate=Equals("Region", "N")))
    bundle = fuse_intent([], log, None)
    text = build_intent_prompt(bundle, sales_chart).user_text
    assert text.index("[click_select") < text.index("[hover")


def test_prompt_single_invocation_contract(sales_chart):
    bundle = fuse_intent([], InteractionLog(), "Region = N")
    prompt = build_intent_prompt(bundle, sales_chart)
    assert prompt.expected_schema == "chart_spec"
    assert "task hypotheses" in prompt.user_text
    assert "Vega-Lite" in prompt.user_text


def golden_bundle_and_chart(sales_chart):
    log = InteractionLog()
    log = record_event(
        log,
        InteractionEvent(
            "brush",
            ("Age", "Income"),
            conjunction([range_pred("Age", high=30), range_pred("Income", low=100000)]),
            {"Age": (None, 30), "Income": (100000, None)},
            timestamp_ms=1000,
            duration_ms=800,
        ),
    )
    bundle = fuse_intent([Equals("Product", "A")], log, "compare regions")
    pool = [
        {"label": "Region = N", "field": "Region", "filter": {"kind": "equals", "field": "Region", "value": "N"}},
        {"label": "Region = S", "field": "Region", "filter": {"kind": "equals", "field": "Region", "value": "S"}},
    ]
    return bundle, sales_chart, pool


def test_prompt_golden_snapshot(sales_chart):
    bundle, chart, pool = golden_bundle_and_chart(sales_chart)
    prompt = build_intent_prompt(bundle, chart, candidate_pool=pool)
    rendered = prompt.system_text + "\n=====\n" + prompt.user_text
    assert rendered == GOLDEN.read_text()
