/** Translate physical gestures into semantic interaction events.
 *
 * Everything is expressed in data coordinates (the chart library's data-space
 * selection values), never pixels, so the emitted predicate is identical
 * across re-encodings of the same fields. Fields are processed in sorted
 * name order to keep the wire shape canonical; this mirrors the service's
 * own translation rules exactly.
 */

import type {
  ActionType,
  InteractionEventWire,
  PredicateWire,
} from "./types";

export type DataBound = number | string | null;

export interface BrushExtents {
  [field: string]: [DataBound, DataBound];
}

export function rangePredicate(
  field: string,
  low: DataBound,
  high: DataBound,
): PredicateWire {
  // an unbounded side's inclusive flag is normalized to false
  return {
    kind: "range",
    field,
    low,
    high,
    low_inclusive: low !== null,
    high_inclusive: high !== null,
  };
}

function conjunctionOf(members: PredicateWire[]): PredicateWire {
  if (members.length === 1) return members[0]!;
  return { kind: "conjunction", members };
}

export function brushEvent(
  extents: BrushExtents,
  timestampMs: number,
  durationMs: number,
  action: ActionType = "brush",
): InteractionEventWire {
  const fields = Object.keys(extents).sort();
  if (fields.length === 0) throw new Error("brush touches no fields");
  const members = fields.map((f) => {
    const [low, high] = extents[f]!;
    return rangePredicate(f, low, high);
  });
  const valueRange: InteractionEventWire["value_range"] = {};
  for (const f of fields) valueRange[f] = extents[f]!;
  return {
    action_type: action,
    target_fields: fields,
    predicate: conjunctionOf(members),
    value_range: valueRange,
    timestamp_ms: timestampMs,
    duration_ms: durationMs,
  };
}

export function clickEvent(
  values: Record<string, unknown>,
  timestampMs: number,
  durationMs: number,
  action: ActionType = "click_select",
): InteractionEventWire {
  const fields = Object.keys(values).sort();
  if (fields.length === 0) throw new Error("click touches no fields");
  const members = fields.map<PredicateWire>((f) => ({
    kind: "equals",
    field: f,
    value: values[f],
  }));
  return {
    action_type: action,
    target_fields: fields,
    predicate: conjunctionOf(members),
    timestamp_ms: timestampMs,
    duration_ms: durationMs,
  };
}

export function hoverEvent(
  values: Record<string, unknown>,
  timestampMs: number,
  durationMs: number,
): InteractionEventWire {
  return clickEvent(values, timestampMs, durationMs, "hover");
}

export function panZoomEvent(
  extents: BrushExtents,
  timestampMs: number,
  durationMs: number,
): InteractionEventWire {
  return brushEvent(extents, timestampMs, durationMs, "pan_zoom");
}

/** Structural check that an event matches the wire schema the service accepts. */
export function validateEventWire(event: InteractionEventWire): string[] {
  const problems: string[] = [];
  const actions = ["brush", "click_select", "hover", "pan_zoom", "filter_widget"];
  if (!actions.includes(event.action_type)) {
    problems.push(`unknown action_type ${event.action_type}`);
  }
  if (!Array.isArray(event.target_fields) || event.target_fields.length === 0) {
    problems.push("target_fields must be a non-empty array");
  }
  if (!Number.isFinite(event.timestamp_ms)) problems.push("timestamp_ms must be finite");
  if (!Number.isFinite(event.duration_ms) || event.duration_ms < 0) {
    problems.push("duration_ms must be >= 0");
  }
  const checkPredicate = (p: PredicateWire, path: string): void => {
    if (p.kind === "conjunction") {
      p.members.forEach((m, i) => checkPredicate(m, `${path}.members[${i}]`));
      return;
    }
    if (!p.field) problems.push(`${path}: missing field`);
    if (!event.target_fields.includes((p as { field: string }).field)) {
      problems.push(`${path}: field outside target_fields`);
    }
    if (p.kind === "range") {
      if (p.low === null && p.high === null) problems.push(`${path}: unbounded range`);
      if (typeof p.low_inclusive !== "boolean" || typeof p.high_inclusive !== "boolean") {
        problems.push(`${path}: inclusive flags must be booleans`);
      }
    }
  };
  checkPredicate(event.predicate, "predicate");
  return problems;
}
