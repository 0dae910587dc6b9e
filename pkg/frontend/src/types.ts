/** Wire types shared with the session service. */

export type PredicateWire =
  | { kind: "equals"; field: string; value: unknown }
  | { kind: "in_set"; field: string; values: unknown[] }
  | {
      kind: "range";
      field: string;
      low: number | string | null;
      high: number | string | null;
      low_inclusive: boolean;
      high_inclusive: boolean;
    }
  | { kind: "conjunction"; members: PredicateWire[] };

export type ActionType =
  | "brush"
  | "click_select"
  | "hover"
  | "pan_zoom"
  | "filter_widget";

/** Exactly the shape POST /interactions accepts. */
export interface InteractionEventWire {
  action_type: ActionType;
  target_fields: string[];
  predicate: PredicateWire;
  value_range?: Record<string, [number | string | null, number | string | null]>;
  timestamp_ms: number;
  duration_ms: number;
}

/** Vega-Lite v5 documents travel opaquely; the UI only reads a few fields. */
export type ChartSpecDoc = Record<string, unknown> & {
  mark?: unknown;
  transform?: unknown[];
};

export interface BreadcrumbToken {
  id: string;
  label: string;
}

export interface BranchEntry {
  leaf_id: string;
  path_labels: string[];
  display_label: string;
}

export interface DimensionTag {
  label: string;
  field: string;
  filter: PredicateWire;
  source: "basic" | "high_level";
  rationale?: string;
  score?: number;
}

export interface DrillResultWire {
  status: "ok" | "rolled_back" | "failed";
  new_spec: ChartSpecDoc | null;
  basic_dimensions: Array<{
    field: string;
    label: string;
    rationale: string;
    filter: PredicateWire;
  }>;
  attempts: number;
  error_trace: string | null;
  node_id: string | null;
}

export interface RankedInsightWire {
  category: string;
  title: string;
  observations: string[];
  involved_fields: string[];
  s_vis: number;
  i_align: number;
  s_final: number;
  domain_label?: string;
}

export interface InsightsResponse {
  sections: Record<string, RankedInsightWire[]>;
  errors: Record<string, string>;
  high_level_dimensions: Array<{
    label: string;
    mcount: number;
    weight: number;
    score: number;
    filters: PredicateWire[];
  }>;
}

export interface SessionConfig {
  model_id: string;
  reasoning_level: "low" | "medium" | "high";
  temperature: number;
  seed: number;
  tracking_enabled: boolean;
}

export interface ServerState {
  session_id: string;
  config: SessionConfig;
  has_dataset: boolean;
  dimension_tags: DimensionTag[];
  active_id?: string;
  spec?: ChartSpecDoc;
  breadcrumb?: BreadcrumbToken[];
  branches?: BranchEntry[];
}

export interface NavigationState {
  active_id: string;
  spec: ChartSpecDoc;
  breadcrumb: BreadcrumbToken[];
}

export interface DatasetSummary {
  name: string;
  row_count: number;
  columns: Array<{ name: string; type: string; cardinality: number }>;
}
