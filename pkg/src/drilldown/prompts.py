"""Versioned prompt templates and the chart-type heuristic table.

Templates are plain text with ``str.format`` slots and are frozen by golden
snapshot tests; bumping PROMPT_VERSION signals that snapshots must be
regenerated deliberately.
"""

from __future__ import annotations

from .tabular import CATEGORICAL, NUMERIC, TEMPORAL

PROMPT_VERSION = "1"

#: Task-semantic mark selection, embedded into generation prompts as strict
#: constraints. Lookups outside the table fall back to "bar".
HEURISTIC_RULES: dict[tuple[str, str, str], str] = {
    ("trend", TEMPORAL, NUMERIC): "line",
    ("comparison", CATEGORICAL, NUMERIC): "bar",
    ("correlation", NUMERIC, NUMERIC): "point",
    ("distribution", CATEGORICAL, NUMERIC): "boxplot",
    ("density", CATEGORICAL, CATEGORICAL): "heatmap-rect",
}

FALLBACK_MARK = "bar"

TASK_KINDS = ("trend", "comparison", "correlation", "distribution", "density")


def heuristic_constraint_lines() -> str:
    lines = [
        f"- task={task}, x={xt}, y={yt} -> mark={mark}"
        for (task, xt, yt), mark in HEURISTIC_RULES.items()
    ]
    lines.append(f"- any other combination -> mark={FALLBACK_MARK}")
    return "\n".join(lines)


CHART_SYSTEM = """You are a visual-analytics drill-down assistant. Given the \
analyst's current chart, interaction history, and instruction, produce the \
next chart as a Vega-Lite v5 specification that tightens the current view by \
appending filter transforms. Never drop existing filters.

Strict chart-type constraints (apply exactly):
{heuristics}

Interactive charts must declare selections with Vega-Lite params, e.g.:
  "params": [{{"name": "sel", "select": {{"type": "interval", "encodings": ["x", "y"]}}}}]

Reply with a single JSON object:
{{"task_hypotheses": [..strings..],
  "spec": {{..Vega-Lite spec..}},
  "basic_dimensions": [{{"label": .., "field": .., "filter": .., "rationale": ..}}, ..up to 3..]}}
Rank basic_dimensions by intent alignment and avoid filters already implied \
by the current view."""


CHART_OUTPUT_INSTRUCTION = (
    "Output inferred task hypotheses followed by the next Vega-Lite "
    "specification, as one JSON object in a single reply."
)


INSIGHT_SYSTEM = """You are a visual-analytics insight assistant. Analyze the \
summarized chart view and report noteworthy data-driven patterns: outliers, \
distribution ranges, trend directions, and inter-group contrasts.

Score each insight on an integer rubric from 0 to 10 judged on magnitude of \
deviation and consistency. Prioritize multidimensional trend relationships, \
assigning them higher scores.

Produce three categories: data_feature, domain_specific (label the domain \
from the dataset context, e.g. Technical, Business, or Clinical), and \
drill_down (cues for further exploration).

Reply with a single JSON array of objects:
[{"category": .., "title": .., "observations": [..], "involved_fields": [..],
  "value_ranges": {field: [low, high], ..} | null, "s_vis": 0-10,
  "domain_label": ..optional..}, ..]"""


RELEVANCE_SYSTEM = """You rate how semantically relevant each data field is \
to the analyst's current intent, as a coefficient between 0 and 1.

Reply with a single JSON object mapping every listed field name to a number \
in [0, 1]."""


CORRECTIVE_PREFIX = (
    "The previous reply failed validation and was rolled back. Error:\n"
    "{error}\n"
    "Regenerate a corrected reply honoring the original request below.\n\n"
)
