"""Shared fixtures: the 6-row worked dataset and a richer mixed-type table."""

from __future__ import annotations

import pytest

from drilldown.chartspec import ChartSpec, Encoding, SelectionDecl
from drilldown.llm import MockProvider
from drilldown.tabular import ingest_csv

# Product=A covers 3 rows, B covers 2, C covers 1, pairwise disjoint.
SALES_CSV = "Region,Product\nN,A\nN,A\nS,A\nN,B\nS,B\nS,C\n"

INSIGHT_BATCH = [
    {
        "category": "data_feature",
        "title": "Wide spread",
        "observations": ["values span the full range"],
        "involved_fields": ["Product"],
        "s_vis": 7,
    },
    {
        "category": "domain_specific",
        "title": "Demand skew",
        "observations": ["one product dominates"],
        "involved_fields": ["Region"],
        "s_vis": 5,
        "domain_label": "Business",
    },
    {
        "category": "drill_down",
        "title": "Split by region",
        "observations": ["regional contrast looks promising"],
        "involved_fields": ["Region"],
        "s_vis": 6,
    },
]


def wellness_csv(rows: int = 40) -> str:
    """Deterministic mixed-type table: 2 numeric, 2 categorical, temporal, boolean, text."""
    lines = ["Age,Income,Region,Product,Signup,Premium,Note"]
    regions = ["N", "S", "E", "W"]
    products = ["A", "B", "C"]
    for i in range(rows):
        age = 20 + (i * 7) % 45
        income = 30000 + (i * 2617) % 90000
        region = regions[i % 4]
        product = products[i % 3]
        day = (i * 11) % 28 + 1
        signup = f"2021-{(i % 12) + 1:02d}-{day:02d}"
        premium = "true" if i % 2 == 0 else "false"
        note = f"freeform note {i}"
        lines.append(f"{age},{income},{region},{product},{signup},{premium},{note}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def sales():
    return ingest_csv(SALES_CSV, "sales")


@pytest.fixture
def wellness():
    return ingest_csv(wellness_csv(), "wellness")


@pytest.fixture
def sales_chart(sales):
    return ChartSpec(
        data_ref="sales",
        mark="bar",
        encodings={
            "x": Encoding("Region", "nominal"),
            "y": Encoding(None, "quantitative", "count"),
        },
        selections=(SelectionDecl("brush", "interval", encodings=("x", "y")),),
    )


@pytest.fixture
def mock_provider():
    return MockProvider(defaults={"insight_batch": INSIGHT_BATCH})
