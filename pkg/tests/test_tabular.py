"""Columnar dataset tests: ingestion, domains, predicates, binning."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drilldown.errors import (
    CellCapExceeded,
    DuplicateColumn,
    MalformedCsv,
    NotBinnable,
    TypeMismatch,
    UnknownField,
)
from drilldown.tabular import (
    BOOLEAN,
    CATEGORICAL,
    NUMERIC,
    TEMPORAL,
    TEXT,
    Conjunction,
    Equals,
    InSet,
    Range,
    bin_numeric,
    build_dataset,
    conjunction,
    evaluate_predicate,
    field_domain,
    in_set,
    ingest_csv,
    parse_predicate_label,
    popcount,
    predicate_from_json,
    predicate_to_json,
    range_pred,
    render_predicate,
)


# ======================================================================
# Ingestion and type inference
# ======================================================================


def test_minimal_csv():
    ds = ingest_csv("a,b\n1,x\n2,y", "mini")
    assert ds.row_count == 2
    assert ds.field("a").ctype == NUMERIC
    assert ds.field("b").ctype == CATEGORICAL


def test_type_inference_order():
    csv = (
        "num,date,flag,cat,note\n"
        "1,2021-01-01,true,A,hello world 0\n"
        "2.5,2021-02-01T10:00:00,false,A,hello world 1\n"
        "-3,2021-03-01,1,B,hello world 2\n"
        "4e2,2021-04-01,0,B,hello world 3\n"
    )
    ds = ingest_csv(csv, "t")
    assert [c.ctype for c in ds.columns] == [NUMERIC, TEMPORAL, BOOLEAN, CATEGORICAL, TEXT]


def test_numeric_wins_over_boolean():
    # 0/1 parse as numbers, and numeric is checked first
    ds = ingest_csv("x\n0\n1\n1", "t")
    assert ds.field("x").ctype == NUMERIC


def test_categorical_threshold():
    # 4 distinct over 4 rows > 0.5 ratio: text
    assert ingest_csv("x\na\nb\nc\nd", "t").field("x").ctype == TEXT
    # 2 distinct over 4 rows: categorical
    assert ingest_csv("x\na\nb\na\nb", "t").field("x").ctype == CATEGORICAL


def test_nulls_are_empty_cells():
    ds = ingest_csv("a,b\n1,\n,x\n3,y", "t")
    assert ds.field("a").nulls.tolist() == [False, True, False]
    assert ds.field("b").nulls.tolist() == [True, False, False]


def test_duplicate_column():
    with pytest.raises(DuplicateColumn):
        ingest_csv("a,a\n1,2", "t")


def test_malformed_rows():
    with pytest.raises(MalformedCsv):
        ingest_csv("a,b\n1,2,3", "t")
    with pytest.raises(MalformedCsv):
        ingest_csv("", "t")


def test_cell_cap_boundary():
    # 2,000,001 rows x 5 cols crosses the 10M-cell cap
    header = "a,b,c,d,e\n"
    row = "1,2,3,4,5\n"
    with pytest.raises(CellCapExceeded):
        ingest_csv(header + row * 2_000_001, "big")
    # exactly 10M cells is fine (2M x 5) under a reduced synthetic cap
    small = ingest_csv("a,b\n" + "1,2\n" * 3, "ok", max_cells=6)
    assert small.cell_count == 6
    with pytest.raises(CellCapExceeded):
        ingest_csv("a,b\n" + "1,2\n" * 4, "over", max_cells=6)


# ======================================================================
# Field domains
# ======================================================================


def test_domain_distinct_count():
    ds = ingest_csv("x\nA\nB\nA\nC", "t")
    dom = field_domain(ds, "x")
    assert dom.cardinality == 3
    assert dom.values == ("A", "B", "C")


def test_domain_constant_column():
    ds = ingest_csv("x\n5\n5\n5", "t")
    assert field_domain(ds, "x").cardinality == 1


def test_domain_fixture_product(sales):
    assert field_domain(sales, "Product").cardinality == 3


def test_domain_naive_oracle(wellness):
    for name in wellness.fields:
        col = wellness.field(name)
        naive = len(
            {repr(v) for v, n in zip(col.data.tolist(), col.nulls.tolist()) if not n}
        )
        assert field_domain(wellness, name).cardinality == naive


def test_domain_unknown_field(sales):
    with pytest.raises(UnknownField):
        field_domain(sales, "nope")


# ======================================================================
# Predicate evaluation
# ======================================================================


def test_empty_conjunction_is_true(sales):
    assert popcount(evaluate_predicate(sales, Conjunction(()))) == sales.row_count


def test_equals_fixture(sales):
    # row-by-row oracle: rows 0,1,2 have Product A
    mask = evaluate_predicate(sales, Equals("Product", "A"))
    assert mask.tolist() == [True, True, True, False, False, False]


def test_income_age_brush_predicate():
    ds = build_dataset(
        "people",
        {"Income": [120000, 90000, 150000, 200000], "Age": [25, 28, 40, 22]},
    )
    pred = conjunction(
        [range_pred("Income", low=100000), range_pred("Age", high=30)]
    )
    mask = evaluate_predicate(ds, pred)
    expected = [(i >= 100000 and a <= 30) for i, a in zip([120000, 90000, 150000, 200000], [25, 28, 40, 22])]
    assert mask.tolist() == expected


def test_nulls_fail_atomic_predicates():
    ds = ingest_csv("x,y\n1,A\n,B\n3,", "t")
    assert evaluate_predicate(ds, range_pred("x", low=0)).tolist() == [True, False, True]
    assert evaluate_predicate(ds, Equals("y", "B")).tolist() == [False, True, False]
    assert evaluate_predicate(ds, in_set("y", ["A", "B"])).tolist() == [True, True, False]


def test_type_mismatch():
    ds = ingest_csv("x,y\n1,A\n2,B", "t")
    with pytest.raises(TypeMismatch):
        evaluate_predicate(ds, Equals("x", "A"))
    with pytest.raises(TypeMismatch):
        evaluate_predicate(ds, Equals("y", 3))
    with pytest.raises(TypeMismatch):
        evaluate_predicate(ds, range_pred("y", low=0))


def test_temporal_range_with_iso_bounds():
    ds = ingest_csv("d\n2021-01-01\n2021-06-01\n2022-01-01", "t")
    mask = evaluate_predicate(ds, range_pred("d", low="2021-03-01", high="2021-12-31"))
    assert mask.tolist() == [False, True, False]


def test_boolean_equals():
    ds = ingest_csv("b\ntrue\nfalse\ntrue", "t")
    assert ds.field("b").ctype == BOOLEAN
    assert evaluate_predicate(ds, Equals("b", True)).tolist() == [True, False, True]
    with pytest.raises(TypeMismatch):
        evaluate_predicate(ds, Equals("b", "true"))


@given(
    values=st.lists(st.integers(-50, 50) | st.none(), min_size=1, max_size=60),
    low=st.integers(-50, 50),
    span=st.integers(0, 40),
)
@settings(max_examples=200, deadline=None)
def test_conjunction_popcount_bound(values, low, span):
    ds = build_dataset("t", {"x": values}, types={"x": NUMERIC})
    p = range_pred("x", low=low)
    q = range_pred("x", high=low + span)
    both = evaluate_predicate(ds, conjunction([p, q]))
    assert popcount(both) <= min(
        popcount(evaluate_predicate(ds, p)), popcount(evaluate_predicate(ds, q))
    )
    # single-member conjunction evaluates like the member
    assert (
        evaluate_predicate(ds, Conjunction((p,))) == evaluate_predicate(ds, p)
    ).all()


# ======================================================================
# Binning
# ======================================================================


def test_quantile_bins_even_split():
    ds = ingest_csv("v\n" + "\n".join(str(i) for i in range(1, 101)), "t")
    bins = bin_numeric(ds, "v", 4)
    assert len(bins) == 4
    counts = [popcount(evaluate_predicate(ds, b)) for b in bins]
    assert counts == [25, 25, 25, 25]


def test_constant_column_single_bin():
    ds = ingest_csv("v\n7\n7\n7", "t")
    bins = bin_numeric(ds, "v", 4)
    assert len(bins) == 1
    assert (bins[0].low, bins[0].high) == (7.0, 7.0)


def test_bin_count_one_is_minmax():
    ds = ingest_csv("v\n3\n9\n5", "t")
    (b,) = bin_numeric(ds, "v", 1)
    assert (b.low, b.high) == (3.0, 9.0)


def test_bins_not_binnable(sales):
    with pytest.raises(NotBinnable):
        bin_numeric(sales, "Product", 4)


@given(
    values=st.lists(
        st.floats(-1e6, 1e6, allow_nan=False) | st.none(), min_size=1, max_size=80
    ),
    bins=st.integers(1, 6),
)
@settings(max_examples=200, deadline=None)
def test_bins_disjoint_and_cover(values, bins):
    ds = build_dataset("t", {"x": values}, types={"x": NUMERIC})
    ranges = bin_numeric(ds, "x", bins)
    col = ds.field("x")
    non_null = ~np.isnan(col.data)
    if not non_null.any():
        assert ranges == []
        return
    union = np.zeros(ds.row_count, dtype=bool)
    for r in ranges:
        mask = evaluate_predicate(ds, r)
        assert not (union & mask).any(), "bins overlap"
        union |= mask
    assert (union == non_null).all(), "bins must cover exactly the non-null rows"


def test_temporal_bins_iso_bounds():
    ds = ingest_csv("d\n2021-01-01\n2021-02-01\n2021-03-01\n2021-04-01", "t")
    bins = bin_numeric(ds, "d", 2)
    assert all(isinstance(b.low, str) and isinstance(b.high, str) for b in bins)
    union = np.zeros(ds.row_count, dtype=bool)
    for b in bins:
        union |= evaluate_predicate(ds, b)
    assert union.all()


# ======================================================================
# Rendering and wire format
# ======================================================================


def test_render_predicates():
    assert render_predicate(Equals("Product", "A")) == "Product = A"
    assert render_predicate(range_pred("Income", low=100000)) == "Income >= 100000"
    assert render_predicate(range_pred("Age", high=30)) == "Age <= 30"
    assert render_predicate(range_pred("Age", 20, 30, True, False)) == "Age in [20, 30)"
    assert render_predicate(in_set("R", ["S", "N"])) == "R in {N, S}"
    assert (
        render_predicate(conjunction([Equals("a", 1.0), Equals("b", True)]))
        == "a = 1 AND b = true"
    )


@pytest.mark.parametrize(
    "pred",
    [
        Equals("Product", "A"),
        Equals("flag", True),
        range_pred("Income", low=100000.0),
        range_pred("Age", high=30.0, high_inclusive=False),
        range_pred("Age", 20.0, 30.0, True, False),
        in_set("R", ["N", "S"]),
    ],
)
def test_label_round_trip(pred):
    assert parse_predicate_label(render_predicate(pred)) == pred


def test_label_parse_rejects_prose():
    assert parse_predicate_label("show me stress trends") is None


@pytest.mark.parametrize(
    "pred",
    [
        Equals("Product", "A"),
        in_set("R", ["N", "S"]),
        range_pred("Age", 20, 30, True, False),
        conjunction([range_pred("Income", low=1e5), range_pred("Age", high=30)]),
        Conjunction(()),
    ],
)
def test_predicate_json_round_trip(pred):
    assert predicate_from_json(predicate_to_json(pred)) == pred


def test_range_requires_ordered_bounds():
    with pytest.raises(ValueError):
        range_pred("x", 10, 5)
