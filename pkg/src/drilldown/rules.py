"""Drill-down rule scoring and greedy path recommendation.

A rule is a conjunction of atomic filters, one per field. Against a working
rule set R, a candidate r scores ``mcount(r, R) * weight(r)``: the rows r
covers beyond R's union, times a complexity weight summing
``alpha_f * log2(|f|)`` over the rule's own fields. Top-k selection is greedy
with full rescoring after each pick.

``brute_force_best`` is a deliberately naive row-set implementation kept free
of the bitmask machinery; it exists as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyCandidates, MissingDomain, MissingRelevance
from .tabular import (
    BOOLEAN,
    CATEGORICAL,
    CONTINUOUS_TYPES,
    TEXT,
    AtomicPredicate,
    Conjunction,
    Dataset,
    Equals,
    FieldDomain,
    InSet,
    Range,
    bin_numeric,
    evaluate_predicate,
    field_domain,
    popcount,
    predicate_to_json,
    render_predicate,
)
from .tabular import _parse_temporal  # shared ISO-8601 bound coercion


@dataclass(frozen=True)
class DrillRule:
    """Conjunction of atomic filters, at most one per field."""

    filters: tuple[AtomicPredicate, ...]

    def __post_init__(self) -> None:
        if not self.filters:
            raise ValueError("a drill rule needs at least one filter")
        fields = [f.field for f in self.filters]
        if len(set(fields)) != len(fields):
            raise ValueError(f"rule repeats a field: {fields}")
        if any(isinstance(f, Conjunction) for f in self.filters):
            raise ValueError("rule filters must be atomic predicates")

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(f.field for f in self.filters)


RuleSet = Sequence[DrillRule]


def render_rule(rule: DrillRule) -> str:
    return " AND ".join(render_predicate(f) for f in rule.filters)


@dataclass(frozen=True)
class RelevanceMap:
    """Per-field relevance coefficients alpha_f, each in [0, 1]."""

    coefficients: Mapping[str, float]

    def __post_init__(self) -> None:
        for f, c in self.coefficients.items():
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"coefficient for {f!r} out of [0, 1]: {c}")

    @classmethod
    def uniform(cls, fields: Sequence[str], value: float = 1.0) -> "RelevanceMap":
        return cls({f: value for f in fields})

    def coefficient(self, field_name: str) -> float:
        try:
            return self.coefficients[field_name]
        except KeyError:
            raise MissingRelevance(f"no relevance coefficient for {field_name!r}") from None


@dataclass(frozen=True)
class ScoredCandidate:
    rule: DrillRule
    mcount: int
    weight: float
    score: float
    label: str

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "mcount": self.mcount,
            "weight": self.weight,
            "score": self.score,
            "filters": [predicate_to_json(f) for f in self.rule.filters],
        }


@dataclass(frozen=True)
class EnumerationConfig:
    k: int = 3
    max_candidates: int = 500
    numeric_bins: int = 4

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.k > self.max_candidates:
            raise ValueError("k cannot exceed max_candidates")
        if self.numeric_bins < 1:
            raise ValueError("numeric_bins must be >= 1")


@dataclass
class GreedyTrace:
    """Instrumentation hook: counts score evaluations inside greedy_top_k."""

    score_evaluations: int = 0


# ---------------------------------------------------------------------------
# Scoring (mask path)
# ---------------------------------------------------------------------------

def rule_mask(dataset: Dataset, rule: DrillRule) -> np.ndarray:
    return evaluate_predicate(dataset, Conjunction(rule.filters))


def ruleset_mask(dataset: Dataset, ruleset: RuleSet) -> np.ndarray:
    covered = np.zeros(dataset.row_count, dtype=bool)
    for r in ruleset:
        covered |= rule_mask(dataset, r)
    return covered


def mcount(dataset: Dataset, rule: DrillRule, ruleset: RuleSet) -> int:
    """Rows covered by ``rule`` and by no rule in ``ruleset``."""
    return popcount(rule_mask(dataset, rule) & ~ruleset_mask(dataset, ruleset))


def weight(
    rule: DrillRule,
    relevance: RelevanceMap,
    domains: Mapping[str, FieldDomain],
) -> float:
    """Sum of alpha_f * log2(|f|) over the rule's own fields."""
    total = 0.0
    for f in rule.fields:
        if f not in domains:
            raise MissingDomain(f"no domain statistics for {f!r}")
        card = domains[f].cardinality
        total += relevance.coefficient(f) * math.log2(max(card, 1))
    return total


def score(
    dataset: Dataset,
    rule: DrillRule,
    ruleset: RuleSet,
    relevance: RelevanceMap,
    domains: Mapping[str, FieldDomain] | None = None,
) -> ScoredCandidate:
    if domains is None:
        domains = {f: field_domain(dataset, f) for f in rule.fields}
    m = mcount(dataset, rule, ruleset)
    w = weight(rule, relevance, domains)
    return ScoredCandidate(rule, m, w, m * w, render_rule(rule))


def _beats(a: ScoredCandidate, b: ScoredCandidate) -> bool:
    """Documented tie-break: higher score, then higher mcount, then smaller label."""
    if a.score != b.score:
        return a.score > b.score
    if a.mcount != b.mcount:
        return a.mcount > b.mcount
    return a.label < b.label


def greedy_top_k(
    dataset: Dataset,
    candidates: Sequence[DrillRule],
    ruleset: RuleSet,
    relevance: RelevanceMap,
    k: int,
    trace: GreedyTrace | None = None,
) -> list[ScoredCandidate]:
    """Greedy top-k with rescoring against the growing rule set.

    After each pick the remaining candidates are rescored with the picked rule
    added to the working set, so recorded scores are the incremental scores at
    pick time. Stops early once every remaining score is zero. Performs at
    most ``len(candidates) * k`` score evaluations.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    domains: dict[str, FieldDomain] = {}
    for cand in candidates:
        for f in cand.fields:
            if f not in domains:
                domains[f] = field_domain(dataset, f)

    masks = [rule_mask(dataset, cand) for cand in candidates]
    weights = [weight(cand, relevance, domains) for cand in candidates]
    labels = [render_rule(cand) for cand in candidates]
    covered = ruleset_mask(dataset, ruleset)

    remaining = list(range(len(candidates)))
    picked: list[ScoredCandidate] = []
    for _ in range(k):
        if not remaining:
            break
        best: ScoredCandidate | None = None
        best_idx = -1
        for idx in remaining:
            m = popcount(masks[idx] & ~covered)
            cand = ScoredCandidate(
                candidates[idx], m, weights[idx], m * weights[idx], labels[idx]
            )
            if trace is not None:
                trace.score_evaluations += 1
            if best is None or _beats(cand, best):
                best = cand
                best_idx = idx
        if best is None or best.score <= 0.0:
            break
        picked.append(best)
        covered |= masks[best_idx]
        remaining.remove(best_idx)
    return picked


# ---------------------------------------------------------------------------
# Candidate enumeration
# ---------------------------------------------------------------------------

def enumerate_candidates(
    dataset: Dataset,
    path_fields: set[str] | frozenset[str],
    config: EnumerationConfig = EnumerationConfig(),
) -> list[DrillRule]:
    """Single-filter delta rules over dimensions not yet on the drill path.

    Categorical/boolean fields contribute one equals-rule per distinct value;
    numeric/temporal fields one range-rule per quantile bin. Text fields and
    rules covering zero rows are dropped. The result is truncated to
    ``max_candidates`` by descending coverage.
    """
    rules: list[DrillRule] = []
    for col in dataset.columns:
        if col.name in path_fields or col.ctype == TEXT:
            continue
        if col.ctype in (CATEGORICAL, BOOLEAN):
            domain = field_domain(dataset, col.name)
            for value in domain.values:
                rules.append(DrillRule((Equals(col.name, value),)))
        elif col.ctype in CONTINUOUS_TYPES:
            for bin_range in bin_numeric(dataset, col.name, config.numeric_bins):
                rules.append(DrillRule((bin_range,)))
    covered = [(rule, popcount(rule_mask(dataset, rule))) for rule in rules]
    covered = [(rule, n) for rule, n in covered if n > 0]
    covered.sort(key=lambda pair: -pair[1])
    return [rule for rule, _ in covered[: config.max_candidates]]


# ---------------------------------------------------------------------------
# Naive oracle
# ---------------------------------------------------------------------------

def _naive_columns(dataset: Dataset) -> dict[str, tuple[str, list]]:
    cols = {}
    for col in dataset.columns:
        values = [
            None if is_null else value
            for value, is_null in zip(col.data.tolist(), col.nulls.tolist())
        ]
        cols[col.name] = (col.ctype, values)
    return cols


def _naive_satisfies(ctype: str, value, pred: AtomicPredicate) -> bool:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return False
    if isinstance(pred, Equals):
        if ctype in CONTINUOUS_TYPES:
            return value == _bound_as_float(ctype, pred.value)
        return value == pred.value
    if isinstance(pred, InSet):
        if ctype in CONTINUOUS_TYPES:
            return any(value == _bound_as_float(ctype, v) for v in pred.values)
        return value in pred.values
    if isinstance(pred, Range):
        if pred.low is not None:
            low = _bound_as_float(ctype, pred.low)
            if value < low or (value == low and not pred.low_inclusive):
                return False
        if pred.high is not None:
            high = _bound_as_float(ctype, pred.high)
            if value > high or (value == high and not pred.high_inclusive):
                return False
        return True
    raise TypeError(f"not an atomic predicate: {pred!r}")


def _bound_as_float(ctype: str, raw) -> float:
    if isinstance(raw, str):
        ms = _parse_temporal(raw)
        if ms is None:
            raise ValueError(f"bound {raw!r} is not ISO-8601")
        return ms
    return float(raw)


def naive_cover(
    dataset: Dataset,
    rule: DrillRule,
    columns: dict[str, tuple[str, list]] | None = None,
) -> set[int]:
    """Row indices satisfying every filter of the rule, by plain scan.

    ``columns`` may carry a prepared ``_naive_columns`` map so batch callers
    avoid re-extracting the dataset on every rule.
    """
    cols = columns if columns is not None else _naive_columns(dataset)
    rows = set(range(dataset.row_count))
    for pred in rule.filters:
        ctype, values = cols[pred.field]
        rows = {i for i in rows if _naive_satisfies(ctype, values[i], pred)}
    return rows


def naive_mcount(
    dataset: Dataset,
    rule: DrillRule,
    ruleset: RuleSet,
    columns: dict[str, tuple[str, list]] | None = None,
) -> int:
    cols = columns if columns is not None else _naive_columns(dataset)
    covered: set[int] = set()
    for r in ruleset:
        covered |= naive_cover(dataset, r, cols)
    return len(naive_cover(dataset, rule, cols) - covered)


def brute_force_best(
    dataset: Dataset,
    candidates: Sequence[DrillRule],
    ruleset: RuleSet,
    relevance: RelevanceMap,
) -> ScoredCandidate:
    """Exhaustive argmax over candidates via naive row sets (no bitmasks)."""
    if not candidates:
        raise EmptyCandidates("no candidates to score")
    cols = _naive_columns(dataset)
    domains: dict[str, FieldDomain] = {}
    covered: set[int] = set()
    for r in ruleset:
        covered |= naive_cover(dataset, r, cols)
    best: ScoredCandidate | None = None
    for cand in candidates:
        for f in cand.fields:
            if f not in domains:
                domains[f] = field_domain(dataset, f)
        m = len(naive_cover(dataset, cand, cols) - covered)
        w = weight(cand, relevance, domains)
        scored = ScoredCandidate(cand, m, w, m * w, render_rule(cand))
        if best is None or _beats(scored, best):
            best = scored
    assert best is not None
    return best


__all__ = [
    "DrillRule",
    "RuleSet",
    "RelevanceMap",
    "ScoredCandidate",
    "EnumerationConfig",
    "GreedyTrace",
    "render_rule",
    "rule_mask",
    "ruleset_mask",
    "mcount",
    "weight",
    "score",
    "greedy_top_k",
    "enumerate_candidates",
    "naive_cover",
    "naive_mcount",
    "brute_force_best",
]
