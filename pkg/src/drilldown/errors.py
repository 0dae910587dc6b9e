"""Shared error catalog.

Every engine error carries a stable ``code`` (the API error catalog key) and
the HTTP status the service layer maps it to.
"""

from __future__ import annotations


class DrilldownError(Exception):
    code = "INTERNAL"
    http_status = 500


# --- tabular ---------------------------------------------------------------

class MalformedCsv(DrilldownError):
    code = "MALFORMED_CSV"
    http_status = 400


class CellCapExceeded(DrilldownError):
    code = "CELL_CAP_EXCEEDED"
    http_status = 413


class DuplicateColumn(DrilldownError):
    code = "DUPLICATE_COLUMN"
    http_status = 400


class UnknownField(DrilldownError):
    code = "UNKNOWN_FIELD"
    http_status = 400


class TypeMismatch(DrilldownError):
    code = "TYPE_MISMATCH"
    http_status = 400


class NotBinnable(DrilldownError):
    code = "NOT_BINNABLE"
    http_status = 400


# --- rules -----------------------------------------------------------------

class MissingDomain(DrilldownError):
    code = "MISSING_DOMAIN"
    http_status = 500


class MissingRelevance(DrilldownError):
    code = "MISSING_RELEVANCE"
    http_status = 500


class EmptyCandidates(DrilldownError):
    code = "EMPTY_CANDIDATES"
    http_status = 400


# --- intent ----------------------------------------------------------------

class OutOfOrderTimestamp(DrilldownError):
    code = "OUT_OF_ORDER_TIMESTAMP"
    http_status = 400


class UnmappableGesture(DrilldownError):
    code = "UNMAPPABLE_GESTURE"
    http_status = 400


class UnparseableFilterExpression(DrilldownError):
    code = "UNPARSEABLE_FILTER_EXPRESSION"
    http_status = 400


class EmptyIntent(DrilldownError):
    code = "EMPTY_INTENT"
    http_status = 400


# --- chartspec -------------------------------------------------------------

class StructuralError(DrilldownError):
    code = "STRUCTURAL_ERROR"
    http_status = 400


class UnsupportedFeature(DrilldownError):
    code = "UNSUPPORTED_FEATURE"
    http_status = 400


class ConflictingFilter(DrilldownError):
    code = "CONFLICTING_FILTER"
    http_status = 409


# --- tree ------------------------------------------------------------------

class InvalidSpec(DrilldownError):
    code = "INVALID_SPEC"
    http_status = 400


class UnknownParent(DrilldownError):
    code = "UNKNOWN_PARENT"
    http_status = 404


class UnknownNode(DrilldownError):
    code = "UNKNOWN_NODE"
    http_status = 404


class NotALeaf(DrilldownError):
    code = "NOT_A_LEAF"
    http_status = 409


class CannotDropRoot(DrilldownError):
    code = "CANNOT_DROP_ROOT"
    http_status = 409


# --- llm -------------------------------------------------------------------

class AdapterUnavailable(DrilldownError):
    code = "ADAPTER_UNAVAILABLE"
    http_status = 502


class AdapterTimeout(DrilldownError):
    code = "TIMEOUT"
    http_status = 504


class UnparseablePayload(DrilldownError):
    code = "UNPARSEABLE_PAYLOAD"
    http_status = 502


class SchemaMismatch(DrilldownError):
    code = "SCHEMA_MISMATCH"
    http_status = 502


class MissingFixture(DrilldownError):
    code = "MISSING_FIXTURE"
    http_status = 500


# --- insight ---------------------------------------------------------------

class UnparseableInsightPayload(DrilldownError):
    code = "UNPARSEABLE_INSIGHT_PAYLOAD"
    http_status = 502


# --- service ---------------------------------------------------------------

class SessionNotFound(DrilldownError):
    code = "SESSION_NOT_FOUND"
    http_status = 404


class DatasetLimitExceeded(DrilldownError):
    code = "LIMIT_EXCEEDED"
    http_status = 409


class DrillInFlight(DrilldownError):
    code = "DRILL_IN_FLIGHT"
    http_status = 409


class NoDataset(DrilldownError):
    code = "NO_DATASET"
    http_status = 409


class UnknownTag(DrilldownError):
    code = "UNKNOWN_TAG"
    http_status = 404
