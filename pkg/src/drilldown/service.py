"""Session-scoped HTTP API.

One analyst per session: datasets (at most ten), an exploration tree, an
interaction log, and provider configuration. Mutating endpoints serialize on
the session's drill lock; drill/insight requests reject with 409 instead of
queueing. Timestamps and session ids are injectable so recorded request
scripts replay byte-identically against the mock provider.
"""

from __future__ import annotations

import threading
import time
import uuid
from typing import Any, Callable

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import insight as insight_mod
from .chartspec import (
    ChartSpec,
    DEFAULT_MAX_RETRIES,
    Encoding,
    SelectionDecl,
    apply_drill,
    vega_type_for,
)
from .errors import (
    DatasetLimitExceeded,
    DrilldownError,
    DrillInFlight,
    EmptyIntent,
    NoDataset,
    SessionNotFound,
    UnknownTag,
)
from .intent import (
    InteractionLog,
    event_from_json,
    extract_base_filters,
    fuse_intent,
    log_from_json,
    record_event,
    set_tracking,
)
from .llm import REASONING_LEVELS, LlmAdapter, MockProvider, ProviderConfig
from .tabular import (
    BOOLEAN,
    CATEGORICAL,
    CELL_CAP,
    NUMERIC,
    TEMPORAL,
    Dataset,
    field_domain,
    ingest_csv,
    predicate_from_json,
    render_predicate,
)
from .tree import ExplorationTree, check_invariants

MAX_DATASETS = 10


def default_clock() -> int:
    return int(time.time() * 1000)


def sequential_ids(prefix: str = "s") -> Callable[[], str]:
    """Deterministic session-id factory for recorded request scripts."""
    counter = iter(range(1, 1_000_000))
    return lambda: f"{prefix}{next(counter)}"


class Session:
    """All per-analyst state; see module docstring for the locking model."""

    def __init__(
        self,
        session_id: str,
        clock: Callable[[], int],
        max_cells: int = CELL_CAP,
        max_retries: int = DEFAULT_MAX_RETRIES,
    ):
        self.id = session_id
        self.clock = clock
        self.max_cells = max_cells
        self.max_retries = max_retries
        self.datasets: dict[str, Dataset] = {}
        self.active_dataset: str | None = None
        self.tree: ExplorationTree | None = None
        self.log = InteractionLog()
        self.provider = ProviderConfig()
        self.drill_lock = threading.Lock()
        self.dimension_tags: list[dict] = []
        self.last_instruction: str | None = None
        self.pending_corrective: str | None = None

    @property
    def active_spec(self) -> ChartSpec:
        if self.tree is None:
            raise NoDataset("upload a dataset first")
        return self.tree.active.spec

    @property
    def active_data(self) -> Dataset:
        if self.active_dataset is None:
            raise NoDataset("upload a dataset first")
        return self.datasets[self.active_dataset]

    def bundle_or_none(self):
        try:
            return fuse_intent(
                extract_base_filters(self.active_spec), self.log, self.last_instruction
            )
        except EmptyIntent:
            return None

    def config_json(self) -> dict:
        return {
            "model_id": self.provider.model_id,
            "reasoning_level": self.provider.reasoning_level,
            "temperature": self.provider.temperature,
            "seed": self.provider.seed,
            "tracking_enabled": self.log.tracking_enabled,
        }

    def export_json(self) -> dict:
        return {
            "session_id": self.id,
            "config": self.config_json(),
            "active_dataset": self.active_dataset,
            "dataset_names": sorted(self.datasets),
            "tree": self.tree.to_json() if self.tree else None,
            "log": self.log.to_json(),
        }


def overview_spec(dataset: Dataset) -> ChartSpec:
    """Unfiltered root view: first categorical-ish field against a mean or count."""
    cats = [c for c in dataset.columns if c.ctype in (CATEGORICAL, BOOLEAN)]
    temporals = [c for c in dataset.columns if c.ctype == TEMPORAL]
    numerics = [c for c in dataset.columns if c.ctype == NUMERIC]
    x_col = (cats or temporals or list(dataset.columns))[0]
    y_col = next((c for c in numerics if c.name != x_col.name), None)
    encodings = {"x": Encoding(x_col.name, vega_type_for(x_col.ctype))}
    if y_col is not None:
        encodings["y"] = Encoding(y_col.name, "quantitative", "mean")
    else:
        encodings["y"] = Encoding(None, "quantitative", "count")
    mark = "line" if x_col.ctype == TEMPORAL and y_col is not None else "bar"
    selections = (SelectionDecl("brush", "interval", encodings=("x", "y")),)
    return ChartSpec(dataset.name, mark, encodings, (), selections)


def _dataset_summary(dataset: Dataset) -> dict:
    return {
        "name": dataset.name,
        "row_count": dataset.row_count,
        "columns": [
            {
                "name": c.name,
                "type": c.ctype,
                "cardinality": field_domain(dataset, c.name).cardinality,
            }
            for c in dataset.columns
        ],
    }


class DrillRequest(BaseModel):
    instruction: str | None = None
    dimension_tag: str | None = None


class JumpRequest(BaseModel):
    node_id: str


class SwitchRequest(BaseModel):
    leaf_id: str


class ConfigRequest(BaseModel):
    model_id: str | None = None
    reasoning_level: str | None = None
    tracking_enabled: bool | None = None


class RenderErrorRequest(BaseModel):
    node_id: str
    error_trace: str


def create_app(
    adapter: LlmAdapter | None = None,
    clock: Callable[[], int] | None = None,
    max_cells: int = CELL_CAP,
    id_factory: Callable[[], str] | None = None,
    check_tree_invariants: bool = False,
) -> FastAPI:
    app = FastAPI(title="drilldown", docs_url=None, redoc_url=None)
    app.state.sessions = {}
    app.state.adapter = adapter if adapter is not None else MockProvider()
    app.state.clock = clock or default_clock
    app.state.max_cells = max_cells
    app.state.id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
    app.state.check_tree_invariants = check_tree_invariants

    @app.exception_handler(DrilldownError)
    def _domain_error(request: Request, exc: DrilldownError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": {"code": exc.code, "message": str(exc)}},
        )

    def get_session(session_id: str) -> Session:
        session = app.state.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no session {session_id!r}")
        return session

    def sweep(session: Session) -> None:
        if app.state.check_tree_invariants and session.tree is not None:
            check_invariants(session.tree)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.post("/sessions", status_code=201)
    def create_session() -> dict:
        session = Session(
            app.state.id_factory(), app.state.clock, max_cells=app.state.max_cells
        )
        app.state.sessions[session.id] = session
        return {"session_id": session.id}

    @app.post("/sessions/import", status_code=201)
    def import_session(doc: dict) -> dict:
        session = Session(
            app.state.id_factory(), app.state.clock, max_cells=app.state.max_cells
        )
        config = doc.get("config", {})
        session.provider = ProviderConfig(
            model_id=config.get("model_id", "mock"),
            reasoning_level=config.get("reasoning_level", "medium"),
            temperature=config.get("temperature", 0.1),
            seed=config.get("seed", 42),
        )
        if doc.get("tree"):
            session.tree = ExplorationTree.from_json(doc["tree"])
        if doc.get("log"):
            session.log = log_from_json(doc["log"])
        session.active_dataset = None  # raw data never travels in an export
        app.state.sessions[session.id] = session
        sweep(session)
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}")
    def session_summary(session_id: str) -> dict:
        session = get_session(session_id)
        return {
            "session_id": session.id,
            "datasets": [_dataset_summary(d) for d in session.datasets.values()],
            "active_dataset": session.active_dataset,
            "config": session.config_json(),
            "has_tree": session.tree is not None,
        }

    @app.post("/sessions/{session_id}/datasets", status_code=201)
    def upload_dataset(session_id: str, file: UploadFile = File(...)) -> dict:
        session = get_session(session_id)
        with session.drill_lock:
            if len(session.datasets) >= MAX_DATASETS:
                raise DatasetLimitExceeded(
                    f"a session holds at most {MAX_DATASETS} data files"
                )
            name = (file.filename or "dataset").rsplit("/", 1)[-1]
            if name.endswith(".csv"):
                name = name[: -len(".csv")]
            dataset = ingest_csv(file.file.read(), name, max_cells=session.max_cells)
            session.datasets[dataset.name] = dataset
            first = session.active_dataset is None
            if first:
                session.active_dataset = dataset.name
                session.tree = ExplorationTree(
                    overview_spec(dataset), created_at=session.clock()
                )
            sweep(session)
            return {"dataset": _dataset_summary(dataset), "active": first}

    @app.post("/sessions/{session_id}/drill")
    def drill(session_id: str, body: DrillRequest) -> dict:
        session = get_session(session_id)
        if not session.drill_lock.acquire(blocking=False):
            raise DrillInFlight("another drill or insight request is in flight")
        try:
            spec = session.active_spec
            dataset = session.active_data
            instruction = body.instruction
            if body.dimension_tag is not None:
                tag = next(
                    (
                        t
                        for t in session.dimension_tags
                        if t["label"] == body.dimension_tag
                    ),
                    None,
                )
                if tag is None:
                    raise UnknownTag(f"no dimension tag {body.dimension_tag!r}")
                instruction = tag["label"]
            bundle = fuse_intent(extract_base_filters(spec), session.log, instruction)
            session.last_instruction = instruction
            result = apply_drill(session, bundle, app.state.adapter)
            if result.status == "ok":
                session.dimension_tags = [
                    {**d.to_json(), "source": "basic"} for d in result.basic_dimensions
                ]
            sweep(session)
            return result.to_json()
        finally:
            session.drill_lock.release()

    @app.post("/sessions/{session_id}/insights")
    def insights(session_id: str) -> dict:
        session = get_session(session_id)
        if not session.drill_lock.acquire(blocking=False):
            raise DrillInFlight("another drill or insight request is in flight")
        try:
            payload, dimensions = insight_mod.generate_insights(
                session, app.state.adapter
            )
            if dimensions or "recommendation" not in payload.errors:
                session.dimension_tags = [
                    {
                        "label": sc.label,
                        "field": sc.rule.fields[0],
                        "filter": sc.to_json()["filters"][0],
                        "score": sc.score,
                        "source": "high_level",
                    }
                    for sc in dimensions
                ]
            body = payload.to_json()
            body["high_level_dimensions"] = [sc.to_json() for sc in dimensions]
            return body
        finally:
            session.drill_lock.release()

    @app.get("/sessions/{session_id}/breadcrumb")
    def breadcrumb(session_id: str) -> dict:
        session = get_session(session_id)
        if session.tree is None:
            raise NoDataset("upload a dataset first")
        return {
            "breadcrumb": [
                {"id": node_id, "label": label}
                for node_id, label in session.tree.breadcrumb()
            ]
        }

    @app.get("/sessions/{session_id}/branches")
    def branches(session_id: str) -> dict:
        session = get_session(session_id)
        if session.tree is None:
            raise NoDataset("upload a dataset first")
        return {"branches": [b.to_json() for b in session.tree.branches()]}

    def _navigation_state(session: Session) -> dict:
        assert session.tree is not None
        return {
            "active_id": session.tree.active_id,
            "spec": session.tree.active.spec.to_json(),
            "breadcrumb": [
                {"id": node_id, "label": label}
                for node_id, label in session.tree.breadcrumb()
            ],
        }

    @app.post("/sessions/{session_id}/jump")
    def jump(session_id: str, body: JumpRequest) -> dict:
        session = get_session(session_id)
        if session.tree is None:
            raise NoDataset("upload a dataset first")
        with session.drill_lock:
            session.tree.jump_to(body.node_id)
            sweep(session)
            return _navigation_state(session)

    @app.post("/sessions/{session_id}/switch")
    def switch(session_id: str, body: SwitchRequest) -> dict:
        session = get_session(session_id)
        if session.tree is None:
            raise NoDataset("upload a dataset first")
        with session.drill_lock:
            session.tree.switch_branch(body.leaf_id)
            sweep(session)
            return _navigation_state(session)

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str) -> dict:
        session = get_session(session_id)
        if session.tree is None:
            raise NoDataset("upload a dataset first")
        with session.drill_lock:
            session.tree.reset()
            session.dimension_tags = []
            session.last_instruction = None
            session.pending_corrective = None
            sweep(session)
            return _navigation_state(session)

    @app.post("/sessions/{session_id}/interactions")
    def interactions(session_id: str, event: dict) -> dict:
        session = get_session(session_id)
        with session.drill_lock:
            try:
                parsed = event_from_json(event)
            except ValueError as exc:
                return JSONResponse(
                    status_code=400,
                    content={"error": {"code": "BAD_EVENT", "message": str(exc)}},
                )
            before = len(session.log.events)
            session.log = record_event(session.log, parsed)
            recorded = len(session.log.events) > before
            return {"recorded": recorded, "dropped": not recorded}

    @app.put("/sessions/{session_id}/config")
    def configure(session_id: str, body: ConfigRequest) -> dict:
        session = get_session(session_id)
        with session.drill_lock:
            updates: dict[str, Any] = {}
            if body.model_id is not None:
                updates["model_id"] = body.model_id
            if body.reasoning_level is not None:
                if body.reasoning_level not in REASONING_LEVELS:
                    return JSONResponse(
                        status_code=400,
                        content={
                            "error": {
                                "code": "BAD_CONFIG",
                                "message": f"reasoning_level must be one of {REASONING_LEVELS}",
                            }
                        },
                    )
                updates["reasoning_level"] = body.reasoning_level
            if updates:
                from dataclasses import replace

                session.provider = replace(session.provider, **updates)
            if body.tracking_enabled is not None:
                session.log = set_tracking(session.log, body.tracking_enabled)
            return {"config": session.config_json()}

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str) -> dict:
        return get_session(session_id).export_json()

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str) -> dict:
        session = get_session(session_id)
        body: dict[str, Any] = {
            "session_id": session.id,
            "config": session.config_json(),
            "has_dataset": session.active_dataset is not None,
            "dimension_tags": session.dimension_tags,
        }
        if session.tree is not None:
            body.update(_navigation_state(session))
            body["branches"] = [b.to_json() for b in session.tree.branches()]
        return body

    @app.post("/sessions/{session_id}/render-error")
    def render_error(session_id: str, body: RenderErrorRequest) -> dict:
        """Client-side render exception: revert to the pre-drill state.

        The failed leaf is dropped, its parent becomes active again, and the
        reported trace is carried into the next drill prompt as a corrective
        hint.
        """
        session = get_session(session_id)
        if session.tree is None:
            raise NoDataset("upload a dataset first")
        with session.drill_lock:
            session.tree.drop_leaf(body.node_id)
            session.pending_corrective = f"rendering failed: {body.error_trace}"
            sweep(session)
            return {"status": "rolled_back", **_navigation_state(session)}

    return app


__all__ = [
    "MAX_DATASETS",
    "Session",
    "create_app",
    "overview_spec",
    "default_clock",
    "sequential_ids",
]
