"""HTTP facade over sessions and archives.

Every behavior lives in the core modules; handlers only translate between
HTTP and domain calls. One lock per session serializes steps and commands,
GET handlers take the same lock briefly so they never observe a half-applied
step. Sessions persist to one archive directory each under ``data_dir`` and
are lazily reloaded after a restart.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .dotcodec import ontology_from_dot
from .edits import edit_from_doc
from .errors import (
    CyclicHierarchyError,
    EditRejectedError,
    InvalidTransitionError,
    OntoDistillError,
    UnknownIterationError,
    UnknownSessionError,
    UnknownTaskError,
)
from .gateway import GatewayConfig, TransportMode
from .orchestrator import Command, Session, SessionConfig
from .prompts import PromptTemplate, TaskKind, validate_template
from .store import ExportFormat, SessionStore, build_gateway, export

_STATUS_BY_CODE = {
    "unknown_session": 404,
    "unknown_iteration": 404,
    "unknown_task": 404,
    "invalid_transition": 409,
    "edit_rejected": 422,
    "replay_miss": 409,
}
_DEFAULT_STATUS = 422


class TransportSpec(BaseModel):
    mode: str = "replay"
    endpoint_url: str | None = None
    model_name: str | None = None
    timeout_s: float | None = None
    max_retries: int | None = None
    backoff_base_s: float | None = None
    api_key_env: str | None = None
    transcript_path: str | None = None


class CreateSessionRequest(BaseModel):
    seed_dot: str
    config: dict = Field(default_factory=dict)
    transport: TransportSpec = Field(default_factory=TransportSpec)
    session_id: str | None = None


class ControlRequest(BaseModel):
    command: str
    task: str | None = None
    to_iteration: int | None = None
    edits: list[dict] = Field(default_factory=list)


class TemplateUpdate(BaseModel):
    context: str
    instruction: str
    format_spec: str


class SessionSummary(BaseModel):
    id: str
    created_at: str
    config: dict
    seed_checksum: str
    checksum: str
    stats: dict
    runs: dict
    active_kind: str | None
    step_count: int
    sequence_no: int


class StepResult(BaseModel):
    iteration: dict | None
    run: dict
    checksum: str


class ControlResult(BaseModel):
    run: dict
    checksum: str


class TaskLog(BaseModel):
    run: dict
    iterations: list[dict]


class TemplateView(BaseModel):
    task: str
    context: str
    instruction: str
    format_spec: str


@dataclass
class _Handle:
    session: Session
    store: SessionStore
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionRegistry:
    """Live sessions by id, lazily reloaded from disk."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self._handles: dict[str, _Handle] = {}
        self._registry_lock = threading.Lock()

    def add(self, session: Session, store: SessionStore) -> _Handle:
        handle = _Handle(session=session, store=store)
        with self._registry_lock:
            self._handles[session.id] = handle
        return handle

    def get(self, session_id: str) -> _Handle:
        with self._registry_lock:
            handle = self._handles.get(session_id)
        if handle is not None:
            return handle
        root = self.data_dir / session_id
        if not (root / "manifest.json").exists():
            raise UnknownSessionError(f"no session {session_id}")
        if (root / "transcript.jsonl").exists():
            gateway = build_gateway(root, TransportMode.REPLAY)
        else:
            gateway = None
        session, store = SessionStore.load(root, gateway=gateway)
        return self.add(session, store)


def _gateway_config(spec: TransportSpec) -> GatewayConfig:
    defaults = GatewayConfig()
    return GatewayConfig(
        endpoint_url=spec.endpoint_url,
        model_name=spec.model_name or defaults.model_name,
        timeout_s=spec.timeout_s or defaults.timeout_s,
        max_retries=spec.max_retries if spec.max_retries is not None
        else defaults.max_retries,
        backoff_base_s=spec.backoff_base_s or defaults.backoff_base_s,
        api_key_env=spec.api_key_env or defaults.api_key_env,
    )


def _task_kind(raw: str) -> TaskKind:
    try:
        return TaskKind(raw)
    except ValueError:
        raise UnknownTaskError(f"no task kind {raw!r}") from None


def _summary(session: Session) -> SessionSummary:
    try:
        stats = session.ontology.stats()
        depth: int | None = stats.max_depth
        breadth: int | None = stats.max_breadth
        undefined = stats.undefined_count
    except CyclicHierarchyError:
        # Depth and breadth are undefined while an accepted cycle awaits repair.
        depth = None
        breadth = None
        undefined = sum(
            1 for c in session.ontology.concepts.values() if not c.definition)
    return SessionSummary(
        id=session.id,
        created_at=session.created_at,
        config=session.config.to_doc(),
        seed_checksum=session.seed_checksum,
        checksum=session.ontology.checksum(),
        stats={"concept_count": len(session.ontology.concepts),
               "max_depth": depth,
               "max_breadth": breadth,
               "undefined_count": undefined,
               "triple_count": len(session.ontology.triples),
               "version": session.ontology.version},
        runs={kind.value: session.runs[kind].to_doc() for kind in TaskKind},
        active_kind=session.active_kind.value if session.active_kind else None,
        step_count=session.step_count,
        sequence_no=session.sequence_no,
    )


def create_app(data_dir: str | Path) -> FastAPI:
    app = FastAPI(title="ontodistill", version="0.1.0")
    registry = SessionRegistry(Path(data_dir))
    app.state.registry = registry

    @app.exception_handler(OntoDistillError)
    async def domain_error(request: Request, exc: OntoDistillError):
        status = _STATUS_BY_CODE.get(exc.code, _DEFAULT_STATUS)
        body = {"code": exc.code, "message": exc.message}
        if exc.detail is not None:
            body["detail"] = exc.detail
        return JSONResponse(status_code=status, content=body)

    @app.post("/sessions", response_model=SessionSummary, status_code=201)
    def create_session_endpoint(body: CreateSessionRequest) -> SessionSummary:
        seed, _ = ontology_from_dot(body.seed_dot)
        config = SessionConfig.from_doc(body.config)
        session = Session(
            seed=seed, config=config, gateway=None,
            session_id=body.session_id)
        root = registry.data_dir / session.id
        mode = TransportMode(body.transport.mode)
        if mode is TransportMode.RECORD:
            root.mkdir(parents=True, exist_ok=True)
        session.gateway = build_gateway(
            root, mode, config=_gateway_config(body.transport),
            transcript_path=body.transport.transcript_path)
        store = SessionStore.create(root, session)
        registry.add(session, store)
        return _summary(session)

    @app.get("/sessions", response_model=list[SessionSummary])
    def list_sessions() -> list[SessionSummary]:
        summaries = []
        if registry.data_dir.exists():
            for entry in registry.data_dir.iterdir():
                if not (entry / "manifest.json").exists():
                    continue
                handle = registry.get(entry.name)
                with handle.lock:
                    summaries.append(_summary(handle.session))
        summaries.sort(key=lambda s: s.created_at)
        return summaries

    @app.get("/sessions/{session_id}", response_model=SessionSummary)
    def get_session(session_id: str) -> SessionSummary:
        handle = registry.get(session_id)
        with handle.lock:
            return _summary(handle.session)

    @app.get("/sessions/{session_id}/ontology")
    def get_ontology(session_id: str, format: str = "doc") -> Response:
        try:
            fmt = ExportFormat(format)
        except ValueError:
            raise UnknownTaskError(f"no export format {format!r}") from None
        handle = registry.get(session_id)
        with handle.lock:
            data = export(handle.session.ontology, fmt)
        if fmt is ExportFormat.CANONICAL_DOC:
            return Response(content=data, media_type="application/json")
        return PlainTextResponse(content=data.decode("utf-8"))

    @app.get("/sessions/{session_id}/tasks/{kind}/log", response_model=TaskLog)
    def get_task_log(session_id: str, kind: str) -> TaskLog:
        task = _task_kind(kind)
        handle = registry.get(session_id)
        with handle.lock:
            run = handle.session.runs[task]
            return TaskLog(run=run.to_doc(),
                           iterations=[i.to_doc() for i in run.iterations])

    @app.post("/sessions/{session_id}/tasks/{kind}/step",
              response_model=StepResult)
    def step_task(session_id: str, kind: str) -> StepResult:
        task = _task_kind(kind)
        handle = registry.get(session_id)
        with handle.lock:
            iteration = handle.session.step(task)
            handle.store.sync(handle.session)
            return StepResult(
                iteration=iteration.to_doc() if iteration else None,
                run=handle.session.runs[task].to_doc(),
                checksum=handle.session.ontology.checksum())

    @app.post("/sessions/{session_id}/control", response_model=ControlResult)
    def control_session(session_id: str, body: ControlRequest) -> ControlResult:
        try:
            command = Command(body.command)
        except ValueError:
            raise InvalidTransitionError(
                f"no command {body.command!r}") from None
        task = _task_kind(body.task) if body.task else None
        try:
            edits = tuple(edit_from_doc(doc) for doc in body.edits)
        except (ValueError, KeyError) as exc:
            raise EditRejectedError(f"malformed edit document: {exc}") from exc
        handle = registry.get(session_id)
        with handle.lock:
            run = handle.session.control(
                command, task=task, to_iteration=body.to_iteration,
                edits=edits)
            handle.store.sync(handle.session)
            return ControlResult(run=run.to_doc(),
                                 checksum=handle.session.ontology.checksum())

    @app.get("/sessions/{session_id}/prompt-template/{kind}",
             response_model=TemplateView)
    def get_template(session_id: str, kind: str) -> TemplateView:
        task = _task_kind(kind)
        handle = registry.get(session_id)
        with handle.lock:
            template = handle.session.engine.templates[task]
        return TemplateView(task=task.value, context=template.context,
                            instruction=template.instruction,
                            format_spec=template.format_spec)

    @app.put("/sessions/{session_id}/prompt-template/{kind}",
             response_model=TemplateView)
    def put_template(session_id: str, kind: str,
                     body: TemplateUpdate) -> TemplateView:
        task = _task_kind(kind)
        handle = registry.get(session_id)
        template = PromptTemplate(task=task, context=body.context,
                                  instruction=body.instruction,
                                  format_spec=body.format_spec)
        validate_template(template)
        with handle.lock:
            handle.session.engine.templates[task] = template
            handle.store.save_templates(handle.session)
        return TemplateView(task=task.value, context=template.context,
                            instruction=template.instruction,
                            format_spec=template.format_spec)

    @app.get("/sessions/{session_id}/iterations/{ordinal}")
    def get_iteration(session_id: str, ordinal: int) -> dict:
        handle = registry.get(session_id)
        with handle.lock:
            for run in handle.session.runs.values():
                for iteration in run.iterations:
                    if iteration.ordinal == ordinal:
                        return iteration.to_doc()
        raise UnknownIterationError(
            f"session has no iteration with ordinal {ordinal}")

    return app
