"""The task loops: render prompt, call the model, parse, validate, apply.

A session drives four sequential tasks over one ontology. Hierarchy runs
first and rebuilds the concept tree each iteration; definitions,
relationships and properties run only after the hierarchy is complete and
enrich the fixed tree. Every iteration is recorded whole (prompt, response,
delta, validation, quarantined rows) and parks for human review in
supervised mode; autonomous mode commits on its own only when the result
passes strict validation.

Committed state is snapshotted by content checksum, which is what makes
Revert bit-exact and replayed sessions reproducible.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum

from .dotcodec import EdgeDirection, extract_dot_block, hierarchy_from_dot, parse_dot
from .edits import Edit, apply_edits, edit_from_doc, edit_to_doc
from .errors import (
    CyclicHierarchyError,
    DotSyntaxError,
    EmptyGraphError,
    GatewayTimeoutError,
    InvalidConceptNameError,
    InvalidTransitionError,
    NoDotBlockError,
    NoTableFoundError,
    TransportError,
    UndirectedGraphError,
    UnknownIterationError,
)
from .gateway import (
    ChatRequest,
    ChatResponse,
    Gateway,
    ResponseSignal,
    ResponseTransport,
    detect_refusal_or_empty,
)
from .normalize import NormalizationRules, default_rules, normalize
from .ontology import (
    Concept,
    Ontology,
    OntologyDelta,
    Property,
    apply_delta,
    diff,
    restore,
    snapshot,
)
from .prompts import (
    PromptEngine,
    PromptTemplate,
    RenderedPrompt,
    TaskKind,
    default_templates,
)
from .records import (
    RecordKind,
    RejectReason,
    RejectedRow,
    detect_table_runaway,
    parse_delimited,
    rows_to_triples,
)
from .validation import Policy, ValidationReport, validate

logger = logging.getLogger(__name__)


class ExecutionMode(str, Enum):
    SUPERVISED = "supervised"
    AUTONOMOUS = "autonomous"


class RunStatus(str, Enum):
    IDLE = "Idle"
    AWAITING_RESPONSE = "AwaitingResponse"
    AWAITING_REVIEW = "AwaitingReview"
    PAUSED = "Paused"
    COMPLETED = "Completed"
    ABORTED = "Aborted"


class Decision(str, Enum):
    AUTO_ACCEPTED = "AutoAccepted"
    HUMAN_ACCEPTED = "HumanAccepted"
    REPEATED = "Repeated"
    REVERTED = "Reverted"
    EDITED_THEN_ACCEPTED = "EditedThenAccepted"


ACCEPTED_DECISIONS = frozenset({
    Decision.AUTO_ACCEPTED, Decision.HUMAN_ACCEPTED,
    Decision.EDITED_THEN_ACCEPTED,
})


class StopReason(str, Enum):
    NO_NEW_INFORMATION = "NoNewInformation"
    ITERATION_LIMIT = "IterationLimit"
    CONCEPT_LIMIT = "ConceptLimit"
    DEPTH_LIMIT = "DepthLimit"
    BREADTH_LIMIT = "BreadthLimit"
    COVERAGE_COMPLETE = "CoverageComplete"
    PLAN_EXHAUSTED = "PlanExhausted"


class Command(str, Enum):
    PAUSE = "pause"
    RESUME = "resume"
    REPEAT = "repeat"
    REVERT = "revert"
    ACCEPT = "accept"
    ACCEPT_WITH_EDITS = "accept_with_edits"
    ABORT = "abort"


_ACTIVE_STATUSES = frozenset({
    RunStatus.AWAITING_RESPONSE, RunStatus.AWAITING_REVIEW, RunStatus.PAUSED,
})

_RUNAWAY_REMINDER = (
    "Reminder: answer with plain lines in the requested delimited layout,"
    " one record per line. Do not draw a table.")


@dataclass(frozen=True)
class StoppingCriteria:
    max_iterations: int | None = None
    max_concepts: int | None = None
    max_depth: int | None = None
    max_breadth: int | None = None
    no_new_info_window: int = 2

    def __post_init__(self):
        if self.no_new_info_window < 1:
            raise ValueError("no_new_info_window must be at least 1")

    def to_doc(self) -> dict:
        return {"max_iterations": self.max_iterations,
                "max_concepts": self.max_concepts,
                "max_depth": self.max_depth,
                "max_breadth": self.max_breadth,
                "no_new_info_window": self.no_new_info_window}

    @classmethod
    def from_doc(cls, doc: dict) -> StoppingCriteria:
        return cls(max_iterations=doc.get("max_iterations"),
                   max_concepts=doc.get("max_concepts"),
                   max_depth=doc.get("max_depth"),
                   max_breadth=doc.get("max_breadth"),
                   no_new_info_window=doc.get("no_new_info_window", 2))


@dataclass(frozen=True)
class SessionConfig:
    domain_label: str = "autonomous driving"
    mode: ExecutionMode = ExecutionMode.SUPERVISED
    direction: EdgeDirection = EdgeDirection.PARENT_TO_CHILD
    concepts_per_iteration: int = 10
    batch_size: int = 10
    runs_per_pair: int = 5
    relationship_scope: tuple[str, ...] = ()
    property_scope: tuple[str, ...] = ()
    stopping: StoppingCriteria = field(default_factory=StoppingCriteria)
    rules: NormalizationRules = field(default_factory=default_rules)

    def to_doc(self) -> dict:
        return {"domain_label": self.domain_label,
                "mode": self.mode.value,
                "direction": self.direction.value,
                "concepts_per_iteration": self.concepts_per_iteration,
                "batch_size": self.batch_size,
                "runs_per_pair": self.runs_per_pair,
                "relationship_scope": list(self.relationship_scope),
                "property_scope": list(self.property_scope),
                "stopping": self.stopping.to_doc(),
                "rules": self.rules.to_doc()}

    @classmethod
    def from_doc(cls, doc: dict) -> SessionConfig:
        from .normalize import rules_from_doc
        kwargs = {}
        if "rules" in doc:
            kwargs["rules"] = rules_from_doc(doc["rules"])
        if "stopping" in doc:
            kwargs["stopping"] = StoppingCriteria.from_doc(doc["stopping"])
        return cls(
            domain_label=doc.get("domain_label", "autonomous driving"),
            mode=ExecutionMode(doc.get("mode", "supervised")),
            direction=EdgeDirection(doc.get("direction", "parent-to-child")),
            concepts_per_iteration=doc.get("concepts_per_iteration", 10),
            batch_size=doc.get("batch_size", 10),
            runs_per_pair=doc.get("runs_per_pair", 5),
            relationship_scope=tuple(doc.get("relationship_scope", ())),
            property_scope=tuple(doc.get("property_scope", ())),
            **kwargs)


@dataclass
class Iteration:
    """One full loop pass, recorded whole."""

    index: int
    kind: TaskKind
    prompt: RenderedPrompt
    ordinal: int = 0
    response: ChatResponse | None = None
    signal: ResponseSignal | None = None
    delta: OntologyDelta = field(default_factory=OntologyDelta)
    validation: ValidationReport | None = None
    rejected_rows: tuple[RejectedRow, ...] = ()
    parse_warnings: tuple[str, ...] = ()
    batch_ids: tuple[str, ...] = ()
    pair: tuple[str, str] | None = None
    run_no: int | None = None
    runaway_retry: bool = False
    failure: str | None = None
    decision: Decision | None = None
    snapshot_ref: str | None = None
    edits: tuple[Edit, ...] = ()

    def to_doc(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind.value,
            "ordinal": self.ordinal,
            "prompt": {
                "text": self.prompt.text,
                "task": self.prompt.task.value,
                "placeholder_bindings": dict(self.prompt.placeholder_bindings),
                "length_chars": self.prompt.length_chars,
                "length_warning": self.prompt.length_warning,
            },
            "response": None if self.response is None else {
                "text": self.response.text,
                "latency_ms": self.response.latency_ms,
                "transport": self.response.transport.value,
                "truncated": self.response.truncated,
            },
            "signal": self.signal.value if self.signal else None,
            "delta": self.delta.to_doc(),
            "validation": self.validation.to_doc() if self.validation else None,
            "rejected_rows": [r.to_doc() for r in self.rejected_rows],
            "parse_warnings": list(self.parse_warnings),
            "batch_ids": list(self.batch_ids),
            "pair": list(self.pair) if self.pair else None,
            "run_no": self.run_no,
            "runaway_retry": self.runaway_retry,
            "failure": self.failure,
            "decision": self.decision.value if self.decision else None,
            "snapshot_ref": self.snapshot_ref,
            "edits": [edit_to_doc(e) for e in self.edits],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> Iteration:
        prompt_doc = doc["prompt"]
        response_doc = doc.get("response")
        return cls(
            index=doc["index"],
            kind=TaskKind(doc["kind"]),
            ordinal=doc.get("ordinal", 0),
            prompt=RenderedPrompt(
                text=prompt_doc["text"],
                task=TaskKind(prompt_doc["task"]),
                placeholder_bindings=dict(prompt_doc.get("placeholder_bindings", {})),
                length_chars=prompt_doc["length_chars"],
                length_warning=prompt_doc.get("length_warning", False)),
            response=None if response_doc is None else ChatResponse(
                text=response_doc["text"],
                latency_ms=response_doc["latency_ms"],
                transport=ResponseTransport(response_doc["transport"]),
                truncated=response_doc.get("truncated", False)),
            signal=ResponseSignal(doc["signal"]) if doc.get("signal") else None,
            delta=OntologyDelta.from_doc(doc.get("delta", {})),
            validation=(ValidationReport.from_doc(doc["validation"])
                        if doc.get("validation") else None),
            rejected_rows=tuple(RejectedRow.from_doc(r)
                                for r in doc.get("rejected_rows", ())),
            parse_warnings=tuple(doc.get("parse_warnings", ())),
            batch_ids=tuple(doc.get("batch_ids", ())),
            pair=tuple(doc["pair"]) if doc.get("pair") else None,
            run_no=doc.get("run_no"),
            runaway_retry=doc.get("runaway_retry", False),
            failure=doc.get("failure"),
            decision=Decision(doc["decision"]) if doc.get("decision") else None,
            snapshot_ref=doc.get("snapshot_ref"),
            edits=tuple(edit_from_doc(e) for e in doc.get("edits", ())),
        )


@dataclass
class TaskRun:
    kind: TaskKind
    status: RunStatus = RunStatus.IDLE
    iterations: list[Iteration] = field(default_factory=list)
    stop_reason: StopReason | None = None
    resume_to: RunStatus | None = None
    base_checksum: str | None = None

    def accepted(self) -> list[Iteration]:
        return [i for i in self.iterations if i.decision in ACCEPTED_DECISIONS]

    def parked(self) -> Iteration | None:
        if self.status is RunStatus.AWAITING_REVIEW and self.iterations:
            return self.iterations[-1]
        return None

    def next_index(self) -> int:
        return len(self.iterations) + 1

    def to_doc(self) -> dict:
        return {"kind": self.kind.value,
                "status": self.status.value,
                "stop_reason": self.stop_reason.value if self.stop_reason else None,
                "resume_to": self.resume_to.value if self.resume_to else None,
                "base_checksum": self.base_checksum,
                "iteration_count": len(self.iterations)}


@dataclass(frozen=True)
class StopVerdict:
    stop: bool
    reason: StopReason | None = None


class Session:
    """Mutable session state plus the loop mechanics.

    All mutation happens through :meth:`step` and :meth:`control`; both
    build the would-be next state fully before touching the session, so a
    rejected command leaves everything as it was.
    """

    def __init__(
        self,
        seed: Ontology,
        config: SessionConfig,
        gateway: Gateway,
        templates: dict[TaskKind, PromptTemplate] | None = None,
        session_id: str | None = None,
        created_at: str | None = None,
    ):
        self.id = session_id or uuid.uuid4().hex
        self.config = config
        self.ontology = seed
        self.gateway = gateway
        self.engine = PromptEngine(
            templates=templates if templates is not None
            else default_templates(config.direction),
            domain_label=config.domain_label,
            direction=config.direction,
        )
        self.runs: dict[TaskKind, TaskRun] = {
            kind: TaskRun(kind=kind) for kind in TaskKind}
        self.snapshots: dict[str, bytes] = {}
        self.seed_checksum = self._store_snapshot(seed)
        self.sequence_no = 0
        self.step_count = 0
        self.active_kind: TaskKind | None = None
        self.created_at = created_at or datetime.now(timezone.utc).isoformat()

    # -- snapshots -------------------------------------------------------------

    def _store_snapshot(self, ontology: Ontology) -> str:
        ref = ontology.checksum()
        if ref not in self.snapshots:
            self.snapshots[ref] = snapshot(ontology)
        return ref

    # -- stepping ----------------------------------------------------------------

    def step(self, kind: TaskKind) -> Iteration | None:
        """Run one loop pass for ``kind``.

        Returns the recorded iteration, or None when the task had nothing
        left to do and moved straight to Completed.
        """
        run = self.runs[kind]
        self._check_step_allowed(kind, run)
        if run.base_checksum is None:
            run.base_checksum = self._store_snapshot(self.ontology)
        verdict = self.evaluate_stopping(kind)
        if verdict.stop:
            run.status = RunStatus.COMPLETED
            run.stop_reason = verdict.reason
            logger.info("%s task complete before stepping: %s", kind.value,
                        verdict.reason.value)
            return None
        self.active_kind = kind
        run.status = RunStatus.AWAITING_RESPONSE
        try:
            iteration = self._execute(kind, run)
        except Exception:
            run.status = RunStatus.IDLE
            raise
        self.step_count += 1
        iteration.ordinal = self.step_count
        run.iterations.append(iteration)
        if (self.config.mode is ExecutionMode.AUTONOMOUS
                and iteration.failure is None
                and iteration.validation is not None
                and iteration.validation.ok):
            self._commit(run, iteration, Decision.AUTO_ACCEPTED, ())
        else:
            run.status = RunStatus.AWAITING_REVIEW
        return iteration

    def _check_step_allowed(self, kind: TaskKind, run: TaskRun) -> None:
        if run.status is not RunStatus.IDLE:
            raise InvalidTransitionError(
                f"cannot step {kind.value} task while {run.status.value}")
        if kind is not TaskKind.HIERARCHY:
            hierarchy = self.runs[TaskKind.HIERARCHY]
            if hierarchy.status is not RunStatus.COMPLETED:
                raise InvalidTransitionError(
                    f"{kind.value} task requires a completed hierarchy;"
                    f" hierarchy is {hierarchy.status.value}")
        for other in self.runs.values():
            if other.kind is not kind and other.status in _ACTIVE_STATUSES:
                raise InvalidTransitionError(
                    f"{other.kind.value} task is {other.status.value};"
                    " one task at a time")

    # -- task execution -------------------------------------------------------

    def _execute(self, kind: TaskKind, run: TaskRun) -> Iteration:
        if kind is TaskKind.HIERARCHY:
            return self._execute_hierarchy(run)
        if kind is TaskKind.DEFINITION:
            return self._execute_definition(run)
        if kind is TaskKind.RELATIONSHIP:
            return self._execute_relationship(run)
        return self._execute_property(run)

    def _call(self, prompt_text: str) -> ChatResponse:
        # Number the exchange only once it succeeds; a failed call must not
        # shift sequence alignment for transcripts replayed by position.
        response = self.gateway.complete(ChatRequest(
            prompt_text=prompt_text, session_id=self.id,
            sequence_no=self.sequence_no + 1))
        self.sequence_no += 1
        return response

    def _gateway_exchange(
        self, iteration: Iteration, prompt_text: str,
    ) -> ChatResponse | None:
        """One call with failures recorded on the iteration, not raised."""
        try:
            response = self._call(prompt_text)
        except (GatewayTimeoutError, TransportError) as exc:
            iteration.failure = f"gateway: {exc}"
            return None
        iteration.response = response
        iteration.signal = detect_refusal_or_empty(response)
        return response

    def _execute_hierarchy(self, run: TaskRun) -> Iteration:
        prompt = self.engine.render_hierarchy_prompt(
            self.ontology, batch_size=self.config.concepts_per_iteration)
        iteration = Iteration(index=run.next_index(), kind=TaskKind.HIERARCHY,
                              prompt=prompt)
        response = self._gateway_exchange(iteration, prompt.text)
        if response is None:
            return iteration
        if iteration.signal is not ResponseSignal.OK:
            iteration.failure = f"response classified {iteration.signal.value}"
            return iteration
        try:
            block = extract_dot_block(response.text)
            graph, diagnostics = parse_dot(block)
            concepts, edges = hierarchy_from_dot(graph, self.config.direction)
        except (NoDotBlockError, DotSyntaxError, EmptyGraphError,
                UndirectedGraphError, InvalidConceptNameError) as exc:
            iteration.failure = f"{type(exc).__name__}: {exc}"
            return iteration
        iteration.parse_warnings = tuple(
            f"line {w.line}: {w.kind.value}: {w.text}"
            for w in diagnostics.warnings)
        candidate = self._hierarchy_candidate(concepts, edges)
        iteration.delta = diff(self.ontology, candidate)
        iteration.validation = validate(candidate, Policy.STRICT)
        if iteration.delta.removed_concepts:
            logger.info(
                "hierarchy response dropped %d concept(s): %s",
                len(iteration.delta.removed_concepts),
                ", ".join(sorted(iteration.delta.removed_concepts)))
        return iteration

    def _hierarchy_candidate(self, concepts, edges) -> Ontology:
        """The response's tree, with payloads of surviving concepts kept."""
        merged: dict[str, Concept] = {}
        for concept in concepts:
            existing = self.ontology.concepts.get(concept.id)
            merged[concept.id] = existing if existing is not None else concept
        triples = {k: t for k, t in self.ontology.triples.items()
                   if t.subject in merged and t.object in merged}
        return Ontology(concepts=merged, hierarchy=frozenset(edges),
                        triples=triples, version=self.ontology.version)

    def undefined_ids(self) -> list[str]:
        return sorted(cid for cid, c in self.ontology.concepts.items()
                      if not c.definition)

    def _execute_definition(self, run: TaskRun) -> Iteration:
        batch_ids = tuple(self.undefined_ids()[:self.config.batch_size])
        prompt = self.engine.render_definition_prompt(
            self.ontology, [self.ontology.display(cid) for cid in batch_ids])
        iteration = Iteration(index=run.next_index(), kind=TaskKind.DEFINITION,
                              prompt=prompt, batch_ids=batch_ids)
        response = self._gateway_exchange(iteration, prompt.text)
        if response is None:
            return iteration
        if iteration.signal is not ResponseSignal.OK:
            iteration.failure = f"response classified {iteration.signal.value}"
            return iteration
        text = self._retry_if_runaway(iteration, response.text)
        if text is None:
            return iteration
        batch = parse_delimited(
            text, self.engine.definition_delimiter, expected_arity=2,
            kind=RecordKind.DEFINITION, strip_enumeration=True)
        updates, unknown = self._definition_updates(batch.rows)
        iteration.rejected_rows = tuple(batch.rejected) + tuple(unknown)
        if not any(not self.ontology.concepts[cid].definition for cid in updates):
            iteration.failure = "batch produced no new definitions"
            return iteration
        concepts = dict(self.ontology.concepts)
        for cid, definition in updates.items():
            concepts[cid] = replace(concepts[cid], definition=definition)
        candidate = self.ontology.evolve(concepts=concepts, bump=False)
        iteration.delta = diff(self.ontology, candidate)
        iteration.validation = validate(candidate, Policy.STRICT)
        return iteration

    def _retry_if_runaway(self, iteration: Iteration, text: str) -> str | None:
        """Transparent one-time re-ask when the answer degenerates into
        separator noise; the retry failure modes park the iteration."""
        if not detect_table_runaway(text):
            return text
        logger.warning("runaway table detected; re-asking once with a reminder")
        iteration.runaway_retry = True
        retry_text = iteration.prompt.text + "\n\n" + _RUNAWAY_REMINDER
        try:
            response = self._call(retry_text)
        except (GatewayTimeoutError, TransportError) as exc:
            iteration.failure = f"gateway on runaway retry: {exc}"
            return None
        iteration.response = response
        iteration.signal = detect_refusal_or_empty(response)
        if iteration.signal is not ResponseSignal.OK:
            iteration.failure = f"runaway retry classified {iteration.signal.value}"
            return None
        return response.text

    def _definition_updates(
        self, rows,
    ) -> tuple[dict[str, str], list[RejectedRow]]:
        updates: dict[str, str] = {}
        unknown: list[RejectedRow] = []
        for row in rows:
            concept = self.ontology.resolve(row.cells[0])
            if concept is None:
                unknown.append(RejectedRow(
                    line_no=row.line_no, raw_text=row.raw_text,
                    reason=RejectReason.UNKNOWN_CONCEPT))
            else:
                updates[concept.id] = row.cells[1]
        return updates, unknown

    def pair_plan(self) -> list[tuple[str, str]]:
        """Ordered cross product of the relationship scope (ids)."""
        if self.config.relationship_scope:
            scope = [self.ontology.require(ref).id
                     for ref in self.config.relationship_scope]
        else:
            scope = sorted(self.ontology.concepts)
        return [(s, o) for s in scope for o in scope]

    def relationship_cursor(self) -> tuple[int, int]:
        """(pair index, run index), both 0-based, derived from accepted work."""
        count = len(self.runs[TaskKind.RELATIONSHIP].accepted())
        return divmod(count, self.config.runs_per_pair)

    def _execute_relationship(self, run: TaskRun) -> Iteration:
        plan = self.pair_plan()
        pair_index, run_index = self.relationship_cursor()
        subject_id, object_id = plan[pair_index]
        prompt = self.engine.render_relationship_prompt(
            subject_id, object_id, self.ontology)
        iteration = Iteration(
            index=run.next_index(), kind=TaskKind.RELATIONSHIP, prompt=prompt,
            pair=(subject_id, object_id), run_no=run_index + 1,
            batch_ids=(subject_id, object_id))
        response = self._gateway_exchange(iteration, prompt.text)
        if response is None:
            return iteration
        if iteration.signal is not ResponseSignal.OK:
            # A refusal or blank answer is an answer: no relationships this
            # run. The loop records it and moves on.
            iteration.validation = validate(self.ontology, Policy.STRICT)
            return iteration
        try:
            batch = parse_delimited(
                response.text, self.engine.relationship_delimiter,
                expected_arity=3, kind=RecordKind.RELATIONSHIP,
                strip_enumeration=True)
            rows, unknown = rows_to_triples(
                batch, self.ontology,
                provenance=(f"{subject_id}->{object_id}:run-{run_index + 1}",))
        except NoTableFoundError:
            rows, unknown = [], []
            batch = None
        iteration.rejected_rows = (tuple(batch.rejected) if batch else ()) + tuple(unknown)
        normalized = normalize(set(rows), self.config.rules)
        candidate = (self.ontology.add_triples(normalized)
                     if normalized else self.ontology)
        iteration.delta = diff(self.ontology, candidate)
        iteration.validation = validate(candidate, Policy.STRICT)
        return iteration

    def property_scope_ids(self) -> list[str]:
        if self.config.property_scope:
            return [self.ontology.require(ref).id
                    for ref in self.config.property_scope]
        return sorted(self.ontology.concepts)

    def queried_property_ids(self) -> set[str]:
        queried: set[str] = set()
        for iteration in self.runs[TaskKind.PROPERTY].accepted():
            queried.update(iteration.batch_ids)
        return queried

    def _execute_property(self, run: TaskRun) -> Iteration:
        queried = self.queried_property_ids()
        remaining = [cid for cid in self.property_scope_ids()
                     if cid not in queried]
        batch_ids = tuple(remaining[:self.config.batch_size])
        prompt = self.engine.render_property_prompt(
            self.ontology, [self.ontology.display(cid) for cid in batch_ids])
        iteration = Iteration(index=run.next_index(), kind=TaskKind.PROPERTY,
                              prompt=prompt, batch_ids=batch_ids)
        response = self._gateway_exchange(iteration, prompt.text)
        if response is None:
            return iteration
        if iteration.signal is not ResponseSignal.OK:
            iteration.failure = f"response classified {iteration.signal.value}"
            return iteration
        text = self._retry_if_runaway(iteration, response.text)
        if text is None:
            return iteration
        batch = parse_delimited(
            text, self.engine.property_delimiter, expected_arity=3,
            kind=RecordKind.PROPERTY, strip_enumeration=True)
        concepts = dict(self.ontology.concepts)
        unknown: list[RejectedRow] = []
        for row in batch.rows:
            concept = self.ontology.resolve(row.cells[0])
            if concept is None:
                unknown.append(RejectedRow(
                    line_no=row.line_no, raw_text=row.raw_text,
                    reason=RejectReason.UNKNOWN_CONCEPT))
                continue
            current = concepts[concept.id]
            name, description = row.cells[1], row.cells[2]
            if any(p.name == name for p in current.properties):
                logger.info("dropping duplicate property %r on %s", name,
                            concept.id)
                continue
            concepts[concept.id] = replace(
                current,
                properties=current.properties + (Property(
                    name=name, description=description),))
        iteration.rejected_rows = tuple(batch.rejected) + tuple(unknown)
        candidate = self.ontology.evolve(concepts=concepts, bump=False)
        iteration.delta = diff(self.ontology, candidate)
        iteration.validation = validate(candidate, Policy.STRICT)
        return iteration

    # -- stopping --------------------------------------------------------------

    def evaluate_stopping(self, kind: TaskKind | None = None) -> StopVerdict:
        if kind is None:
            kind = self.active_kind
        if kind is None:
            raise InvalidTransitionError("no active task to evaluate")
        if kind is TaskKind.HIERARCHY:
            return self._hierarchy_verdict()
        if kind is TaskKind.DEFINITION:
            if not self.undefined_ids():
                return StopVerdict(True, StopReason.COVERAGE_COMPLETE)
            return StopVerdict(False)
        if kind is TaskKind.RELATIONSHIP:
            pair_index, _ = self.relationship_cursor()
            if pair_index >= len(self.pair_plan()):
                return StopVerdict(True, StopReason.PLAN_EXHAUSTED)
            return StopVerdict(False)
        remaining = [cid for cid in self.property_scope_ids()
                     if cid not in self.queried_property_ids()]
        if not remaining:
            return StopVerdict(True, StopReason.COVERAGE_COMPLETE)
        return StopVerdict(False)

    def _hierarchy_verdict(self) -> StopVerdict:
        criteria = self.config.stopping
        accepted = self.runs[TaskKind.HIERARCHY].accepted()
        if (criteria.max_iterations is not None
                and len(accepted) >= criteria.max_iterations):
            return StopVerdict(True, StopReason.ITERATION_LIMIT)
        if (criteria.max_concepts is not None
                and len(self.ontology.concepts) > criteria.max_concepts):
            return StopVerdict(True, StopReason.CONCEPT_LIMIT)
        try:
            stats = self.ontology.stats()
        except CyclicHierarchyError:
            # A reviewer may deliberately accept a cyclic draft and repair it
            # later; depth and breadth are undefined until then.
            stats = None
        if (stats is not None and criteria.max_depth is not None
                and stats.max_depth > criteria.max_depth):
            return StopVerdict(True, StopReason.DEPTH_LIMIT)
        if (stats is not None and criteria.max_breadth is not None
                and stats.max_breadth > criteria.max_breadth):
            return StopVerdict(True, StopReason.BREADTH_LIMIT)
        window = criteria.no_new_info_window
        if len(accepted) >= window and all(
                not it.delta.added_concepts for it in accepted[-window:]):
            return StopVerdict(True, StopReason.NO_NEW_INFORMATION)
        return StopVerdict(False)

    # -- committing ---------------------------------------------------------------

    def _commit(self, run: TaskRun, iteration: Iteration, decision: Decision,
                edits: tuple[Edit, ...]) -> None:
        new_ontology = apply_delta(self.ontology, iteration.delta)
        if edits:
            new_ontology = apply_edits(new_ontology, edits)
        self.ontology = new_ontology
        iteration.decision = decision
        iteration.edits = tuple(edits)
        iteration.snapshot_ref = self._store_snapshot(new_ontology)
        run.status = RunStatus.IDLE
        verdict = self.evaluate_stopping(run.kind)
        if verdict.stop:
            run.status = RunStatus.COMPLETED
            run.stop_reason = verdict.reason
            logger.info("%s task complete: %s", run.kind.value,
                        verdict.reason.value)

    # -- control -----------------------------------------------------------------

    def control(
        self,
        command: Command,
        task: TaskKind | None = None,
        to_iteration: int | None = None,
        edits: tuple[Edit, ...] = (),
    ) -> TaskRun:
        kind = task or self.active_kind
        if kind is None:
            raise InvalidTransitionError("no task has been started yet")
        run = self.runs[kind]
        if command is Command.PAUSE:
            return self._pause(run)
        if command is Command.RESUME:
            return self._resume(run)
        if command is Command.REPEAT:
            return self._repeat(run)
        if command is Command.ACCEPT:
            return self._accept(run, ())
        if command is Command.ACCEPT_WITH_EDITS:
            return self._accept(run, tuple(edits))
        if command is Command.REVERT:
            return self._revert(run, to_iteration)
        if command is Command.ABORT:
            return self._abort(run)
        raise InvalidTransitionError(f"unknown command {command!r}")

    def _pause(self, run: TaskRun) -> TaskRun:
        if run.status not in (RunStatus.IDLE, RunStatus.AWAITING_REVIEW):
            raise InvalidTransitionError(
                f"cannot pause a {run.status.value} task")
        run.resume_to = run.status
        run.status = RunStatus.PAUSED
        return run

    def _resume(self, run: TaskRun) -> TaskRun:
        if run.status is not RunStatus.PAUSED:
            raise InvalidTransitionError(
                f"cannot resume a {run.status.value} task")
        run.status = run.resume_to or RunStatus.IDLE
        run.resume_to = None
        return run

    def _repeat(self, run: TaskRun) -> TaskRun:
        parked = run.parked()
        if parked is None:
            raise InvalidTransitionError("no parked iteration to repeat")
        parked.decision = Decision.REPEATED
        run.status = RunStatus.IDLE
        return run

    def _accept(self, run: TaskRun, edits: tuple[Edit, ...]) -> TaskRun:
        parked = run.parked()
        if parked is None:
            raise InvalidTransitionError("no parked iteration to accept")
        if parked.failure is not None:
            raise InvalidTransitionError(
                f"iteration {parked.index} failed ({parked.failure});"
                " repeat it instead")
        decision = (Decision.EDITED_THEN_ACCEPTED if edits
                    else Decision.HUMAN_ACCEPTED)
        self._commit(run, parked, decision, edits)
        return run

    def _revert(self, run: TaskRun, to_iteration: int | None) -> TaskRun:
        if to_iteration is None or to_iteration < 0:
            raise UnknownIterationError("revert needs a target iteration >= 0")
        if run.status is RunStatus.ABORTED:
            raise InvalidTransitionError("cannot revert an aborted task")
        if to_iteration == 0:
            ref = run.base_checksum or self.seed_checksum
        else:
            target = next(
                (i for i in run.iterations
                 if i.index == to_iteration and i.decision in ACCEPTED_DECISIONS),
                None)
            if target is None:
                raise UnknownIterationError(
                    f"iteration {to_iteration} has no accepted snapshot")
            ref = target.snapshot_ref
        self.ontology = restore(self.snapshots[ref])
        for iteration in run.iterations:
            if iteration.index > to_iteration:
                if iteration.decision in ACCEPTED_DECISIONS or iteration.decision is None:
                    iteration.decision = Decision.REVERTED
        run.status = RunStatus.IDLE
        run.stop_reason = None
        run.resume_to = None
        return run

    def _abort(self, run: TaskRun) -> TaskRun:
        if run.status in (RunStatus.COMPLETED, RunStatus.ABORTED):
            raise InvalidTransitionError(
                f"cannot abort a {run.status.value} task")
        run.status = RunStatus.ABORTED
        return run


def create_session(
    seed: Ontology,
    config: SessionConfig | None = None,
    gateway: Gateway | None = None,
    templates: dict[TaskKind, PromptTemplate] | None = None,
    session_id: str | None = None,
) -> Session:
    if gateway is None:
        from .gateway import GatewayConfig, TransportMode
        gateway = Gateway(GatewayConfig(), TransportMode.REPLAY)
    return Session(seed=seed, config=config or SessionConfig(),
                   gateway=gateway, templates=templates, session_id=session_id)


# --- scripted decisions -------------------------------------------------------------


@dataclass(frozen=True)
class ScriptAction:
    action: str
    edits: tuple[Edit, ...] = ()
    revert_to: int | None = None


@dataclass(frozen=True)
class DecisionScript:
    """Recorded human decisions, keyed by iteration index.

    Replaying a session is transcript + script: the transcript answers the
    prompts, the script answers the review screens.
    """

    actions: dict[int, ScriptAction] = field(default_factory=dict)
    default: str | None = None

    @classmethod
    def from_doc(cls, doc: dict) -> DecisionScript:
        actions = {}
        for entry in doc.get("decisions", ()):
            actions[entry["iteration"]] = ScriptAction(
                action=entry["action"],
                edits=tuple(edit_from_doc(e) for e in entry.get("edits", ())),
                revert_to=entry.get("revert_to"))
        return cls(actions=actions, default=doc.get("default"))

    def to_doc(self) -> dict:
        entries = []
        for index in sorted(self.actions):
            act = self.actions[index]
            entry: dict = {"iteration": index, "action": act.action}
            if act.edits:
                entry["edits"] = [edit_to_doc(e) for e in act.edits]
            if act.revert_to is not None:
                entry["revert_to"] = act.revert_to
            entries.append(entry)
        return {"default": self.default, "decisions": entries}


_SCRIPT_COMMANDS = {
    "accept": Command.ACCEPT,
    "accept_with_edits": Command.ACCEPT_WITH_EDITS,
    "repeat": Command.REPEAT,
    "revert": Command.REVERT,
    "abort": Command.ABORT,
}


def run_task(
    session: Session,
    kind: TaskKind,
    script: DecisionScript | None = None,
    max_steps: int = 100_000,
) -> TaskRun:
    """Drive one task to completion.

    Autonomous sessions mostly step straight through; whenever an iteration
    parks, the script supplies the review decision. A parked iteration with
    no scripted decision stops the loop with InvalidTransition rather than
    guessing.
    """
    run = session.runs[kind]
    for _ in range(max_steps):
        if run.status in (RunStatus.COMPLETED, RunStatus.ABORTED):
            return run
        if run.status is RunStatus.IDLE:
            session.step(kind)
            continue
        if run.status is RunStatus.AWAITING_REVIEW:
            parked = run.iterations[-1]
            action = None
            if script is not None:
                action = script.actions.get(parked.index)
                if action is None and script.default is not None:
                    action = ScriptAction(action=script.default)
            if action is None:
                raise InvalidTransitionError(
                    f"iteration {parked.index} is parked for review and the"
                    " decision script has no entry for it")
            command = _SCRIPT_COMMANDS.get(action.action)
            if command is None:
                raise ValueError(f"unknown scripted action {action.action!r}")
            session.control(command, task=kind, edits=action.edits,
                            to_iteration=action.revert_to)
            continue
        raise InvalidTransitionError(
            f"task is {run.status.value}; cannot continue the loop")
    raise RuntimeError(f"task loop exceeded {max_steps} steps")
