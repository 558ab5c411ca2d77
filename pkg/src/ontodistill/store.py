"""Durable session archives on the filesystem.

One directory per session:

    manifest.json        session metadata, config, run summaries, checksums
    iterations.jsonl     append-only event log (step and decision records)
    snapshots/<sha>.json content-addressed ontology snapshots
    templates.json       prompt templates by task kind
    transcript.jsonl     gateway transcript, written by the gateway itself

The log is never rewritten. A step appends one ``step`` record; every
decision (including a later superseding one, such as a revert) appends a
``decision`` record. Loading folds the log back into task runs, and
:func:`replay_log` folds the accepted deltas over the seed to re-derive the
current checksum independently of the stored snapshots.

All other files are replaced atomically (write to a temp name in the same
directory, then rename), so an interrupted save leaves the previous archive
intact.
"""

from __future__ import annotations

import json
import logging
import os
from enum import Enum
from pathlib import Path

from .dotcodec import to_dot
from .edits import apply_edits, edit_from_doc, edit_to_doc
from .errors import (
    ChecksumMismatchError,
    SchemaVersionMismatchError,
    StoreIoError,
)
from .gateway import Gateway, GatewayConfig, Transcript, TransportMode
from .ontology import Ontology, apply_delta, restore
from .orchestrator import (
    ACCEPTED_DECISIONS,
    Decision,
    Iteration,
    RunStatus,
    Session,
    SessionConfig,
    StopReason,
)
from .prompts import PromptTemplate, TaskKind

logger = logging.getLogger(__name__)

ARCHIVE_SCHEMA_VERSION = 1

MANIFEST_NAME = "manifest.json"
LOG_NAME = "iterations.jsonl"
TEMPLATES_NAME = "templates.json"
SNAPSHOT_DIR = "snapshots"
TRANSCRIPT_NAME = "transcript.jsonl"


class ExportFormat(str, Enum):
    DOT = "dot"
    CANONICAL_DOC = "doc"
    TRIPLES_TABLE = "triples"


def export(ontology: Ontology, fmt: ExportFormat) -> bytes:
    if fmt is ExportFormat.DOT:
        return to_dot(ontology).encode("utf-8")
    if fmt is ExportFormat.CANONICAL_DOC:
        return (ontology.canonical_json() + "\n").encode("utf-8")
    lines = sorted(
        f"{ontology.display(t.subject)} @ {t.predicate} @ {ontology.display(t.object)}"
        for t in ontology.triples.values())
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_gateway(
    root: str | Path,
    mode: TransportMode,
    config: GatewayConfig | None = None,
    transcript_path: str | Path | None = None,
) -> Gateway:
    """Wire a gateway to an archive's transcript file.

    Record mode appends to the archive's own transcript; replay mode reads
    it back (or a supplied fixture file). Live mode needs no transcript.
    """
    config = config or GatewayConfig()
    path = Path(transcript_path) if transcript_path else Path(root) / TRANSCRIPT_NAME
    if mode is TransportMode.LIVE:
        return Gateway(config, mode)
    if mode is TransportMode.RECORD:
        return Gateway(config, mode, transcript=Transcript(path=path))
    if not path.exists():
        raise StoreIoError(f"replay transcript {path} does not exist")
    return Gateway(config, mode, transcript=Transcript.load(path))


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise StoreIoError(f"cannot write {path}: {exc}") from exc


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text("utf-8"))
    except FileNotFoundError as exc:
        raise StoreIoError(f"missing archive file {path}") from exc
    except (OSError, ValueError) as exc:
        raise StoreIoError(f"cannot read {path}: {exc}") from exc


class SessionStore:
    """Writer for one session archive.

    ``sync`` is idempotent and cheap: it appends whatever the log does not
    have yet, writes any snapshots it has not seen, and replaces the
    manifest. Call it after every step or control command.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self._logged: dict[tuple[str, int], tuple[str | None, str | None]] = {}

    # -- creation ----------------------------------------------------------

    @classmethod
    def create(cls, root: str | Path, session: Session) -> SessionStore:
        root = Path(root)
        try:
            root.mkdir(parents=True, exist_ok=True)
            (root / SNAPSHOT_DIR).mkdir(exist_ok=True)
        except OSError as exc:
            raise StoreIoError(f"cannot create archive at {root}: {exc}") from exc
        if (root / MANIFEST_NAME).exists():
            raise StoreIoError(f"archive already exists at {root}")
        store = cls(root)
        (root / LOG_NAME).touch()
        store._write_templates(session)
        store.sync(session)
        return store

    # -- incremental save ----------------------------------------------------

    def sync(self, session: Session) -> None:
        self._write_snapshots(session)
        new_steps: list[tuple[int, TaskKind, Iteration]] = []
        changed: list[tuple[int, TaskKind, Iteration]] = []
        for kind in TaskKind:
            for iteration in session.runs[kind].iterations:
                key = (kind.value, iteration.index)
                state = (iteration.decision.value if iteration.decision else None,
                         iteration.snapshot_ref)
                if key not in self._logged:
                    new_steps.append((iteration.ordinal, kind, iteration))
                    self._logged[key] = (None, None)
                if self._logged[key] != state and state != (None, None):
                    changed.append((iteration.ordinal, kind, iteration))
                    self._logged[key] = state
        if new_steps or changed:
            with (self.root / LOG_NAME).open("a", encoding="utf-8") as log:
                for _, kind, iteration in sorted(new_steps, key=lambda t: t[0]):
                    doc = iteration.to_doc()
                    doc.pop("decision", None)
                    doc.pop("snapshot_ref", None)
                    doc.pop("edits", None)
                    log.write(json.dumps(
                        {"type": "step", "kind": kind.value, "iteration": doc},
                        ensure_ascii=False) + "\n")
                for _, kind, iteration in sorted(changed, key=lambda t: t[0]):
                    log.write(json.dumps(
                        {"type": "decision", "kind": kind.value,
                         "index": iteration.index,
                         "decision": (iteration.decision.value
                                      if iteration.decision else None),
                         "snapshot_ref": iteration.snapshot_ref,
                         "edits": [edit_to_doc(e) for e in iteration.edits]},
                        ensure_ascii=False) + "\n")
                log.flush()
                os.fsync(log.fileno())
        self._write_manifest(session)

    def _write_snapshots(self, session: Session) -> None:
        directory = self.root / SNAPSHOT_DIR
        for ref, data in session.snapshots.items():
            path = directory / f"{ref}.json"
            if not path.exists():
                _write_atomic(path, data)

    def _write_templates(self, session: Session) -> None:
        doc = {kind.value: session.engine.templates[kind].to_doc()
               for kind in TaskKind}
        _write_atomic(self.root / TEMPLATES_NAME,
                      json.dumps(doc, ensure_ascii=False, indent=2).encode("utf-8"))

    def save_templates(self, session: Session) -> None:
        self._write_templates(session)

    def _write_manifest(self, session: Session) -> None:
        manifest = {
            "archive_schema_version": ARCHIVE_SCHEMA_VERSION,
            "session_id": session.id,
            "created_at": session.created_at,
            "config": session.config.to_doc(),
            "seed_checksum": session.seed_checksum,
            "current_checksum": session.ontology.checksum(),
            "sequence_no": session.sequence_no,
            "active_kind": session.active_kind.value if session.active_kind else None,
            "runs": {kind.value: session.runs[kind].to_doc() for kind in TaskKind},
        }
        _write_atomic(self.root / MANIFEST_NAME,
                      json.dumps(manifest, ensure_ascii=False, indent=2).encode("utf-8"))

    # -- loading ---------------------------------------------------------------

    @classmethod
    def load(cls, root: str | Path, gateway: Gateway | None = None,
             ) -> tuple[Session, SessionStore]:
        root = Path(root)
        manifest = _read_json(root / MANIFEST_NAME)
        found = manifest.get("archive_schema_version")
        if found != ARCHIVE_SCHEMA_VERSION:
            raise SchemaVersionMismatchError(
                f"archive schema version {found} is not supported;"
                f" this build reads version {ARCHIVE_SCHEMA_VERSION}")
        config = SessionConfig.from_doc(manifest["config"])
        templates = cls._load_templates(root)
        snapshots = cls._load_snapshots(root)
        seed_ref = manifest["seed_checksum"]
        seed = cls._restore_ref(root, snapshots, seed_ref)

        if gateway is None:
            from .gateway import GatewayConfig, TransportMode
            gateway = Gateway(GatewayConfig(), TransportMode.REPLAY)
        session = Session(
            seed=seed, config=config, gateway=gateway,
            templates=templates, session_id=manifest["session_id"],
            created_at=manifest["created_at"])
        session.snapshots = snapshots
        session.seed_checksum = seed_ref
        session.sequence_no = manifest.get("sequence_no", 0)
        active = manifest.get("active_kind")
        session.active_kind = TaskKind(active) if active else None

        store = cls(root)
        store._fold_log(root / LOG_NAME, session)
        cls._apply_run_summaries(manifest, session)
        session.step_count = max(
            (it.ordinal for run in session.runs.values()
             for it in run.iterations), default=0)
        session.ontology = cls._restore_ref(
            root, snapshots, manifest["current_checksum"])
        return session, store

    @staticmethod
    def _load_templates(root: Path) -> dict[TaskKind, PromptTemplate]:
        doc = _read_json(root / TEMPLATES_NAME)
        try:
            return {TaskKind(k): PromptTemplate.from_doc(v)
                    for k, v in doc.items()}
        except (KeyError, ValueError) as exc:
            raise StoreIoError(f"malformed {TEMPLATES_NAME}: {exc}") from exc

    @staticmethod
    def _load_snapshots(root: Path) -> dict[str, bytes]:
        directory = root / SNAPSHOT_DIR
        snapshots: dict[str, bytes] = {}
        if not directory.is_dir():
            raise StoreIoError(f"missing snapshot directory {directory}")
        for path in sorted(directory.glob("*.json")):
            data = path.read_bytes()
            ref = path.stem
            try:
                ontology = restore(data)
            except Exception as exc:
                raise ChecksumMismatchError(
                    f"snapshot {path.name} is corrupt: {exc}") from exc
            if ontology.checksum() != ref:
                raise ChecksumMismatchError(
                    f"snapshot {path.name} content hashes to"
                    f" {ontology.checksum()[:12]}…, not its file name")
            snapshots[ref] = data
        return snapshots

    @staticmethod
    def _restore_ref(root: Path, snapshots: dict[str, bytes], ref: str) -> Ontology:
        if ref not in snapshots:
            raise StoreIoError(
                f"snapshot {ref}.json referenced by the archive is missing"
                f" from {root / SNAPSHOT_DIR}")
        return restore(snapshots[ref])

    def _fold_log(self, path: Path, session: Session) -> None:
        by_key: dict[tuple[str, int], Iteration] = {}
        for record in _read_log(path):
            if record["type"] == "step":
                doc = record["iteration"]
                iteration = Iteration.from_doc(doc)
                kind = TaskKind(record["kind"])
                key = (kind.value, iteration.index)
                by_key[key] = iteration
                session.runs[kind].iterations.append(iteration)
                self._logged[key] = (None, None)
            elif record["type"] == "decision":
                key = (record["kind"], record["index"])
                iteration = by_key.get(key)
                if iteration is None:
                    raise StoreIoError(
                        f"decision record for unknown iteration {key} in {path}")
                iteration.decision = (
                    Decision(record["decision"]) if record["decision"] else None)
                iteration.snapshot_ref = record.get("snapshot_ref")
                iteration.edits = tuple(
                    edit_from_doc(e) for e in record.get("edits", ()))
                self._logged[key] = (record["decision"], record.get("snapshot_ref"))
            else:
                raise StoreIoError(
                    f"unknown record type {record['type']!r} in {path}")

    @staticmethod
    def _apply_run_summaries(manifest: dict, session: Session) -> None:
        for kind in TaskKind:
            summary = manifest["runs"][kind.value]
            run = session.runs[kind]
            run.status = RunStatus(summary["status"])
            run.stop_reason = (StopReason(summary["stop_reason"])
                               if summary.get("stop_reason") else None)
            run.resume_to = (RunStatus(summary["resume_to"])
                             if summary.get("resume_to") else None)
            run.base_checksum = summary.get("base_checksum")
            if summary.get("iteration_count") != len(run.iterations):
                raise StoreIoError(
                    f"manifest counts {summary.get('iteration_count')}"
                    f" {kind.value} iterations but the log holds"
                    f" {len(run.iterations)}")


def _read_log(path: Path):
    try:
        text = path.read_text("utf-8")
    except FileNotFoundError as exc:
        raise StoreIoError(f"missing archive file {path}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except ValueError as exc:
            raise StoreIoError(
                f"{path} line {line_no} is not valid JSON: {exc}") from exc


def replay_log(root: str | Path) -> str:
    """Fold the accepted deltas over the seed and return the checksum.

    Independent of the stored snapshots: only the seed snapshot, the log,
    and the delta algebra are involved. Matching the manifest's
    current_checksum is the archive's own integrity proof.
    """
    root = Path(root)
    manifest = _read_json(root / MANIFEST_NAME)
    snapshots = SessionStore._load_snapshots(root)
    ontology = SessionStore._restore_ref(
        root, snapshots, manifest["seed_checksum"])

    steps: list[tuple[tuple[str, int], Iteration]] = []
    decisions: dict[tuple[str, int], dict] = {}
    for record in _read_log(root / LOG_NAME):
        if record["type"] == "step":
            iteration = Iteration.from_doc(record["iteration"])
            steps.append(((record["kind"], iteration.index), iteration))
        elif record["type"] == "decision":
            decisions[(record["kind"], record["index"])] = record

    accepted_values = {d.value for d in ACCEPTED_DECISIONS}
    for key, iteration in steps:
        final = decisions.get(key)
        if final is None or final["decision"] not in accepted_values:
            continue
        ontology = apply_delta(ontology, iteration.delta)
        edits = tuple(edit_from_doc(e) for e in final.get("edits", ()))
        if edits:
            ontology = apply_edits(ontology, edits)
    return ontology.checksum()
