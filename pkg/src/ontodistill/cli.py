"""Headless driver for session archives.

Exit codes: 0 on success, 1 on a domain error, 2 on usage errors (click's
default). Supervised runs prompt on the terminal for each review decision;
a decision script file makes the same runs fully unattended.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .dotcodec import ontology_from_dot
from .edits import edit_from_doc
from .errors import OntoDistillError
from .gateway import GatewayConfig, TransportMode
from .orchestrator import (
    Command,
    Decision,
    DecisionScript,
    ExecutionMode,
    Iteration,
    RunStatus,
    ScriptAction,
    Session,
    SessionConfig,
    StoppingCriteria,
)
from .prompts import TaskKind
from .store import (
    ExportFormat,
    SessionStore,
    build_gateway,
    export,
)
from .validation import Policy, validate


def _fail(exc: OntoDistillError) -> None:
    click.echo(f"error ({exc.code}): {exc.message}", err=True)
    sys.exit(1)


@click.group()
def main() -> None:
    """Distill a domain ontology from a chat model, one reviewed step at a time."""


@main.command()
@click.option("--seed", "seed_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Seed hierarchy as a DOT file.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(path_type=Path),
              help="Directory to create the session archive in.")
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Session configuration JSON.")
@click.option("--session-id", default=None, help="Explicit session id.")
def init(seed_path: Path, out_dir: Path, config_path: Path | None,
         session_id: str | None) -> None:
    """Create a new session archive from a seed hierarchy."""
    try:
        seed, diagnostics = ontology_from_dot(seed_path.read_text("utf-8"))
        config = SessionConfig.from_doc(
            json.loads(config_path.read_text("utf-8")) if config_path else {})
        session = Session(seed=seed, config=config, gateway=None,
                          session_id=session_id)
        SessionStore.create(out_dir, session)
    except OntoDistillError as exc:
        _fail(exc)
    for warning in diagnostics.warnings:
        click.echo(f"seed warning: line {warning.line}: {warning.text}", err=True)
    click.echo(f"session {session.id} created at {out_dir}")
    click.echo(f"seed checksum {session.seed_checksum}")


def _load(session_dir: Path, transport: str | None = None,
          transcripts: Path | None = None,
          endpoint: str | None = None,
          model: str | None = None) -> tuple[Session, SessionStore]:
    gateway = None
    if transport is not None:
        transcript_path = transcripts
        if transcript_path is not None and transcript_path.is_dir():
            transcript_path = transcript_path / "transcript.jsonl"
        defaults = GatewayConfig()
        config = GatewayConfig(
            endpoint_url=endpoint,
            model_name=model or defaults.model_name)
        gateway = build_gateway(session_dir, TransportMode(transport),
                                config=config, transcript_path=transcript_path)
    return SessionStore.load(session_dir, gateway=gateway)


def _describe(iteration: Iteration) -> str:
    lines = [f"iteration {iteration.index} [{iteration.kind.value}]"]
    if iteration.failure:
        lines.append(f"  failure: {iteration.failure}")
    delta = iteration.delta
    if delta.added_concepts:
        lines.append("  added: " + ", ".join(sorted(delta.added_concepts)))
    if delta.removed_concepts:
        lines.append("  removed: " + ", ".join(sorted(delta.removed_concepts)))
    if delta.redefined_concepts:
        lines.append(f"  defined: {len(delta.redefined_concepts)} concepts")
    if delta.added_triples:
        lines.append(f"  triples: +{len(delta.added_triples)}")
    if iteration.validation and iteration.validation.violations:
        for violation in iteration.validation.violations:
            lines.append(f"  violation [{violation.rule.value}] {violation.detail}")
    if iteration.rejected_rows:
        lines.append(f"  quarantined rows: {len(iteration.rejected_rows)}")
    return "\n".join(lines)


def _prompt_decision(session: Session, kind: TaskKind) -> None:
    """Terminal review loop for one parked iteration."""
    choice = click.prompt(
        "decision [accept/repeat/revert/edit/abort]",
        type=click.Choice(["accept", "repeat", "revert", "edit", "abort"]))
    if choice == "accept":
        session.control(Command.ACCEPT, task=kind)
    elif choice == "repeat":
        session.control(Command.REPEAT, task=kind)
    elif choice == "revert":
        target = click.prompt("revert to iteration", type=int)
        session.control(Command.REVERT, task=kind, to_iteration=target)
    elif choice == "edit":
        raw = click.prompt("edits as a JSON list")
        edits = tuple(edit_from_doc(doc) for doc in json.loads(raw))
        session.control(Command.ACCEPT_WITH_EDITS, task=kind, edits=edits)
    else:
        session.control(Command.ABORT, task=kind)


@main.command()
@click.argument("session_dir", type=click.Path(exists=True, file_okay=False,
                                               path_type=Path))
@click.option("--task", required=True,
              type=click.Choice([k.value for k in TaskKind]))
@click.option("--mode", type=click.Choice([m.value for m in ExecutionMode]),
              default=None, help="Override the stored execution mode.")
@click.option("--max-iterations", type=int, default=None,
              help="Override the stored iteration limit for this run.")
@click.option("--transport", type=click.Choice([m.value for m in TransportMode]),
              default="replay", show_default=True)
@click.option("--transcripts", type=click.Path(exists=True, path_type=Path),
              default=None, help="Transcript file or directory for replay.")
@click.option("--script", "script_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Decision script JSON for unattended review.")
@click.option("--endpoint", default=None, help="Chat completion endpoint URL.")
@click.option("--model", default=None, help="Model name for live calls.")
def run(session_dir: Path, task: str, mode: str | None,
        max_iterations: int | None, transport: str, transcripts: Path | None,
        script_path: Path | None, endpoint: str | None,
        model: str | None) -> None:
    """Drive one task loop until a stopping criterion or abort."""
    kind = TaskKind(task)
    try:
        session, store = _load(session_dir, transport, transcripts,
                               endpoint, model)
        if mode is not None:
            session.config = replace(session.config, mode=ExecutionMode(mode))
        if max_iterations is not None:
            session.config = replace(
                session.config, stopping=replace(
                    session.config.stopping, max_iterations=max_iterations))
        script = None
        if script_path is not None:
            script = DecisionScript.from_doc(
                json.loads(script_path.read_text("utf-8")))
        _run_loop(session, store, kind, script)
    except OntoDistillError as exc:
        _fail(exc)
    run_state = session.runs[kind]
    reason = run_state.stop_reason.value if run_state.stop_reason else "-"
    click.echo(f"{kind.value} task {run_state.status.value} ({reason})")
    click.echo(f"ontology checksum {session.ontology.checksum()}")
    if run_state.status is RunStatus.ABORTED:
        sys.exit(1)


def _run_loop(session: Session, store: SessionStore, kind: TaskKind,
              script: DecisionScript | None) -> None:
    run_state = session.runs[kind]
    while run_state.status not in (RunStatus.COMPLETED, RunStatus.ABORTED):
        if run_state.status is RunStatus.PAUSED:
            click.echo("task is paused; resume it with the control command")
            return
        if run_state.status is RunStatus.IDLE:
            iteration = session.step(kind)
            store.sync(session)
            if iteration is not None:
                click.echo(_describe(iteration))
                if iteration.decision is Decision.AUTO_ACCEPTED:
                    click.echo("  auto-accepted")
            continue
        # parked for review
        parked = run_state.iterations[-1]
        action = None
        if script is not None:
            action = script.actions.get(parked.index)
            if action is None and script.default is not None:
                action = ScriptAction(action=script.default)
        if action is not None:
            _apply_scripted(session, kind, action)
        else:
            _prompt_decision(session, kind)
        store.sync(session)


def _apply_scripted(session: Session, kind: TaskKind,
                    action: ScriptAction) -> None:
    command = {
        "accept": Command.ACCEPT,
        "accept_with_edits": Command.ACCEPT_WITH_EDITS,
        "repeat": Command.REPEAT,
        "revert": Command.REVERT,
        "abort": Command.ABORT,
    }[action.action]
    session.control(command, task=kind, edits=action.edits,
                    to_iteration=action.revert_to)
    click.echo(f"  scripted decision: {action.action}")


@main.command()
@click.argument("session_dir", type=click.Path(exists=True, file_okay=False,
                                               path_type=Path))
@click.option("--task", type=click.Choice([k.value for k in TaskKind]),
              default=None, help="Task to control; defaults to the active one.")
@click.option("--revert", "revert_to", type=int, default=None,
              help="Restore the ontology to the numbered iteration's snapshot.")
@click.option("--repeat", is_flag=True, help="Discard and redo the parked iteration.")
@click.option("--resume", "resume_", is_flag=True, help="Resume a paused task.")
@click.option("--pause", "pause_", is_flag=True, help="Pause the task.")
@click.option("--accept", "accept_", is_flag=True, help="Accept the parked iteration.")
def control(session_dir: Path, task: str | None, revert_to: int | None,
            repeat: bool, resume_: bool, pause_: bool, accept_: bool) -> None:
    """Apply one review command to a session archive."""
    picked = [name for name, on in [
        ("revert", revert_to is not None), ("repeat", repeat),
        ("resume", resume_), ("pause", pause_), ("accept", accept_)] if on]
    if len(picked) != 1:
        raise click.UsageError("choose exactly one of"
                               " --revert/--repeat/--resume/--pause/--accept")
    kind = TaskKind(task) if task else None
    try:
        session, store = SessionStore.load(session_dir)
        command = {
            "revert": Command.REVERT, "repeat": Command.REPEAT,
            "resume": Command.RESUME, "pause": Command.PAUSE,
            "accept": Command.ACCEPT}[picked[0]]
        run_state = session.control(command, task=kind, to_iteration=revert_to)
        store.sync(session)
    except OntoDistillError as exc:
        _fail(exc)
    click.echo(f"{run_state.kind.value} task is now {run_state.status.value}")
    click.echo(f"ontology checksum {session.ontology.checksum()}")


@main.command("export")
@click.argument("session_dir", type=click.Path(exists=True, file_okay=False,
                                               path_type=Path))
@click.option("--format", "fmt", required=True,
              type=click.Choice([f.value for f in ExportFormat]))
def export_cmd(session_dir: Path, fmt: str) -> None:
    """Write the current ontology to stdout."""
    try:
        session, _ = SessionStore.load(session_dir)
    except OntoDistillError as exc:
        _fail(exc)
    sys.stdout.write(export(session.ontology, ExportFormat(fmt)).decode("utf-8"))


@main.command("validate")
@click.argument("session_dir", type=click.Path(exists=True, file_okay=False,
                                               path_type=Path))
@click.option("--policy", required=True,
              type=click.Choice(["strict", "permissive"]))
def validate_cmd(session_dir: Path, policy: str) -> None:
    """Check the current ontology against a validation policy."""
    try:
        session, _ = SessionStore.load(session_dir)
    except OntoDistillError as exc:
        _fail(exc)
    report = validate(session.ontology, Policy(policy))
    if report.ok:
        click.echo(f"ok: no {policy} violations")
        return
    for violation in report.violations:
        click.echo(f"[{violation.rule.value}] {violation.detail}")
    sys.exit(1)


@main.command()
@click.option("--data-dir", required=True, type=click.Path(path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(data_dir: Path, host: str, port: int) -> None:
    """Run the HTTP API."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


if __name__ == "__main__":
    main()
