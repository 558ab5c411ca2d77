import { ApiError } from "../../src/api/client";
import type { Api } from "../../src/api/client";
import type {
  ConceptDoc,
  ControlRequest,
  ControlResult,
  CreateSessionRequest,
  DeltaDoc,
  EdgeDoc,
  IterationDoc,
  OntologyDoc,
  RunDoc,
  SessionSummary,
  StepResult,
  TaskKind,
  TaskLog,
  TemplateView,
  TripleDoc,
  ViolationDoc,
} from "../../src/api/types";
import { TASK_KINDS } from "../../src/api/types";

export function concept(
  id: string,
  displayName: string,
  definition: string | null = null,
): ConceptDoc {
  return { id, display_name: displayName, definition, properties: [] };
}

export function edge(parent: string, child: string): EdgeDoc {
  return { child, parent };
}

export function doc(
  concepts: ConceptDoc[],
  hierarchy: EdgeDoc[],
  triples: TripleDoc[] = [],
): OntologyDoc {
  return { schema_version: 1, version: 1, concepts, hierarchy, triples };
}

export function emptyDelta(): DeltaDoc {
  return {
    added_concepts: [],
    removed_concepts: [],
    redefined_concepts: [],
    added_edges: [],
    removed_edges: [],
    added_triples: [],
    removed_triples: [],
    concept_records: [],
  };
}

export interface ScriptedStep {
  responseText: string;
  delta?: Partial<DeltaDoc>;
  violations?: ViolationDoc[];
  /** Committed ontology once the iteration is accepted. */
  nextDoc?: OntologyDoc;
}

interface SessionState {
  summaryBase: Pick<SessionSummary, "id" | "created_at" | "config">;
  currentDoc: OntologyDoc;
  templates: Record<TaskKind, TemplateView>;
  runs: Record<TaskKind, RunDoc>;
  logs: Record<TaskKind, IterationDoc[]>;
  script: Partial<Record<TaskKind, ScriptedStep[]>>;
  snapshots: Map<string, OntologyDoc>;
  sequenceNo: number;
}

function defaultTemplate(kind: TaskKind): TemplateView {
  return {
    task: kind,
    context:
      "You are helping to build an ontology of the autonomous driving domain.",
    instruction: `Extend the ${kind} information for the concepts below.`,
    format_spec: "Answer in the agreed machine readable format.",
  };
}

function idleRun(kind: TaskKind): RunDoc {
  return {
    kind,
    status: "Idle",
    stop_reason: null,
    resume_to: null,
    base_checksum: null,
    iteration_count: 0,
  };
}

/**
 * In-memory stand-in for the service, faithful to its observable
 * behavior at the level the UI depends on: steps park for review,
 * decisions commit scripted documents, revert restores the snapshot
 * taken when an iteration was accepted.
 */
export class FakeApi implements Api {
  readonly calls: Array<{ method: string; args: unknown[] }> = [];
  private readonly sessions = new Map<string, SessionState>();

  addSession(
    id: string,
    initialDoc: OntologyDoc,
    script: Partial<Record<TaskKind, ScriptedStep[]>> = {},
    domain = "autonomous driving",
  ): void {
    const templates = {} as Record<TaskKind, TemplateView>;
    const runs = {} as Record<TaskKind, RunDoc>;
    const logs = {} as Record<TaskKind, IterationDoc[]>;
    for (const kind of TASK_KINDS) {
      templates[kind] = defaultTemplate(kind);
      runs[kind] = idleRun(kind);
      logs[kind] = [];
    }
    this.sessions.set(id, {
      summaryBase: {
        id,
        created_at: "2026-08-17T09:00:00+00:00",
        config: {
          domain_label: domain,
          mode: "supervised",
          direction: "parent-to-child",
          concepts_per_iteration: 10,
          batch_size: 10,
          runs_per_pair: 5,
          relationship_scope: [],
          property_scope: [],
          stopping: {
            max_iterations: 10,
            max_concepts: null,
            max_depth: null,
            max_breadth: null,
            no_new_info_window: 2,
          },
          rules: {},
        },
      },
      currentDoc: initialDoc,
      templates,
      runs,
      logs,
      script: { ...script },
      snapshots: new Map(),
      sequenceNo: 0,
    });
  }

  private state(id: string): SessionState {
    const state = this.sessions.get(id);
    if (!state) {
      throw new ApiError(404, "unknown_session", `no session ${id}`);
    }
    return state;
  }

  private summarize(state: SessionState): SessionSummary {
    return {
      ...state.summaryBase,
      seed_checksum: "seed".padEnd(64, "0"),
      checksum: `v${state.currentDoc.version}-${state.currentDoc.concepts.length}`
        .padEnd(64, "0"),
      stats: {
        concept_count: state.currentDoc.concepts.length,
        max_depth: 1,
        max_breadth: 3,
        undefined_count: state.currentDoc.concepts.filter((c) => !c.definition)
          .length,
        triple_count: state.currentDoc.triples.length,
        version: state.currentDoc.version,
      },
      runs: { ...state.runs },
      active_kind: null,
      step_count: Object.values(state.logs).reduce(
        (acc, log) => acc + log.length,
        0,
      ),
      sequence_no: state.sequenceNo,
    };
  }

  async listSessions(): Promise<SessionSummary[]> {
    this.calls.push({ method: "listSessions", args: [] });
    return [...this.sessions.values()].map((s) => this.summarize(s));
  }

  async createSession(body: CreateSessionRequest): Promise<SessionSummary> {
    this.calls.push({ method: "createSession", args: [body] });
    const id = `created${this.sessions.size + 1}`;
    this.addSession(id, doc([concept("seed", "Seed")], []));
    return this.getSession(id);
  }

  async getSession(id: string): Promise<SessionSummary> {
    this.calls.push({ method: "getSession", args: [id] });
    return this.summarize(this.state(id));
  }

  async getOntology(id: string): Promise<OntologyDoc> {
    this.calls.push({ method: "getOntology", args: [id] });
    return this.state(id).currentDoc;
  }

  async exportDot(id: string): Promise<string> {
    this.calls.push({ method: "exportDot", args: [id] });
    return `digraph ontology { /* ${this.state(id).currentDoc.concepts.length} concepts */ }`;
  }

  async getLog(id: string, kind: TaskKind): Promise<TaskLog> {
    this.calls.push({ method: "getLog", args: [id, kind] });
    const state = this.state(id);
    return { run: state.runs[kind], iterations: [...state.logs[kind]] };
  }

  async step(id: string, kind: TaskKind): Promise<StepResult> {
    this.calls.push({ method: "step", args: [id, kind] });
    const state = this.state(id);
    if (state.runs[kind].status !== "Idle") {
      throw new ApiError(
        409,
        "invalid_transition",
        `cannot step a ${state.runs[kind].status} run`,
      );
    }
    const queue = state.script[kind] ?? [];
    const scripted = queue.shift();
    if (!scripted) {
      throw new ApiError(409, "replay_miss", "no transcript entry", {
        sequence_no: state.sequenceNo + 1,
      });
    }
    state.sequenceNo += 1;
    const template = state.templates[kind];
    const prompt = [
      template.context,
      template.instruction,
      template.format_spec,
    ].join("\n\n");
    const iteration: IterationDoc = {
      index: state.logs[kind].length + 1,
      kind,
      ordinal: state.sequenceNo,
      prompt: {
        text: prompt,
        task: kind,
        placeholder_bindings: {},
        length_chars: prompt.length,
        length_warning: false,
      },
      response: {
        text: scripted.responseText,
        latency_ms: 3,
        transport: "replay",
        truncated: false,
      },
      signal: null,
      delta: { ...emptyDelta(), ...scripted.delta },
      validation: {
        policy: "strict",
        ok: (scripted.violations ?? []).length === 0,
        violations: scripted.violations ?? [],
      },
      rejected_rows: [],
      parse_warnings: [],
      batch_ids: [],
      pair: null,
      run_no: null,
      runaway_retry: false,
      failure: null,
      decision: null,
      snapshot_ref: null,
      edits: [],
    };
    (iteration as { __nextDoc?: OntologyDoc }).__nextDoc = scripted.nextDoc;
    state.logs[kind].push(iteration);
    state.runs[kind] = {
      ...state.runs[kind],
      status: "AwaitingReview",
      iteration_count: state.logs[kind].length,
    };
    return {
      iteration,
      run: state.runs[kind],
      checksum: this.summarize(state).checksum,
    };
  }

  async control(id: string, body: ControlRequest): Promise<ControlResult> {
    this.calls.push({ method: "control", args: [id, body] });
    const state = this.state(id);
    const kind = body.task ?? "hierarchy";
    const run = state.runs[kind];
    const log = state.logs[kind];
    if (body.command === "accept" || body.command === "accept_with_edits") {
      if (run.status !== "AwaitingReview") {
        throw new ApiError(409, "invalid_transition", "nothing awaits review");
      }
      const iteration = log[log.length - 1];
      iteration.decision =
        body.command === "accept" ? "HumanAccepted" : "EditedThenAccepted";
      iteration.edits = body.edits ?? [];
      const nextDoc = (iteration as { __nextDoc?: OntologyDoc }).__nextDoc;
      if (nextDoc) {
        state.currentDoc = nextDoc;
      }
      iteration.snapshot_ref = `snap-${iteration.index}`.padEnd(64, "0");
      state.snapshots.set(iteration.snapshot_ref, state.currentDoc);
      state.runs[kind] = { ...run, status: "Idle" };
    } else if (body.command === "repeat") {
      if (run.status !== "AwaitingReview") {
        throw new ApiError(409, "invalid_transition", "nothing awaits review");
      }
      const iteration = log[log.length - 1];
      iteration.decision = "Repeated";
      state.runs[kind] = { ...run, status: "Idle" };
    } else if (body.command === "revert") {
      const target = log.find((i) => i.index === body.to_iteration);
      if (!target || !target.snapshot_ref) {
        throw new ApiError(
          404,
          "unknown_iteration",
          `no accepted iteration ${body.to_iteration}`,
        );
      }
      state.currentDoc = state.snapshots.get(target.snapshot_ref)!;
      for (const iteration of log) {
        if (iteration.index > target.index && iteration.decision !== "Repeated") {
          iteration.decision = "Reverted";
        }
      }
      state.runs[kind] = { ...run, status: "Idle", stop_reason: null };
    } else {
      throw new ApiError(422, "invalid_transition", `no command ${body.command}`);
    }
    return {
      run: state.runs[kind],
      checksum: this.summarize(state).checksum,
    };
  }

  async getTemplate(id: string, kind: TaskKind): Promise<TemplateView> {
    this.calls.push({ method: "getTemplate", args: [id, kind] });
    return this.state(id).templates[kind];
  }

  async putTemplate(
    id: string,
    kind: TaskKind,
    body: Omit<TemplateView, "task">,
  ): Promise<TemplateView> {
    this.calls.push({ method: "putTemplate", args: [id, kind, body] });
    const state = this.state(id);
    state.templates[kind] = { task: kind, ...body };
    return state.templates[kind];
  }

  async getIteration(id: string, ordinal: number): Promise<IterationDoc> {
    this.calls.push({ method: "getIteration", args: [id, ordinal] });
    for (const kind of TASK_KINDS) {
      const hit = this.state(id).logs[kind].find((i) => i.ordinal === ordinal);
      if (hit) {
        return hit;
      }
    }
    throw new ApiError(404, "unknown_iteration", `no iteration ${ordinal}`);
  }
}
