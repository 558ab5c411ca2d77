// Wire types for the distillation service. Field names and enum spellings
// match the JSON the service emits; keep them in sync with the server
// models rather than renaming for local taste.

export type TaskKind = "hierarchy" | "definition" | "relationship" | "property";

export const TASK_KINDS: readonly TaskKind[] = [
  "hierarchy",
  "definition",
  "relationship",
  "property",
];

export type RunStatus =
  | "Idle"
  | "AwaitingResponse"
  | "AwaitingReview"
  | "Paused"
  | "Completed"
  | "Aborted";

export type Command =
  | "pause"
  | "resume"
  | "repeat"
  | "revert"
  | "accept"
  | "accept_with_edits"
  | "abort";

export interface RunDoc {
  kind: TaskKind;
  status: RunStatus;
  stop_reason: string | null;
  resume_to: string | null;
  base_checksum: string | null;
  iteration_count: number;
}

export interface SessionStats {
  concept_count: number;
  max_depth: number | null;
  max_breadth: number | null;
  undefined_count: number;
  triple_count: number;
  version: number;
}

export interface SessionSummary {
  id: string;
  created_at: string;
  config: SessionConfigDoc;
  seed_checksum: string;
  checksum: string;
  stats: SessionStats;
  runs: Record<TaskKind, RunDoc>;
  active_kind: TaskKind | null;
  step_count: number;
  sequence_no: number;
}

export interface SessionConfigDoc {
  domain_label: string;
  mode: "supervised" | "autonomous";
  direction: string;
  concepts_per_iteration: number;
  batch_size: number;
  runs_per_pair: number;
  relationship_scope: string[];
  property_scope: string[];
  stopping: {
    max_iterations: number | null;
    max_concepts: number | null;
    max_depth: number | null;
    max_breadth: number | null;
    no_new_info_window: number;
  };
  rules: unknown;
}

export interface PropertyDoc {
  name: string;
  description: string;
}

export interface ConceptDoc {
  id: string;
  display_name: string;
  definition: string | null;
  properties: PropertyDoc[];
}

export interface EdgeDoc {
  child: string;
  parent: string;
}

export interface TripleDoc {
  subject: string;
  predicate: string;
  object: string;
  provenance: string[];
  variants: string[];
}

export interface OntologyDoc {
  schema_version: number;
  version: number;
  concepts: ConceptDoc[];
  hierarchy: EdgeDoc[];
  triples: TripleDoc[];
}

export interface ViolationDoc {
  rule: string;
  subjects: string[];
  detail: string;
}

export interface ValidationDoc {
  policy: string;
  ok: boolean;
  violations: ViolationDoc[];
}

export interface DeltaDoc {
  added_concepts: string[];
  removed_concepts: string[];
  redefined_concepts: string[];
  added_edges: EdgeDoc[];
  removed_edges: EdgeDoc[];
  added_triples: TripleDoc[];
  removed_triples: TripleDoc[];
  concept_records: ConceptDoc[];
}

export interface RejectedRowDoc {
  raw: string;
  reason: string;
}

export interface IterationDoc {
  index: number;
  kind: TaskKind;
  ordinal: number;
  prompt: {
    text: string;
    task: TaskKind;
    placeholder_bindings: Record<string, string>;
    length_chars: number;
    length_warning: boolean;
  };
  response: {
    text: string;
    latency_ms: number;
    transport: string;
    truncated: boolean;
  } | null;
  signal: string | null;
  delta: DeltaDoc;
  validation: ValidationDoc | null;
  rejected_rows: RejectedRowDoc[];
  parse_warnings: string[];
  batch_ids: string[];
  pair: [string, string] | null;
  run_no: number | null;
  runaway_retry: boolean;
  failure: string | null;
  decision: string | null;
  snapshot_ref: string | null;
  edits: EditDoc[];
}

export interface EditDoc {
  op: string;
  [key: string]: unknown;
}

export interface TaskLog {
  run: RunDoc;
  iterations: IterationDoc[];
}

export interface StepResult {
  iteration: IterationDoc | null;
  run: RunDoc;
  checksum: string;
}

export interface ControlRequest {
  command: Command;
  task?: TaskKind;
  to_iteration?: number;
  edits?: EditDoc[];
}

export interface ControlResult {
  run: RunDoc;
  checksum: string;
}

export interface TemplateView {
  task: TaskKind;
  context: string;
  instruction: string;
  format_spec: string;
}

export interface TransportSpec {
  mode: "live" | "record" | "replay";
  endpoint_url?: string | null;
  model_name?: string | null;
  transcript_path?: string | null;
}

export interface CreateSessionRequest {
  seed_dot: string;
  config: Partial<Omit<SessionConfigDoc, "stopping">> & {
    stopping?: Partial<SessionConfigDoc["stopping"]>;
  };
  transport: TransportSpec;
  session_id?: string;
}
