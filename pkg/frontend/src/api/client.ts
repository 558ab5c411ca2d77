import type {
  ControlRequest,
  ControlResult,
  CreateSessionRequest,
  IterationDoc,
  OntologyDoc,
  SessionSummary,
  StepResult,
  TaskKind,
  TaskLog,
  TemplateView,
} from "./types";

/** Service error, carrying the flat {code, message, detail} body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type Fetcher = (input: string, init?: RequestInit) => Promise<Response>;

/** What the UI needs from the service; tests substitute an in-memory fake. */
export interface Api {
  listSessions(): Promise<SessionSummary[]>;
  createSession(body: CreateSessionRequest): Promise<SessionSummary>;
  getSession(id: string): Promise<SessionSummary>;
  getOntology(id: string): Promise<OntologyDoc>;
  exportDot(id: string): Promise<string>;
  getLog(id: string, kind: TaskKind): Promise<TaskLog>;
  step(id: string, kind: TaskKind): Promise<StepResult>;
  control(id: string, body: ControlRequest): Promise<ControlResult>;
  getTemplate(id: string, kind: TaskKind): Promise<TemplateView>;
  putTemplate(
    id: string,
    kind: TaskKind,
    body: Omit<TemplateView, "task">,
  ): Promise<TemplateView>;
  getIteration(id: string, ordinal: number): Promise<IterationDoc>;
}

export class ApiClient implements Api {
  private readonly fetcher: Fetcher;

  constructor(
    readonly base: string = "/api",
    fetcher?: Fetcher,
  ) {
    this.fetcher = fetcher ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetcher(this.base + path, init);
    const text = await response.text();
    if (!response.ok) {
      let code = "http_error";
      let message = text || response.statusText;
      let detail: unknown;
      try {
        const parsed = JSON.parse(text);
        code = parsed.code ?? code;
        message = parsed.message ?? message;
        detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the raw text as the message
      }
      throw new ApiError(response.status, code, message, detail);
    }
    const contentType = response.headers.get("content-type") ?? "";
    if (contentType.includes("application/json")) {
      return JSON.parse(text) as T;
    }
    return text as unknown as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("GET", "/sessions");
  }

  createSession(body: CreateSessionRequest): Promise<SessionSummary> {
    return this.request("POST", "/sessions", body);
  }

  getSession(id: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${id}`);
  }

  getOntology(id: string): Promise<OntologyDoc> {
    return this.request("GET", `/sessions/${id}/ontology?format=doc`);
  }

  exportDot(id: string): Promise<string> {
    return this.request("GET", `/sessions/${id}/ontology?format=dot`);
  }

  getLog(id: string, kind: TaskKind): Promise<TaskLog> {
    return this.request("GET", `/sessions/${id}/tasks/${kind}/log`);
  }

  step(id: string, kind: TaskKind): Promise<StepResult> {
    return this.request("POST", `/sessions/${id}/tasks/${kind}/step`);
  }

  control(id: string, body: ControlRequest): Promise<ControlResult> {
    return this.request("POST", `/sessions/${id}/control`, body);
  }

  getTemplate(id: string, kind: TaskKind): Promise<TemplateView> {
    return this.request("GET", `/sessions/${id}/prompt-template/${kind}`);
  }

  putTemplate(
    id: string,
    kind: TaskKind,
    body: Omit<TemplateView, "task">,
  ): Promise<TemplateView> {
    return this.request("PUT", `/sessions/${id}/prompt-template/${kind}`, body);
  }

  getIteration(id: string, ordinal: number): Promise<IterationDoc> {
    return this.request("GET", `/sessions/${id}/iterations/${ordinal}`);
  }
}
