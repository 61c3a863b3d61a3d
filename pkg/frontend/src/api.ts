/**
 * Typed client for the review service HTTP API.
 *
 * Every reply is an envelope `{data, version}` or `{error: {code, message},
 * version}`; the version is the queue's optimistic-concurrency counter and
 * rises by one for each accepted decision. All numbers shown in the UI
 * (priority, confidence, flag rate) come straight from these payloads —
 * nothing is recomputed client-side.
 */

export type Scenario =
  | "single_single"
  | "single_multi"
  | "multi_single"
  | "multi_multi"
  | "special_no_tool"
  | "special_bad_params";

export const SCENARIOS: readonly Scenario[] = [
  "single_single",
  "single_multi",
  "multi_single",
  "multi_multi",
  "special_no_tool",
  "special_bad_params",
];

export type ReviewStatus = "pending" | "approved" | "revised" | "rejected";
export type DecisionKind = "approve" | "revise" | "reject";

export interface ToolCallPayload {
  name: string;
  arguments: Record<string, unknown>;
}

export interface ActionPayload {
  kind: "ask" | "call" | "answer";
  text?: string;
  calls?: ToolCallPayload[];
}

export interface TurnPayload {
  role: "user" | "assistant" | "tool";
  content: string;
  action?: ActionPayload;
  tool_output?: string;
  meta?: Record<string, unknown>;
}

export interface DialoguePayload {
  id: string;
  scenario: Scenario;
  type_label: string;
  tools: { targets: unknown[]; distractors: unknown[] };
  turns: TurnPayload[];
  trajectory: unknown[];
  meta: Record<string, unknown>;
}

export interface RuleReason {
  kind: "rule";
  rule: string;
  hint: string;
  location: string;
}

export interface CheckerReason {
  kind: "checker";
  confidence: number;
  errors: string[];
  rationale: string;
}

export type Reason = RuleReason | CheckerReason;

/** One row of GET /api/queue; `reasons` holds preformatted summaries. */
export interface QueueRow {
  id: string;
  priority: number;
  scenario: string;
  status: ReviewStatus;
  second_pass: boolean;
  reasons: string[];
}

export interface QueuePayload {
  items: QueueRow[];
}

/** Full item from GET /api/items/{id}; `reasons` holds structured detail. */
export interface ItemPayload {
  id: string;
  dialogue: DialoguePayload;
  reasons: Reason[];
  priority: number;
  status: ReviewStatus;
  second_pass: boolean;
  revision: DialoguePayload | null;
}

export interface StatsPayload {
  pending: number;
  approved: number;
  revised: number;
  rejected: number;
  flag_rate: number;
}

export interface DecisionBody {
  decision: DecisionKind;
  reviewer: string;
  revision?: unknown;
}

export interface Versioned<T> {
  data: T;
  version: number;
}

/** A 4xx/5xx envelope from the service, preserving its error code. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly version: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service could not be reached or replied with something unparseable. */
export class ServiceUnreachable extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ServiceUnreachable";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (url, init) => globalThis.fetch(url, init);

export class ReviewApi {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = defaultFetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<Versioned<T>> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceUnreachable(err instanceof Error ? err.message : String(err));
    }
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new ServiceUnreachable(`non-JSON reply with status ${response.status}`);
    }
    const envelope = body as { data?: T; error?: { code?: string; message?: string }; version?: number };
    const version = typeof envelope?.version === "number" ? envelope.version : -1;
    if (envelope && typeof envelope === "object" && envelope.error) {
      const code = typeof envelope.error.code === "string" ? envelope.error.code : "internal";
      const message = typeof envelope.error.message === "string" ? envelope.error.message : "unknown error";
      throw new ApiError(code, message, response.status, version);
    }
    if (!response.ok) {
      throw new ApiError("internal", `unexpected status ${response.status}`, response.status, version);
    }
    return { data: envelope.data as T, version };
  }

  getQueue(status?: ReviewStatus): Promise<Versioned<QueuePayload>> {
    const path = status ? `/api/queue?status=${encodeURIComponent(status)}` : "/api/queue";
    return this.request<QueuePayload>(path);
  }

  getItem(id: string): Promise<Versioned<ItemPayload>> {
    return this.request<ItemPayload>(`/api/items/${encodeURIComponent(id)}`);
  }

  getStats(): Promise<Versioned<StatsPayload>> {
    return this.request<StatsPayload>("/api/stats");
  }

  submitDecision(id: string, body: DecisionBody, ifMatch?: number): Promise<Versioned<ItemPayload>> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (ifMatch !== undefined) {
      headers["If-Match"] = String(ifMatch);
    }
    return this.request<ItemPayload>(`/api/items/${encodeURIComponent(id)}/decision`, {
      method: "POST",
      headers,
      body: JSON.stringify(body),
    });
  }
}
