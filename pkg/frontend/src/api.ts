// Typed client over the pipeline service's HTTP/JSON API. The UI renders
// these payloads verbatim; nothing is recomputed client-side.

export interface Metrics {
  accuracy: number;
}

export interface HistoryEntry {
  plan_fingerprint: string;
  metrics: Metrics;
}

export interface SessionDoc {
  id: string;
  plan: unknown;
  plan_fingerprint: string;
  pipeline: string;
  metrics: Metrics;
  history: HistoryEntry[];
}

export type SuggestionStatus = "pending" | "ready" | "applied" | "dismissed";

export interface ExplanationTupleDoc {
  row_id: string;
  post_text: string;
  country: string;
  language: string;
  note: string;
  lineage: Record<string, string[]>;
}

export interface SuggestionDoc {
  id: string;
  source: string;
  title: string;
  status: SuggestionStatus;
  accuracy_before: number | null;
  accuracy_after: number | null;
  expected_impact: number | null;
  proxy: boolean;
  patch: unknown;
  explanation: ExplanationTupleDoc[];
  plan_fingerprint: string | null;
}

export interface MaintenancePolicyDoc {
  enabled: boolean;
  fallback_reason: string | null;
}

export interface NodeMaintenanceDoc {
  changed: number;
  inserted: number;
  deleted: number;
  invocations: Record<string, number>;
}

export interface MaintenanceDoc {
  policy: MaintenancePolicyDoc;
  nodes: Record<string, NodeMaintenanceDoc>;
  total_invocations: Record<string, number>;
}

export interface PlanUpdateResponse {
  metrics: Metrics;
  policy: MaintenancePolicyDoc;
  maintenance: MaintenanceDoc;
}

export interface ApplyResponse {
  metrics: Metrics;
  applied: SuggestionDoc;
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      if (body && body.detail !== undefined) {
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
      }
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly base: string = "",
  ) {}

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    }).then((r) => parse<T>(r));
  }

  createSession(plan: unknown, corpusDir: string): Promise<{ session_id: string; metrics: Metrics }> {
    return this.post("/sessions", { plan, corpus_dir: corpusDir });
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.fetchFn(`${this.base}/sessions/${sessionId}`).then((r) => parse<SessionDoc>(r));
  }

  getSuggestions(sessionId: string): Promise<SuggestionDoc[]> {
    return this.fetchFn(`${this.base}/sessions/${sessionId}/suggestions`).then((r) =>
      parse<SuggestionDoc[]>(r),
    );
  }

  applySuggestion(sessionId: string, suggestionId: string): Promise<ApplyResponse> {
    return this.post(`/sessions/${sessionId}/suggestions/${suggestionId}/apply`);
  }

  dismissSuggestion(sessionId: string, suggestionId: string): Promise<{ ok: boolean }> {
    return this.post(`/sessions/${sessionId}/suggestions/${suggestionId}/dismiss`);
  }

  putPlan(sessionId: string, plan: unknown): Promise<PlanUpdateResponse> {
    return this.fetchFn(`${this.base}/sessions/${sessionId}/plan`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ plan }),
    }).then((r) => parse<PlanUpdateResponse>(r));
  }

  getExplanations(sessionId: string, suggestionId: string): Promise<ExplanationTupleDoc[]> {
    return this.fetchFn(`${this.base}/sessions/${sessionId}/explanations/${suggestionId}`).then(
      (r) => parse<ExplanationTupleDoc[]>(r),
    );
  }
}
