// In-memory stand-in for the pipeline service, implementing the endpoints
// the UI consumes. Analyses become ready after a configurable number of
// suggestion polls, mirroring the background-computation contract.

import { MaintenanceDoc, SuggestionDoc } from "../src/api.js";

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function readySuggestion(id: string, source: string, impact: number): SuggestionDoc {
  return {
    id,
    source,
    title: `${source} fix`,
    status: "ready",
    accuracy_before: 0.7,
    accuracy_after: 0.7 + impact,
    expected_impact: impact,
    proxy: source === "label_errors",
    patch: { target_node: "weak_labels", param_updates: {}, insert_after: null },
    explanation: [
      {
        row_id: "test_posts:00001",
        post_text: "sample post",
        country: "US",
        language: "xx",
        note: "prediction flips 0->1 after fix",
        lineage: { test_posts: ["test_posts:00001"] },
      },
    ],
    plan_fingerprint: "fp-1",
  };
}

function pendingStub(source: string): SuggestionDoc {
  return {
    id: `pending:${source}`,
    source,
    title: `${source} analysis running`,
    status: "pending",
    accuracy_before: null,
    accuracy_after: null,
    expected_impact: null,
    proxy: false,
    patch: null,
    explanation: [],
    plan_fingerprint: null,
  };
}

const SOURCES = ["slices", "label_errors", "data_errors"];

export class MockService {
  metrics = { accuracy: 0.7 };
  history = [{ plan_fingerprint: "fp-1", metrics: { accuracy: 0.7 } }];
  suggestionPolls = 0;
  readyAfterPolls = 2;
  private ready = false;
  private applied: SuggestionDoc | null = null;
  requests: string[] = [];

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${input}`);

    if (method === "POST" && input === "/sessions") {
      return json({ session_id: "session-1", metrics: this.metrics });
    }
    if (method === "GET" && input === "/sessions/session-1") {
      return json({
        id: "session-1",
        plan: { nodes: [], outputs: [] },
        plan_fingerprint: "fp-1",
        pipeline: "rag",
        metrics: this.metrics,
        history: this.history,
      });
    }
    if (method === "GET" && input === "/sessions/session-1/suggestions") {
      this.suggestionPolls += 1;
      if (!this.ready && this.suggestionPolls > this.readyAfterPolls) {
        this.ready = true;
      }
      if (!this.ready) {
        return json(SOURCES.map(pendingStub));
      }
      const fresh = [
        readySuggestion("s-label", "label_errors", 0.2),
        readySuggestion("s-slices", "slices", 0.15),
        readySuggestion("s-data", "data_errors", 0.01),
      ];
      return json(this.applied ? [this.applied, ...SOURCES.map(pendingStub)] : fresh);
    }
    const applyMatch = input.match(/^\/sessions\/session-1\/suggestions\/(.+)\/apply$/);
    if (method === "POST" && applyMatch) {
      if (applyMatch[1] === "stale-id") {
        return json({ detail: "suggestion was computed for an older plan" }, 409);
      }
      this.metrics = { accuracy: 0.9 };
      this.history = [...this.history, { plan_fingerprint: "fp-2", metrics: this.metrics }];
      this.applied = { ...readySuggestion(applyMatch[1], "label_errors", 0.2), status: "applied" };
      return json({ metrics: this.metrics, applied: this.applied });
    }
    const dismissMatch = input.match(/^\/sessions\/session-1\/suggestions\/(.+)\/dismiss$/);
    if (method === "POST" && dismissMatch) {
      return json({ ok: true });
    }
    if (method === "PUT" && input === "/sessions/session-1/plan") {
      const body = JSON.parse(String(init?.body)) as { plan: { nodes: unknown[] } };
      if (!Array.isArray(body.plan.nodes) || body.plan.nodes.length === 0) {
        return json({ detail: "node 'weak_labels': unknown column 'missing'" }, 422);
      }
      const maintenance: MaintenanceDoc = {
        policy:
          body.plan.nodes.length >= 2
            ? { enabled: false, fallback_reason: "multi_operator_change" }
            : { enabled: true, fallback_reason: null },
        nodes: {
          predictions: { changed: 6, inserted: 0, deleted: 0, invocations: { llm_infer: 6 } },
        },
        total_invocations: { llm_infer: 6 },
      };
      this.applied = null;
      this.ready = false;
      this.suggestionPolls = 0;
      return json({ metrics: this.metrics, policy: maintenance.policy, maintenance });
    }
    return json({ detail: `no route for ${method} ${input}` }, 404);
  };
}
