// View-model state machine for the improvement loop. All rendered numbers
// come verbatim from API responses; polling runs at a fixed interval while
// any suggestion is pending.

import {
  ApiClient,
  ApiError,
  HistoryEntry,
  MaintenanceDoc,
  Metrics,
  SuggestionDoc,
} from "./api.js";

export interface ViewModel {
  sessionId: string | null;
  planText: string;
  planError: string | null;
  metrics: Metrics | null;
  history: HistoryEntry[];
  suggestions: SuggestionDoc[];
  maintenance: MaintenanceDoc | null;
  notice: string | null;
  error: string | null;
  polling: boolean;
  busy: boolean;
  // suggestion ids with an in-flight mutation (optimistic chip state)
  inFlight: string | null;
}

export function initialViewModel(): ViewModel {
  return {
    sessionId: null,
    planText: "",
    planError: null,
    metrics: null,
    history: [],
    suggestions: [],
    maintenance: null,
    notice: null,
    error: null,
    polling: false,
    busy: false,
    inFlight: null,
  };
}

export function anyPending(suggestions: SuggestionDoc[]): boolean {
  return suggestions.some((s) => s.status === "pending");
}

export function isClickable(s: SuggestionDoc): boolean {
  return s.status === "ready";
}

export const STALE_NOTICE = "plan changed - suggestions refreshing";

type Scheduler = (callback: () => void, ms: number) => unknown;

export class AppController {
  vm: ViewModel = initialViewModel();
  pollIntervalMs: number;
  private readonly schedule: Scheduler;
  private readonly onChange: (vm: ViewModel) => void;
  private pollTimer: unknown = null;

  constructor(
    private readonly api: ApiClient,
    options: {
      onChange?: (vm: ViewModel) => void;
      pollIntervalMs?: number;
      schedule?: Scheduler;
    } = {},
  ) {
    this.onChange = options.onChange ?? (() => undefined);
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
    this.schedule = options.schedule ?? ((cb, ms) => setTimeout(cb, ms));
  }

  private emit(): void {
    this.onChange(this.vm);
  }

  private fail(err: unknown): void {
    this.vm.error = err instanceof Error ? err.message : String(err);
    this.emit();
  }

  async createSession(planText: string, corpusDir: string): Promise<void> {
    this.vm.busy = true;
    this.vm.error = null;
    this.vm.planError = null;
    this.emit();
    let plan: unknown;
    try {
      plan = JSON.parse(planText);
    } catch (err) {
      this.vm.busy = false;
      this.vm.planError = `plan is not valid JSON: ${(err as Error).message}`;
      this.emit();
      return;
    }
    try {
      const created = await this.api.createSession(plan, corpusDir);
      this.vm.sessionId = created.session_id;
      this.vm.metrics = created.metrics;
      this.vm.planText = planText;
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.vm.planError = err.detail;
      } else {
        this.fail(err);
      }
    } finally {
      this.vm.busy = false;
      this.emit();
    }
  }

  async refresh(): Promise<void> {
    if (!this.vm.sessionId) return;
    try {
      const [session, suggestions] = await Promise.all([
        this.api.getSession(this.vm.sessionId),
        this.api.getSuggestions(this.vm.sessionId),
      ]);
      this.vm.metrics = session.metrics;
      this.vm.history = session.history;
      this.vm.suggestions = suggestions;
      this.emit();
      this.ensurePolling();
    } catch (err) {
      this.fail(err);
    }
  }

  ensurePolling(): void {
    if (anyPending(this.vm.suggestions)) {
      if (!this.vm.polling) {
        this.vm.polling = true;
        this.emit();
      }
      if (this.pollTimer === null) {
        this.pollTimer = this.schedule(() => {
          this.pollTimer = null;
          void this.refresh();
        }, this.pollIntervalMs);
      }
    } else if (this.vm.polling) {
      this.vm.polling = false;
      this.emit();
    }
  }

  async applySuggestion(suggestionId: string): Promise<void> {
    if (!this.vm.sessionId) return;
    const card = this.vm.suggestions.find((s) => s.id === suggestionId);
    if (!card || !isClickable(card)) return;
    this.vm.inFlight = suggestionId;
    this.vm.notice = null;
    this.emit();
    try {
      const response = await this.api.applySuggestion(this.vm.sessionId, suggestionId);
      this.vm.metrics = response.metrics;
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.vm.notice = STALE_NOTICE;
        await this.refresh();
      } else {
        this.fail(err);
      }
    } finally {
      this.vm.inFlight = null;
      this.emit();
    }
  }

  async dismissSuggestion(suggestionId: string): Promise<void> {
    if (!this.vm.sessionId) return;
    this.vm.inFlight = suggestionId;
    this.emit();
    try {
      await this.api.dismissSuggestion(this.vm.sessionId, suggestionId);
      await this.refresh();
    } catch (err) {
      this.fail(err);
    } finally {
      this.vm.inFlight = null;
      this.emit();
    }
  }

  async submitPlan(planText: string): Promise<void> {
    if (!this.vm.sessionId) return;
    this.vm.planError = null;
    this.vm.busy = true;
    this.emit();
    let plan: unknown;
    try {
      plan = JSON.parse(planText);
    } catch (err) {
      this.vm.busy = false;
      this.vm.planError = `plan is not valid JSON: ${(err as Error).message}`;
      this.emit();
      return;
    }
    try {
      const response = await this.api.putPlan(this.vm.sessionId, plan);
      this.vm.planText = planText;
      this.vm.metrics = response.metrics;
      this.vm.maintenance = response.maintenance;
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.vm.planError = err.detail;
      } else {
        this.fail(err);
      }
    } finally {
      this.vm.busy = false;
      this.emit();
    }
  }
}
