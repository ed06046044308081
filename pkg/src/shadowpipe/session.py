"""Interactive session state: one plan + corpus + latest run, with the
analysis pipelines feeding a suggestion list and plan edits maintained
incrementally.

Mutations (plan edits, apply, dismiss) serialize through a single lock;
analysis pipelines read immutable snapshots and post results through the
same lock, guarded by a generation counter so stale results are dropped.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

from .calls import LatencyConfig
from .corpus import CorpusBundle
from .engine import RunResult, execute, resolve_roles
from .ivm import MaintenancePolicy, incremental_update, propagate
from .plan import PipelinePlan, apply_patch, plan_fingerprint
from .shadows import ShadowInput
from .shadows.data_errors import CorruptionSpec, run_data_errors_shadow
from .shadows.label_errors import LabelErrorConfig, run_label_errors_shadow
from .shadows.slices import SliceConfig, run_slices_shadow
from .suggest import rank_suggestions
from .suggestion import Finding, ShadowOutcome, Suggestion

ALL_SHADOWS = ("slices", "label_errors", "data_errors")


class SessionError(RuntimeError):
    pass


class StaleSuggestionError(SessionError):
    """The session plan changed since the suggestion was computed."""


@dataclass
class SessionConfig:
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    sleep: bool = False
    seed: int = 7
    slices: SliceConfig = field(default_factory=SliceConfig)
    label_errors: LabelErrorConfig = field(default_factory=LabelErrorConfig)
    data_errors: CorruptionSpec = field(default_factory=CorruptionSpec)


_session_ids = itertools.count(1)


class Session:
    """Single-writer state for one pipeline under interactive improvement."""

    def __init__(self, plan: PipelinePlan, bundle: CorpusBundle,
                 config: SessionConfig | None = None, session_id: str | None = None) -> None:
        self.id = session_id or f"session-{next(_session_ids)}"
        self.config = config or SessionConfig()
        self.bundle = bundle
        self.plan = plan
        self.lock = threading.RLock()
        self.generation = 0
        self.run: RunResult = execute(plan, bundle, latency=self.config.latency, sleep=self.config.sleep)
        self.history: list[tuple[str, dict]] = [(plan_fingerprint(plan), dict(self.run.metrics))]
        self.suggestions: list[Suggestion] = []
        self.findings: list[Finding] = []
        self.reports: dict[str, dict] = {}
        self.pending: set[str] = set()
        self.last_maintenance: dict | None = None
        self._dismissed_signatures: set[str] = set()

    # ----- snapshots -------------------------------------------------------

    def shadow_input(self) -> ShadowInput:
        with self.lock:
            return ShadowInput(self.plan, self.bundle, self.run,
                               latency=self.config.latency, sleep=self.config.sleep,
                               seed=self.config.seed)

    def metrics(self) -> dict:
        with self.lock:
            return dict(self.run.metrics)

    def plan_fp(self) -> str:
        with self.lock:
            return plan_fingerprint(self.plan)

    # ----- analysis --------------------------------------------------------

    def compute_shadow(self, source: str, snapshot: ShadowInput) -> ShadowOutcome:
        if source == "slices":
            return run_slices_shadow(snapshot, self.config.slices)
        if source == "label_errors":
            return run_label_errors_shadow(snapshot, self.config.label_errors)
        if source == "data_errors":
            return run_data_errors_shadow(snapshot, self.config.data_errors)
        raise SessionError(f"unknown analysis pipeline {source!r}")

    def run_shadows(self, sources=ALL_SHADOWS) -> None:
        """Run the requested analysis pipelines synchronously."""
        snapshot = self.shadow_input()
        generation = self.generation
        for source in sources:
            outcome = self.compute_shadow(source, snapshot)
            self.post_outcome(outcome, generation)

    def mark_pending(self, sources=ALL_SHADOWS) -> None:
        with self.lock:
            self.pending.update(sources)

    def post_outcome(self, outcome: ShadowOutcome, generation: int) -> bool:
        """Install an analysis result unless the plan moved on meanwhile."""
        with self.lock:
            self.pending.discard(outcome.source)
            if generation != self.generation:
                return False
            self.suggestions = [s for s in self.suggestions if s.source != outcome.source]
            for s in outcome.suggestions:
                if s.signature() in self._dismissed_signatures:
                    continue
                self.suggestions.append(s)
            self.findings = [f for f in self.findings if f.source != outcome.source]
            self.findings.extend(outcome.findings)
            self.reports[outcome.source] = {
                k: v for k, v in outcome.report.items() if k != "logs"
            }
            return True

    def ranked_suggestions(self) -> list[Suggestion]:
        with self.lock:
            return rank_suggestions(list(self.suggestions))

    def suggestion(self, suggestion_id: str) -> Suggestion:
        with self.lock:
            for s in self.suggestions:
                if s.id == suggestion_id:
                    return s
        raise SessionError(f"unknown suggestion {suggestion_id!r}")

    # ----- mutations -------------------------------------------------------

    def edit_plan(self, new_plan: PipelinePlan) -> tuple[MaintenancePolicy, dict]:
        """Replace the plan, maintaining the run incrementally when the edit
        allows it; all suggestions reset to pending."""
        with self.lock:
            result, policy, report = incremental_update(
                self.run, self.plan, new_plan, self.bundle,
                self.config.latency, sleep=self.config.sleep,
            )
            self.plan = new_plan
            self.run = result
            self.generation += 1
            self.history.append((plan_fingerprint(new_plan), dict(result.metrics)))
            self.suggestions = []
            self.findings = []
            self.last_maintenance = report
            return policy, report

    def apply_suggestion(self, suggestion_id: str) -> Suggestion:
        """Apply a ready suggestion: patch the plan and install the fix's
        cached intermediates, re-invoking nothing the analysis pipeline
        already computed. Other suggestions reset to pending."""
        with self.lock:
            sugg = self.suggestion(suggestion_id)
            if sugg.status == "dismissed":
                raise SessionError(f"suggestion {suggestion_id!r} was dismissed")
            if sugg.status != "ready":
                raise SessionError(f"suggestion {suggestion_id!r} is not ready")
            if sugg.plan_fingerprint != plan_fingerprint(self.plan):
                raise StaleSuggestionError(
                    f"suggestion {suggestion_id!r} was computed for an older plan"
                )
            new_plan = apply_patch(self.plan, sugg.patch)
            result, _deltas = propagate(
                self.run, new_plan, self.bundle, self.config.latency,
                sleep=self.config.sleep, overrides=sugg.fixed,
            )
            self.plan = new_plan
            self.run = result
            self.generation += 1
            self.history.append((plan_fingerprint(new_plan), dict(result.metrics)))
            sugg.status = "applied"
            self.suggestions = [sugg]
            self.findings = []
            return sugg

    def dismiss_suggestion(self, suggestion_id: str) -> None:
        with self.lock:
            sugg = self.suggestion(suggestion_id)
            sugg.status = "dismissed"
            self._dismissed_signatures.add(sugg.signature())

    # ----- views -----------------------------------------------------------

    def to_doc(self) -> dict:
        with self.lock:
            return {
                "id": self.id,
                "plan": self.plan.to_doc(),
                "plan_fingerprint": plan_fingerprint(self.plan),
                "pipeline": resolve_roles(self.plan).kind,
                "metrics": dict(self.run.metrics),
                "history": [{"plan_fingerprint": fp, "metrics": m} for fp, m in self.history],
            }

    def suggestions_doc(self) -> list[dict]:
        with self.lock:
            docs = [s.to_doc() for s in rank_suggestions(list(self.suggestions))]
            for source in sorted(self.pending):
                docs.append({
                    "id": f"pending:{source}",
                    "source": source,
                    "title": f"{source} analysis running",
                    "status": "pending",
                    "accuracy_before": None,
                    "accuracy_after": None,
                    "expected_impact": None,
                    "proxy": False,
                    "patch": None,
                    "explanation": [],
                    "plan_fingerprint": None,
                })
            return docs
