"""Suggestion records: a machine-applicable plan patch with quantified
impact, provenance-selected example tuples, and the cached fix intermediates
that let an accepted suggestion be installed without re-invoking external
calls."""

from __future__ import annotations

from dataclasses import dataclass, field

from .plan import PlanPatch
from .relation import LineageMap

SOURCES = ("slices", "label_errors", "data_errors")
STATUSES = ("pending", "ready", "applied", "dismissed")


@dataclass(frozen=True)
class ExplanationTuple:
    row_id: str
    post_text: str
    country: str
    language: str
    note: str
    lineage: dict[str, list[str]]

    def to_doc(self) -> dict:
        return {
            "row_id": self.row_id,
            "post_text": self.post_text,
            "country": self.country,
            "language": self.language,
            "note": self.note,
            "lineage": {node: list(ids) for node, ids in sorted(self.lineage.items())},
        }


@dataclass
class Suggestion:
    id: str
    source: str
    title: str
    patch: PlanPatch
    accuracy_before: float
    accuracy_after: float | None
    proxy: bool
    explanation: list[ExplanationTuple]
    status: str
    plan_fingerprint: str
    # precomputed (output, lineage) per patched-plan node; consumed by apply
    fixed: dict[str, tuple[object, LineageMap]] = field(default_factory=dict, repr=False)

    @property
    def expected_impact(self) -> float:
        if self.accuracy_after is None:
            return 0.0
        return self.accuracy_after - self.accuracy_before

    def signature(self) -> str:
        import json

        return json.dumps(
            {"source": self.source, "patch": self.patch.to_doc()},
            sort_keys=True, separators=(",", ":"),
        )

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "source": self.source,
            "title": self.title,
            "status": self.status,
            "accuracy_before": self.accuracy_before,
            "accuracy_after": self.accuracy_after if self.status in ("ready", "applied") else None,
            "expected_impact": self.expected_impact if self.status in ("ready", "applied") else None,
            "proxy": self.proxy,
            "patch": self.patch.to_doc(),
            "explanation": [t.to_doc() for t in self.explanation],
            "plan_fingerprint": self.plan_fingerprint,
        }


@dataclass(frozen=True)
class Finding:
    """An issue report that did not yield an applicable suggestion."""

    source: str
    message: str
    details: dict

    def to_doc(self) -> dict:
        return {"source": self.source, "message": self.message, "details": self.details}


@dataclass
class ShadowOutcome:
    source: str
    suggestions: list[Suggestion]
    findings: list[Finding]
    report: dict
    # reusable intermediates for maintaining this analysis after a plan edit
    cache: dict = field(default_factory=dict, repr=False)
