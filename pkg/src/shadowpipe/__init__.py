"""Incremental pipeline engine with background issue-detection pipelines,
row-level lineage, and machine-applicable fix suggestions."""

from .builtin import load_builtin_plan
from .calls import LatencyConfig, ReplayCache
from .corpus import CorpusBundle, CorpusConfig, export_corpus, generate_corpus, load_corpus
from .engine import RunResult, VectorStore, execute, resolve_roles
from .ivm import MaintenancePolicy, affected_test_rows, incremental_update
from .plan import OperatorNode, PipelinePlan, PlanPatch, apply_patch, diff_plans, parse_plan
from .session import Session, SessionConfig

__version__ = "0.1.0"

__all__ = [
    "CorpusBundle", "CorpusConfig", "LatencyConfig", "MaintenancePolicy", "OperatorNode",
    "PipelinePlan", "PlanPatch", "ReplayCache", "RunResult", "Session", "SessionConfig",
    "VectorStore", "affected_test_rows", "apply_patch", "diff_plans", "execute",
    "export_corpus", "generate_corpus", "incremental_update", "load_builtin_plan",
    "load_corpus", "parse_plan", "resolve_roles",
]
