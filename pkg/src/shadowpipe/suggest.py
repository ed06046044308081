"""Explanation-tuple selection, lineage tracing, and suggestion ranking."""

from __future__ import annotations

import random

from .engine import PipelineRoles, RunResult
from .relation import Relation
from .suggestion import ExplanationTuple, Suggestion

EXPLANATION_CAP = 10


def trace_lineage(run: RunResult, node_id: str, row_id: str, cap: int = 12) -> dict[str, list[str]]:
    """Walk the stored lineage maps upstream from one output row. Returns
    node id -> contributing row ids (capped per node for rendering)."""
    plan = run.plan
    chain: dict[str, set[str]] = {node_id: {row_id}}
    frontier: list[tuple[str, str]] = [(node_id, row_id)]
    seen: set[tuple[str, str]] = set()
    while frontier:
        nid, rid = frontier.pop()
        if (nid, rid) in seen:
            continue
        seen.add((nid, rid))
        sets = run.lineage.get(nid, {}).get(rid)
        if not sets:
            continue
        node = plan.node(nid)
        for pos, id_set in enumerate(sets):
            if not id_set:
                continue
            upstream = node.inputs[pos]
            bucket = chain.setdefault(upstream, set())
            for contributor in sorted(id_set)[:cap]:
                if len(bucket) < cap:
                    bucket.add(contributor)
                    frontier.append((upstream, contributor))
    return {nid: sorted(ids) for nid, ids in chain.items()}


def select_explanation_tuples(
    affected: list[str],
    run: RunResult,
    roles: PipelineRoles,
    rel: Relation,
    country_of: dict[str, str],
    *,
    changed_predictions: set[str] | None = None,
    notes: dict[str, str] | None = None,
    cap: int = EXPLANATION_CAP,
    seed: int = 7,
) -> list[ExplanationTuple]:
    """Rows whose prediction changed come first; the remainder is a seeded
    stratified sample over the test slicing features (country strata)."""
    changed_predictions = changed_predictions or set()
    notes = notes or {}
    flips = sorted(r for r in affected if r in changed_predictions)
    rest = sorted(r for r in affected if r not in changed_predictions)
    picked = flips[:cap]
    budget = cap - len(picked)
    if budget > 0 and rest:
        rng = random.Random(seed)
        strata: dict[str, list[str]] = {}
        for rid in rest:
            country = country_of.get(rel.value("user_id", rid), "?")
            strata.setdefault(country, []).append(rid)
        queues = {}
        for key in sorted(strata):
            rows = sorted(strata[key])
            rng.shuffle(rows)
            queues[key] = rows
        while budget > 0 and any(queues.values()):
            for key in sorted(queues):
                if budget <= 0:
                    break
                if queues[key]:
                    picked.append(queues[key].pop(0))
                    budget -= 1
    tuples = []
    for rid in picked:
        tuples.append(
            ExplanationTuple(
                row_id=rid,
                post_text=rel.value("post_text", rid),
                country=country_of.get(rel.value("user_id", rid), "?"),
                language=rel.value("language", rid),
                note=notes.get(rid, "affected by the fix"),
                lineage=trace_lineage(run, roles.predictor, rid),
            )
        )
    return tuples


def rank_suggestions(suggestions: list[Suggestion]) -> list[Suggestion]:
    """Descending expected impact; proxy-estimated impacts rank after exact
    ones of equal magnitude; remaining ties break on the source name."""
    return sorted(
        suggestions,
        key=lambda s: (-s.expected_impact, s.proxy, s.source, s.id),
    )
