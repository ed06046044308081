"""Best-effort incremental maintenance of a prior run after a plan edit.

Single-operator param edits propagate row deltas through the DAG, re-invoking
external calls only where required; anything else falls back to full
re-execution. Final metrics and intermediates are bit-identical to a cold
run either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calls import InvocationLog, LatencyConfig, ReplayCache
from .corpus import CorpusBundle
from .engine import (
    EVALUATORS,
    EngineError,
    EvalContext,
    RunResult,
    VectorStore,
    extract_metrics,
    rag_infer_row,
    resolve_roles,
    score_relation,
    stack_vectors,
    weak_label_row,
)
from .mlp import predict_mlp
from .plan import PipelinePlan, diff_plans, fingerprint_plan
from .relation import LineageMap, Relation

FALLBACK_REASONS = ("multi_operator_change", "structural_change", "source_schema_change")


@dataclass(frozen=True)
class DeltaSet:
    changed: frozenset[str] = frozenset()
    inserted: frozenset[str] = frozenset()
    deleted: frozenset[str] = frozenset()

    @property
    def empty(self) -> bool:
        return not (self.changed or self.inserted or self.deleted)

    @property
    def touched(self) -> frozenset[str]:
        return self.changed | self.inserted | self.deleted

    def sizes(self) -> dict[str, int]:
        return {"changed": len(self.changed), "inserted": len(self.inserted), "deleted": len(self.deleted)}


@dataclass(frozen=True)
class MaintenancePolicy:
    enabled: bool
    fallback_reason: str | None = None

    def __post_init__(self) -> None:
        if (self.fallback_reason is not None) == self.enabled:
            raise ValueError("fallback_reason must be set iff maintenance is disabled")
        if self.fallback_reason is not None and self.fallback_reason not in FALLBACK_REASONS:
            raise ValueError(f"unknown fallback reason {self.fallback_reason!r}")

    def to_doc(self) -> dict:
        return {"enabled": self.enabled, "fallback_reason": self.fallback_reason}


def diff_relations(old: Relation, new: Relation) -> DeltaSet:
    old_ids = set(old.row_ids)
    new_ids = set(new.row_ids)
    inserted = frozenset(new_ids - old_ids)
    deleted = frozenset(old_ids - new_ids)
    changed = frozenset(
        rid for rid in old_ids & new_ids
        if not old.rows_equal(old.index_of(rid), new, new.index_of(rid))
    )
    return DeltaSet(changed, inserted, deleted)


def affected_test_rows(prior: RunResult, changed_train_rows: set[str] | frozenset[str]) -> set[str]:
    """Test rows whose retrieval lineage intersects the changed train rows."""
    roles = resolve_roles(prior.plan)
    if roles.kind != "rag":
        raise EngineError("plan has no rag_classify node")
    changed = frozenset(changed_train_rows)
    if not changed:
        return set()
    lineage = prior.lineage[roles.predictor]
    return {rid for rid, sets in lineage.items() if sets[1] & changed}


def _maintenance_report(policy: MaintenancePolicy, deltas: dict[str, DeltaSet], log: InvocationLog) -> dict:
    per_node = log.by_node()
    report = {"policy": policy.to_doc(), "nodes": {}}
    for nid, d in deltas.items():
        entry = d.sizes()
        entry["invocations"] = per_node.get(nid, {})
        report["nodes"][nid] = entry
    for nid, counts in per_node.items():
        report["nodes"].setdefault(nid, {"changed": 0, "inserted": 0, "deleted": 0, "invocations": counts})
    report["total_invocations"] = {k: log.count(k) for k in ("embed", "llm_infer", "translate", "spellcheck", "mlp_train") if log.count(k)}
    return report


def incremental_update(
    prior: RunResult,
    old_plan: PipelinePlan,
    new_plan: PipelinePlan,
    data: CorpusBundle,
    latency: LatencyConfig | None = None,
    *,
    sleep: bool = False,
    replay: ReplayCache | None = None,
) -> tuple[RunResult, MaintenancePolicy, dict]:
    if prior.fingerprints != fingerprint_plan(old_plan):
        raise EngineError("prior run does not correspond to old_plan (fingerprint mismatch)")
    diff = diff_plans(old_plan, new_plan)
    if diff.empty and old_plan.outputs == new_plan.outputs:
        log = InvocationLog(latency, sleep=sleep)
        policy = MaintenancePolicy(True, None)
        result = RunResult(new_plan, dict(prior.fingerprints), dict(prior.node_outputs),
                           dict(prior.lineage), log, dict(prior.metrics))
        return result, policy, _maintenance_report(policy, {}, log)

    reason = None
    if old_plan.outputs != new_plan.outputs or diff.added or diff.removed:
        reason = "structural_change"
    elif not diff.single_operator_change:
        reason = "multi_operator_change" if len(diff.changed) > 1 else "structural_change"
    else:
        (changed_id,) = diff.changed
        if new_plan.node(changed_id).kind == "csv_source":
            reason = "source_schema_change"
    if reason is not None:
        from .engine import execute
        result = execute(new_plan, data, cache=prior.cache_view(), latency=latency,
                         sleep=sleep, replay=replay)
        policy = MaintenancePolicy(False, reason)
        return result, policy, _maintenance_report(policy, {}, result.invocations)

    (changed_id,) = diff.changed
    result, deltas = propagate(prior, new_plan, data, latency, sleep=sleep, replay=replay,
                               force_eval=frozenset((changed_id,)))
    policy = MaintenancePolicy(True, None)
    return result, policy, _maintenance_report(policy, deltas, result.invocations)


def _prior_equivalent(prior: RunResult, plan: PipelinePlan, node_id: str):
    """Prior output standing in for a node: for nodes spliced into the plan
    since the prior run, the nearest upstream node the prior run knew."""
    cur = node_id
    while cur not in prior.node_outputs:
        inputs = plan.node(cur).inputs
        if len(inputs) != 1:
            return None
        cur = inputs[0]
    return prior.node_outputs[cur]


def propagate(
    prior: RunResult,
    new_plan: PipelinePlan,
    data: CorpusBundle,
    latency: LatencyConfig | None = None,
    *,
    sleep: bool = False,
    replay: ReplayCache | None = None,
    force_eval: frozenset[str] = frozenset(),
    overrides: dict[str, tuple[object, LineageMap]] | None = None,
) -> tuple[RunResult, dict[str, DeltaSet]]:
    """Tuple-level delta propagation from a prior run to a revised plan.

    ``force_eval`` nodes are re-evaluated in full (the edited operator);
    ``overrides`` supplies precomputed (output, lineage) pairs, used when a
    fix evaluated by an analysis pipeline is installed without re-invoking
    its external calls. Nodes absent from the prior run (insertions) are
    evaluated in full and diffed against their nearest prior upstream.
    """
    overrides = overrides or {}
    new_fps = fingerprint_plan(new_plan)
    log = InvocationLog(latency, sleep=sleep)
    ctx = EvalContext(bundle=data, log=log, replay=replay)

    outputs: dict[str, object] = {}
    lineage: dict[str, LineageMap] = {}
    deltas: dict[str, DeltaSet] = {}
    vectors_changed: dict[str, bool] = {}

    for node in new_plan.topo_order():
        nid = node.id
        known = nid in prior.node_outputs
        if nid in overrides:
            out, lin = overrides[nid]
            base = prior.node_outputs[nid] if known else _prior_equivalent(prior, new_plan, nid)
            delta = _full_delta(out) if base is None else _output_delta(base, out)
            if node.kind == "vector_store_build":
                vectors_changed[nid] = not (
                    known and np.array_equal(prior.node_outputs[nid].matrix, out.matrix)
                )
        elif known and new_fps[nid] == prior.fingerprints.get(nid):
            out, lin, delta = prior.node_outputs[nid], prior.lineage[nid], DeltaSet()
        elif (
            known
            and nid not in force_eval
            and all(deltas[i].empty for i in node.inputs)
            and not any(vectors_changed.get(i) for i in node.inputs)
        ):
            # upstream fingerprints moved but no value changed anywhere
            out, lin, delta = prior.node_outputs[nid], prior.lineage[nid], DeltaSet()
        elif not known or nid in force_eval:
            ins = [outputs[i] for i in node.inputs]
            out, lin = EVALUATORS[node.kind](node, ins, ctx)
            base = prior.node_outputs[nid] if known else _prior_equivalent(prior, new_plan, nid)
            delta = _full_delta(out) if base is None else _output_delta(base, out)
            if node.kind == "vector_store_build":
                vectors_changed[nid] = not (
                    known and np.array_equal(prior.node_outputs[nid].matrix, out.matrix)
                )
        else:
            ins = [outputs[i] for i in node.inputs]
            input_deltas = [deltas[i] for i in node.inputs]
            out, lin, delta, vec_flag = _step(node, ins, input_deltas, prior, ctx, vectors_changed,
                                              new_plan)
            if node.kind == "vector_store_build":
                vectors_changed[nid] = vec_flag
        outputs[nid] = out
        lineage[nid] = lin
        deltas[nid] = delta

    metrics = extract_metrics(new_plan, outputs)
    result = RunResult(new_plan, new_fps, outputs, lineage, log, metrics)
    return result, deltas


def _full_delta(out) -> DeltaSet:
    if isinstance(out, Relation):
        return DeltaSet(changed=frozenset(out.row_ids))
    if isinstance(out, VectorStore):
        return DeltaSet(changed=frozenset(out.row_ids))
    return DeltaSet(changed=frozenset(("model:00000",)))


def _output_delta(old, new) -> DeltaSet:
    if isinstance(old, Relation) and isinstance(new, Relation):
        return diff_relations(old, new)
    if isinstance(old, VectorStore) and isinstance(new, VectorStore):
        if old.row_ids != new.row_ids:
            return DeltaSet(
                changed=frozenset(set(old.row_ids) & set(new.row_ids)),
                inserted=frozenset(set(new.row_ids) - set(old.row_ids)),
                deleted=frozenset(set(old.row_ids) - set(new.row_ids)),
            )
        changed = {
            rid for i, rid in enumerate(new.row_ids)
            if new.metadata[i] != old.metadata[i] or not np.array_equal(new.matrix[i], old.matrix[i])
        }
        return DeltaSet(frozenset(changed))
    return DeltaSet() if old == new else DeltaSet(changed=frozenset(("model:00000",)))


def _step(node, ins, input_deltas, prior: RunResult, ctx: EvalContext,
          vectors_changed: dict[str, bool], plan: PipelinePlan):
    """Delta rule for one downstream node. Returns (output, lineage, delta,
    store_vectors_changed)."""
    kind = node.kind
    nid = node.id
    prior_out = prior.node_outputs[nid]
    p = node.params

    def _prior_input(position: int) -> Relation:
        return _prior_equivalent(prior, plan, node.inputs[position])

    if kind in ("filter_in", "join", "label_binarize"):
        # pure relational operators: recompute and diff
        out, lin = EVALUATORS[kind](node, ins, ctx)
        return out, lin, _output_delta(prior_out, out), False

    if kind == "weak_label_regex":
        rel: Relation = ins[0]
        prior_in = _prior_input(0)
        overrides = p.get("label_overrides") or {}
        labels = []
        for i, rid in enumerate(rel.row_ids):
            if rid in input_deltas[0].touched or not prior_in.has_row(rid):
                label = weak_label_row(rel.columns[p["text_column"]][i], p)
                if rid in overrides:
                    label = int(overrides[rid])
                labels.append(label)
            else:
                labels.append(prior_out.value(p["output_column"], rid))
        out = rel.with_column(p["output_column"], labels)
        lin = {rid: (frozenset((rid,)),) for rid in out.row_ids}
        return out, lin, _output_delta(prior_out, out), False

    if kind == "embed":
        rel: Relation = ins[0]
        prior_in = _prior_input(0)
        text_col = p["text_column"]
        vectors = []
        invoked = []
        for i, rid in enumerate(rel.row_ids):
            known = prior_in.has_row(rid) and prior_out.has_row(rid)
            if known and rid not in input_deltas[0].touched:
                vectors.append(prior_out.value(p["output_column"], rid))
            elif known and prior_in.value(text_col, rid) == rel.columns[text_col][i]:
                # row changed elsewhere; the text and hence the vector did not
                vectors.append(prior_out.value(p["output_column"], rid))
            else:
                vectors.append(ctx.call_embed(rel.columns[text_col][i], p["dim"]))
                invoked.append(rid)
        ctx.log.record_rows("embed", nid, invoked)
        out = rel.with_column(p["output_column"], vectors)
        lin = {rid: (frozenset((rid,)),) for rid in out.row_ids}
        return out, lin, _output_delta(prior_out, out), False

    if kind in ("translate", "spellcheck"):
        rel: Relation = ins[0]
        prior_in = _prior_input(0)
        text_col = p["text_column"]
        texts = []
        invoked = []
        for i, rid in enumerate(rel.row_ids):
            known = prior_in.has_row(rid) and prior_out.has_row(rid)
            if known and rid not in input_deltas[0].touched:
                texts.append(prior_out.value(text_col, rid))
                continue
            text = rel.columns[text_col][i]
            if kind == "translate":
                if rel.columns["language"][i] in set(p["languages"]):
                    texts.append(ctx.call_translate(text))
                    invoked.append(rid)
                else:
                    texts.append(text)
            else:
                _, needs_work = ctx.spellchecker.correct_text(text)
                if needs_work:
                    texts.append(ctx.call_spellcheck(text))
                    invoked.append(rid)
                else:
                    texts.append(text)
        ctx.log.record_rows(kind, nid, invoked)
        out = rel.with_column(text_col, texts)
        lin = {rid: (frozenset((rid,)),) for rid in out.row_ids}
        return out, lin, _output_delta(prior_out, out), False

    if kind == "vector_store_build":
        rel: Relation = ins[0]
        delta_in = input_deltas[0]
        if delta_in.inserted or delta_in.deleted:
            out, lin = EVALUATORS[kind](node, ins, ctx)
            return out, lin, _output_delta(prior_out, out), True
        prior_store: VectorStore = prior_out
        matrix = prior_store.matrix
        metadata = list(prior_store.metadata)
        vec_flag = False
        for rid in delta_in.changed:
            i = prior_store.index_of(rid)
            j = rel.index_of(rid)
            new_vec = np.asarray(rel.columns[p["vector_column"]][j], dtype=np.float64)
            if not np.array_equal(matrix[i], new_vec):
                if not vec_flag:
                    matrix = matrix.copy()
                    vec_flag = True
                matrix[i] = new_vec
            metadata[i] = {c: rel.columns[c][j] for c in p["metadata_columns"]}
        out = VectorStore(prior_store.row_ids, matrix, tuple(metadata), prior_store.label_column)
        delta = _output_delta(prior_out, out)
        return out, prior.lineage[nid], delta, vec_flag

    if kind == "rag_classify":
        rel: Relation = ins[0]
        store: VectorStore = ins[1]
        delta_t = input_deltas[0]
        delta_s = input_deltas[1]
        store_vec_changed = vectors_changed.get(node.inputs[1], False)
        prior_lin = prior.lineage[nid]
        if store_vec_changed:
            reinfer = set(rel.row_ids)
        else:
            reinfer = {rid for rid in rel.row_ids if rid in delta_t.touched or not prior_out.has_row(rid)}
            if delta_s.changed:
                reinfer |= {
                    rid for rid in rel.row_ids
                    if rid in prior_lin and (prior_lin[rid][1] & delta_s.changed)
                }
        preds = []
        lin: LineageMap = {}
        invoked = []
        for i, rid in enumerate(rel.row_ids):
            if rid in reinfer:
                pred, retrieved = rag_infer_row(
                    store, rel.columns[p["vector_column"]][i], rel.columns[p["text_column"]][i],
                    p["k"], ctx,
                )
                preds.append(pred)
                lin[rid] = (frozenset((rid,)), frozenset(retrieved))
                invoked.append(rid)
            else:
                preds.append(prior_out.value(p["output_column"], rid))
                lin[rid] = prior_lin[rid]
        ctx.log.record_rows("llm_infer", nid, invoked)
        out = rel.with_column(p["output_column"], preds)
        return out, lin, _output_delta(prior_out, out), False

    if kind == "mlp_train":
        out, lin = EVALUATORS[kind](node, ins, ctx)
        return out, lin, _output_delta(prior_out, out), False

    if kind == "mlp_predict":
        model_pos = node.inputs.index(p["model_input"])
        rel: Relation = ins[1 - model_pos]
        model = ins[model_pos]
        model_changed = not input_deltas[model_pos].empty
        data_delta = input_deltas[1 - model_pos]
        vec_col = _predict_vector_column_of(rel)
        preds = []
        for i, rid in enumerate(rel.row_ids):
            if not model_changed and prior_out.has_row(rid) and rid not in data_delta.touched:
                preds.append(prior_out.value(p["output_column"], rid))
            else:
                preds.append(int(predict_mlp(model, stack_vectors([rel.columns[vec_col][i]]))[0]))
        out = rel.with_column(p["output_column"], preds)
        lin: LineageMap = {}
        for rid in rel.row_ids:
            sets = [frozenset(), frozenset()]
            sets[model_pos] = frozenset(("model:00000",))
            sets[1 - model_pos] = frozenset((rid,))
            lin[rid] = tuple(sets)
        return out, lin, _output_delta(prior_out, out), False

    if kind == "score_accuracy":
        rel: Relation = ins[0]
        delta_in = input_deltas[0]
        prior_in = _prior_input(0)
        prior_correct = prior_out.columns["correct"][0]
        pred_col, true_col = p["pred_column"], p["true_column"]
        delta_correct = 0
        for rid in delta_in.changed | delta_in.inserted:
            if rel.has_row(rid):
                i = rel.index_of(rid)
                now = int(rel.columns[pred_col][i] == rel.columns[true_col][i])
                before = 0
                if rid in delta_in.changed and prior_in.has_row(rid):
                    j = prior_in.index_of(rid)
                    before = int(prior_in.columns[pred_col][j] == prior_in.columns[true_col][j])
                delta_correct += now - before
        for rid in delta_in.deleted:
            if prior_in.has_row(rid):
                j = prior_in.index_of(rid)
                delta_correct -= int(prior_in.columns[pred_col][j] == prior_in.columns[true_col][j])
        out = score_relation(prior_correct + delta_correct, rel.n_rows)
        lin = {"score:00000": (frozenset(rel.row_ids),)}
        return out, lin, _output_delta(prior_out, out), False

    raise EngineError(f"no delta rule for kind {kind}")  # pragma: no cover


def _predict_vector_column_of(rel: Relation) -> str:
    vec_cols = [c for c, vals in rel.columns.items() if vals and isinstance(vals[0], tuple)]
    if len(vec_cols) != 1:
        raise EngineError(f"expected exactly one vector column, found {vec_cols}")
    return vec_cols[0]
