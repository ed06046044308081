"""Plan execution: materializes every intermediate with row-level lineage,
caches node outputs by fingerprint, and logs every simulated external call.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .calls import InvocationLog, LatencyConfig, ReplayCache
from .corpus import CorpusBundle
from .mlp import MlpModel, predict_mlp, train_mlp
from .plan import PipelinePlan, fingerprint_plan
from .relation import LineageMap, Relation, identity_lineage, join_row_id
from .textsim import SpellChecker, embed_text, rule_label, translate_text


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class VectorStore:
    """Train-row embeddings plus mutable-by-upsert metadata. The first
    metadata column is the label the retrieval vote reads."""

    row_ids: tuple[str, ...]
    matrix: np.ndarray
    metadata: tuple[dict, ...]
    label_column: str

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.row_ids):
            raise EngineError("store matrix shape does not match row ids")

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def n_entries(self) -> int:
        return len(self.row_ids)

    def index_of(self, row_id: str) -> int:
        return self.row_ids.index(row_id)

    def labels(self) -> list:
        return [m[self.label_column] for m in self.metadata]

    def with_metadata(self, updates: dict[str, dict]) -> "VectorStore":
        """Upsert metadata for existing entries; vectors are untouched."""
        meta = list(self.metadata)
        for rid, patch in updates.items():
            i = self.index_of(rid)
            merged = dict(meta[i])
            merged.update(patch)
            meta[i] = merged
        return VectorStore(self.row_ids, self.matrix, tuple(meta), self.label_column)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorStore):
            return NotImplemented
        return (
            self.row_ids == other.row_ids
            and self.label_column == other.label_column
            and self.metadata == other.metadata
            and np.array_equal(self.matrix, other.matrix)
        )


@dataclass
class RunResult:
    plan: PipelinePlan
    fingerprints: dict[str, str]
    node_outputs: dict[str, object]
    lineage: dict[str, LineageMap]
    invocations: InvocationLog
    metrics: dict[str, float]

    def output_of(self, node_id: str):
        return self.node_outputs[node_id]

    def relation_of(self, node_id: str) -> Relation:
        out = self.node_outputs[node_id]
        if not isinstance(out, Relation):
            raise EngineError(f"node {node_id!r} does not produce a relation")
        return out

    @property
    def intermediates(self) -> dict[str, object]:
        return {self.fingerprints[nid]: out for nid, out in self.node_outputs.items()}

    def cache_view(self) -> dict[str, tuple[object, LineageMap]]:
        return {
            self.fingerprints[nid]: (self.node_outputs[nid], self.lineage[nid])
            for nid in self.node_outputs
        }


@dataclass
class EvalContext:
    bundle: CorpusBundle
    log: InvocationLog
    replay: ReplayCache | None = None
    _spellchecker: SpellChecker | None = None
    _reverse_map: dict[str, str] | None = None

    @property
    def spellchecker(self) -> SpellChecker:
        if self._spellchecker is None:
            self._spellchecker = SpellChecker(self.bundle.vocabulary)
        return self._spellchecker

    @property
    def reverse_map(self) -> dict[str, str]:
        if self._reverse_map is None:
            self._reverse_map = self.bundle.reverse_map
        return self._reverse_map

    # Simulated external calls. Replayed answers are reused when a replay
    # cache is attached, but every call still logs its invocation.
    def call_embed(self, text: str, dim: int) -> tuple[float, ...]:
        if self.replay is not None:
            hit, value = self.replay.lookup("embed", {"text": text, "dim": dim})
            if hit:
                return tuple(value)
        vector = embed_text(text, dim)
        if self.replay is not None:
            self.replay.store("embed", {"text": text, "dim": dim}, list(vector))
        return vector

    def call_translate(self, text: str) -> str:
        if self.replay is not None:
            hit, value = self.replay.lookup("translate", {"text": text})
            if hit:
                return value
        out = translate_text(text, self.reverse_map)
        if self.replay is not None:
            self.replay.store("translate", {"text": text}, out)
        return out

    def call_spellcheck(self, text: str) -> str:
        if self.replay is not None:
            hit, value = self.replay.lookup("spellcheck", {"text": text})
            if hit:
                return value
        out, _ = self.spellchecker.correct_text(text)
        if self.replay is not None:
            self.replay.store("spellcheck", {"text": text}, out)
        return out

    def call_llm(self, question: str, context: list[tuple[str, int]]) -> int:
        payload = {"question": question, "context": [[r, int(l)] for r, l in context]}
        if self.replay is not None:
            hit, value = self.replay.lookup("llm_infer", payload)
            if hit:
                return int(value)
        prediction = _majority_vote([l for _, l in context])
        if self.replay is not None:
            self.replay.store("llm_infer", payload, int(prediction))
        return prediction


def _majority_vote(labels: list[int]) -> int:
    ones = sum(1 for l in labels if l == 1)
    zeros = len(labels) - ones
    if ones > zeros:
        return 1
    if zeros > ones:
        return 0
    return int(labels[0])  # tie: label of the single nearest entry


def retrieve(store: VectorStore, vector, k: int) -> list[int]:
    """Indices of the k nearest entries by cosine similarity; ties broken by
    ascending row id. k is clamped to the store size."""
    if store.n_entries == 0:
        raise EngineError("retrieval against an empty vector store")
    sims = store.matrix @ np.asarray(vector, dtype=np.float64)
    id_rank = np.empty(store.n_entries, dtype=np.int64)
    id_rank[np.argsort(np.asarray(store.row_ids))] = np.arange(store.n_entries)
    order = np.lexsort((id_rank, -sims))
    return [int(i) for i in order[: min(k, store.n_entries)]]


def stack_vectors(values: list) -> np.ndarray:
    if not values:
        return np.zeros((0, 0), dtype=np.float64)
    return np.asarray([list(v) for v in values], dtype=np.float64)


# --------------------------------------------------------------------------
# Operator evaluation
# --------------------------------------------------------------------------

def eval_csv_source(node, inputs, ctx: EvalContext):
    path = node.params["path"]
    tables = {"users.csv": ctx.bundle.users, "train_posts.csv": ctx.bundle.train_posts,
              "test_posts.csv": ctx.bundle.test_posts}
    if path not in tables:
        raise EngineError(f"node {node.id!r}: unknown source path {path!r}")
    rel = tables[path]
    if node.params["id_column"] not in rel.columns:
        raise EngineError(f"node {node.id!r}: id_column {node.params['id_column']!r} not present")
    return rel, {rid: () for rid in rel.row_ids}


def eval_filter_in(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    column, values = node.params["column"], node.params["values"]
    if column not in rel.columns:
        raise EngineError(f"node {node.id!r}: missing column {column!r}")
    allowed = set(values)
    kept = [i for i, v in enumerate(rel.columns[column]) if v in allowed]
    out = rel.take(kept)
    return out, identity_lineage(out.row_ids, out.row_ids)


def eval_join(node, inputs, ctx: EvalContext):
    left: Relation = inputs[0]
    right: Relation = inputs[1]
    on = node.params["on"]
    for side, rel in (("left", left), ("right", right)):
        if on not in rel.columns:
            raise EngineError(f"node {node.id!r}: join key {on!r} missing on {side} input")
    right_index: dict = {}
    for j, v in enumerate(right.columns[on]):
        right_index.setdefault(v, []).append(j)
    out_cols: dict[str, list] = {c: [] for c in left.columns}
    for c in right.columns:
        if c != on:
            out_cols[c] = []
    row_ids: list[str] = []
    lineage: LineageMap = {}
    for i, v in enumerate(left.columns[on]):
        for j in right_index.get(v, ()):
            rid = join_row_id(left.row_ids[i], right.row_ids[j])
            row_ids.append(rid)
            for c in left.columns:
                out_cols[c].append(left.columns[c][i])
            for c in right.columns:
                if c != on:
                    out_cols[c].append(right.columns[c][j])
            lineage[rid] = (frozenset((left.row_ids[i],)), frozenset((right.row_ids[j],)))
    return Relation(out_cols, row_ids), lineage


def weak_label_row(text: str, params: dict) -> int:
    return rule_label(text, params["positive_patterns"], params["negative_override_patterns"])


def eval_weak_label(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    try:
        for pat in list(p["positive_patterns"]) + list(p["negative_override_patterns"]):
            re.compile(pat)
    except re.error as e:
        raise EngineError(f"node {node.id!r}: invalid regex: {e}") from e
    texts = rel.columns[p["text_column"]]
    labels = [weak_label_row(t, p) for t in texts]
    overrides = p.get("label_overrides") or {}
    if overrides:
        for i, rid in enumerate(rel.row_ids):
            if rid in overrides:
                labels[i] = int(overrides[rid])
    out = rel.with_column(p["output_column"], labels)
    return out, identity_lineage(out.row_ids, rel.row_ids)


def eval_embed(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    vectors = [ctx.call_embed(t, p["dim"]) for t in rel.columns[p["text_column"]]]
    ctx.log.record_rows("embed", node.id, rel.row_ids)
    out = rel.with_column(p["output_column"], vectors)
    return out, identity_lineage(out.row_ids, rel.row_ids)


def eval_vector_store_build(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    matrix = stack_vectors(rel.columns[p["vector_column"]])
    metadata = tuple(
        {c: rel.columns[c][i] for c in p["metadata_columns"]} for i in range(rel.n_rows)
    )
    store = VectorStore(tuple(rel.row_ids), matrix, metadata, p["metadata_columns"][0])
    return store, identity_lineage(list(store.row_ids), rel.row_ids)


def eval_rag_classify(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    store: VectorStore = inputs[1]
    if not isinstance(store, VectorStore):
        raise EngineError(f"node {node.id!r}: second input must be a vector store")
    if store.n_entries == 0:
        raise EngineError(f"node {node.id!r}: vector store is empty")
    p = node.params
    preds: list[int] = []
    lineage: LineageMap = {}
    for i, rid in enumerate(rel.row_ids):
        pred, retrieved = rag_infer_row(
            store, rel.columns[p["vector_column"]][i], rel.columns[p["text_column"]][i], p["k"], ctx
        )
        preds.append(pred)
        lineage[rid] = (frozenset((rid,)), frozenset(retrieved))
    ctx.log.record_rows("llm_infer", node.id, rel.row_ids)
    out = rel.with_column(p["output_column"], preds)
    return out, lineage


def rag_infer_row(store: VectorStore, vector, text: str, k: int, ctx: EvalContext):
    """One retrieval-augmented prediction: returns (label, retrieved ids)."""
    idx = retrieve(store, vector, k)
    labels = store.labels()
    context = [(store.row_ids[i], int(labels[i])) for i in idx]
    return ctx.call_llm(text, context), [store.row_ids[i] for i in idx]


def eval_mlp_train(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    model = train_mlp(
        stack_vectors(rel.columns[p["vector_column"]]),
        np.asarray(rel.columns[p["label_column"]], dtype=np.float64),
        hidden_units=p["hidden_units"],
        epochs=p["epochs"],
        learning_rate=p["learning_rate"],
        seed=p["seed"],
    )
    ctx.log.record_flat("mlp_train", node.id)
    return model, {"model:00000": (frozenset(rel.row_ids),)}


def eval_mlp_predict(node, inputs, ctx: EvalContext):
    model_pos = node.inputs.index(node.params["model_input"])
    model: MlpModel = inputs[model_pos]
    rel: Relation = inputs[1 - model_pos]
    if not isinstance(model, MlpModel):
        raise EngineError(f"node {node.id!r}: model input does not produce a model")
    vec_col = _predict_vector_column(rel)
    preds = predict_mlp(model, stack_vectors(rel.columns[vec_col]))
    out = rel.with_column(node.params["output_column"], [int(v) for v in preds])
    lineage: LineageMap = {}
    for rid in rel.row_ids:
        sets = [frozenset(), frozenset()]
        sets[model_pos] = frozenset(("model:00000",))
        sets[1 - model_pos] = frozenset((rid,))
        lineage[rid] = tuple(sets)
    return out, lineage


def _predict_vector_column(rel: Relation) -> str:
    vec_cols = [c for c, vals in rel.columns.items() if vals and isinstance(vals[0], tuple)]
    if len(vec_cols) != 1:
        raise EngineError(f"expected exactly one vector column for prediction, found {vec_cols}")
    return vec_cols[0]


def eval_label_binarize(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    values = [1 if v == p["positive_value"] else 0 for v in rel.columns[p["column"]]]
    out = rel.with_column(p["output_column"], values)
    return out, identity_lineage(out.row_ids, rel.row_ids)


def score_relation(correct: int, total: int) -> Relation:
    accuracy = correct / total if total else 0.0
    return Relation(
        {"accuracy": [accuracy], "correct": [correct], "total": [total]}, ["score:00000"]
    )


def eval_score_accuracy(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    preds = rel.columns[p["pred_column"]]
    truth = rel.columns[p["true_column"]]
    correct = sum(1 for a, b in zip(preds, truth) if a == b)
    out = score_relation(correct, rel.n_rows)
    return out, {"score:00000": (frozenset(rel.row_ids),)}


def eval_translate(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    languages = set(p["languages"])
    texts = list(rel.columns[p["text_column"]])
    affected = []
    for i, lang in enumerate(rel.columns["language"]):
        if lang in languages:
            texts[i] = ctx.call_translate(texts[i])
            affected.append(rel.row_ids[i])
    ctx.log.record_rows("translate", node.id, affected)
    out = rel.with_column(p["text_column"], texts)
    return out, identity_lineage(out.row_ids, rel.row_ids)


def eval_spellcheck(node, inputs, ctx: EvalContext):
    rel: Relation = inputs[0]
    p = node.params
    texts = list(rel.columns[p["text_column"]])
    affected = []
    for i, text in enumerate(texts):
        _, needs_work = ctx.spellchecker.correct_text(text)
        if needs_work:
            texts[i] = ctx.call_spellcheck(text)
            affected.append(rel.row_ids[i])
    ctx.log.record_rows("spellcheck", node.id, affected)
    out = rel.with_column(p["text_column"], texts)
    return out, identity_lineage(out.row_ids, rel.row_ids)


EVALUATORS = {
    "csv_source": eval_csv_source,
    "filter_in": eval_filter_in,
    "join": eval_join,
    "weak_label_regex": eval_weak_label,
    "embed": eval_embed,
    "vector_store_build": eval_vector_store_build,
    "rag_classify": eval_rag_classify,
    "mlp_train": eval_mlp_train,
    "mlp_predict": eval_mlp_predict,
    "label_binarize": eval_label_binarize,
    "score_accuracy": eval_score_accuracy,
    "translate": eval_translate,
    "spellcheck": eval_spellcheck,
}


def execute(
    plan: PipelinePlan,
    data: CorpusBundle,
    cache: dict[str, tuple[object, LineageMap]] | None = None,
    latency: LatencyConfig | None = None,
    *,
    sleep: bool = False,
    replay: ReplayCache | None = None,
) -> RunResult:
    """Evaluate the plan topologically. Nodes whose fingerprint hits the
    cache are not re-evaluated and contribute zero invocations."""
    fps = fingerprint_plan(plan)
    cache = cache or {}
    log = InvocationLog(latency, sleep=sleep)
    ctx = EvalContext(bundle=data, log=log, replay=replay)
    node_outputs: dict[str, object] = {}
    lineage: dict[str, LineageMap] = {}
    for node in plan.topo_order():
        hit = cache.get(fps[node.id])
        if hit is not None:
            node_outputs[node.id], lineage[node.id] = hit
            continue
        inputs = [node_outputs[i] for i in node.inputs]
        out, lin = EVALUATORS[node.kind](node, inputs, ctx)
        node_outputs[node.id] = out
        lineage[node.id] = lin
    metrics = extract_metrics(plan, node_outputs)
    return RunResult(plan, fps, node_outputs, lineage, log, metrics)


def extract_metrics(plan: PipelinePlan, node_outputs: dict[str, object]) -> dict[str, float]:
    for out_id in plan.outputs:
        if plan.node(out_id).kind == "score_accuracy":
            rel = node_outputs[out_id]
            return {"accuracy": rel.columns["accuracy"][0]}
    raise EngineError("plan has no score_accuracy output")  # pragma: no cover - validated


# --------------------------------------------------------------------------
# Role resolution: locate the pipeline's functional positions so the
# analysis pipelines and the maintenance layer can navigate any plan shaped
# like the bundled ones.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineRoles:
    kind: str  # "rag" | "train"
    score: str
    predictor: str
    pred_column: str
    true_column: str
    test_input: str       # the predictor's data-side input node
    test_embed: str
    test_source: str
    test_text_column: str
    test_vector_column: str
    weak_label: str
    label_column: str
    train_embed: str
    store: str | None
    model: str | None


def _walk_up(plan: PipelinePlan, node_id: str, kind: str) -> str:
    cur = node_id
    while True:
        node = plan.node(cur)
        if node.kind == kind:
            return cur
        if not node.inputs:
            raise EngineError(f"no {kind} node upstream of {node_id!r}")
        cur = node.inputs[0]


def resolve_roles(plan: PipelinePlan) -> PipelineRoles:
    score = next(o for o in plan.outputs if plan.node(o).kind == "score_accuracy")
    score_node = plan.node(score)
    pred_column = score_node.params["pred_column"]
    predictors = [
        n for n in plan.nodes
        if n.kind in ("rag_classify", "mlp_predict") and n.params["output_column"] == pred_column
    ]
    if len(predictors) != 1:
        raise EngineError("expected exactly one prediction node feeding the score")
    predictor = predictors[0]
    if predictor.kind == "rag_classify":
        kind = "rag"
        store_id = next(i for i in predictor.inputs if plan.node(i).kind == "vector_store_build")
        test_input = next(i for i in predictor.inputs if i != store_id)
        model_id = None
        train_chain_head = store_id
        test_vector_column = predictor.params["vector_column"]
        test_text_column = predictor.params["text_column"]
    else:
        kind = "train"
        model_id = predictor.params["model_input"]
        test_input = next(i for i in predictor.inputs if i != model_id)
        store_id = None
        train_chain_head = model_id
        test_embed_node = plan.node(_walk_up(plan, test_input, "embed"))
        test_vector_column = test_embed_node.params["output_column"]
        test_text_column = test_embed_node.params["text_column"]
    weak_nodes = plan.nodes_of_kind("weak_label_regex")
    if len(weak_nodes) != 1:
        raise EngineError("expected exactly one weak_label_regex node")
    return PipelineRoles(
        kind=kind,
        score=score,
        predictor=predictor.id,
        pred_column=pred_column,
        true_column=score_node.params["true_column"],
        test_input=test_input,
        test_embed=_walk_up(plan, test_input, "embed"),
        test_source=_walk_up(plan, test_input, "csv_source"),
        test_text_column=test_text_column,
        test_vector_column=test_vector_column,
        weak_label=weak_nodes[0].id,
        label_column=weak_nodes[0].params["output_column"],
        train_embed=_walk_up(plan, train_chain_head, "embed"),
        store=store_id,
        model=model_id,
    )
