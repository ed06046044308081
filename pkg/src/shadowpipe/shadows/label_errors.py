"""Training-data valuation against the expert-labeled test set: exact
nearest-neighbor Shapley values flag likely weak-label errors, the most
negative rows are flipped, and the impact is evaluated by lineage-restricted
re-inference, a retrain, or a cheap proxy model."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..calls import InvocationLog
from ..engine import EvalContext, VectorStore, rag_infer_row, retrieve, stack_vectors
from ..ivm import affected_test_rows
from ..mlp import predict_mlp, train_mlp
from ..plan import PlanPatch, plan_fingerprint
from ..suggest import select_explanation_tuples
from ..suggestion import Finding, ShadowOutcome, Suggestion
from . import ShadowInput

MODES = ("auto", "rag_incremental", "train_retrain", "train_proxy")


@dataclass(frozen=True)
class LabelErrorConfig:
    k: int = 5
    flip_count: int = 40
    mode: str = "auto"

    def __post_init__(self) -> None:
        if self.k < 1 or self.flip_count < 1:
            raise ValueError("k and flip_count must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class FlipSet:
    row_ids: frozenset[str]
    rule: dict

    @property
    def empty(self) -> bool:
        return not self.row_ids


def _neighbor_order(vectors: np.ndarray, row_ids: list[str], query: np.ndarray) -> np.ndarray:
    """Train indices sorted by ascending cosine distance; ties by ascending
    row id (matching the retriever)."""
    sims = vectors @ query
    id_rank = np.empty(len(row_ids), dtype=np.int64)
    id_rank[np.argsort(np.asarray(row_ids))] = np.arange(len(row_ids))
    return np.lexsort((id_rank, -sims))


def knn_shapley(
    train_vectors,
    train_labels,
    test_vectors,
    test_labels,
    k: int,
    train_ids: list[str],
    test_ids: list[str] | None = None,
) -> dict[str, float]:
    """Exact per-row values under the K-nearest-neighbor utility, via the
    descending recurrence from the farthest neighbor; averaged over all test
    points (accumulated in ascending test row id order)."""
    x = stack_vectors(list(train_vectors)) if not isinstance(train_vectors, np.ndarray) else train_vectors
    t = stack_vectors(list(test_vectors)) if not isinstance(test_vectors, np.ndarray) else test_vectors
    y = np.asarray(train_labels)
    yt = np.asarray(test_labels)
    n = x.shape[0]
    m = t.shape[0]
    if m == 0:
        raise ValueError("valuation requires at least one test point")
    if n == 0:
        raise ValueError("valuation requires a nonempty train set")
    test_order = range(m)
    if test_ids is not None:
        test_order = sorted(range(m), key=lambda i: test_ids[i])
    id_rank = np.empty(n, dtype=np.int64)
    id_rank[np.argsort(np.asarray(train_ids))] = np.arange(n)
    sims = x @ t.T
    ranks = np.arange(1, n, dtype=np.float64)  # 1-based rank of positions 0..n-2
    weight = np.minimum(k, ranks) / (ranks * k)
    total = np.zeros(n, dtype=np.float64)
    for ti in test_order:
        order = np.lexsort((id_rank, -sims[:, ti]))
        eq = (y[order] == yt[ti]).astype(np.float64)
        s = np.empty(n, dtype=np.float64)
        # farthest point: in the utility's top-K only while fewer than K
        # points precede it; reduces to eq/n once n >= k
        s[n - 1] = eq[n - 1] * min(k, n) / (n * k)
        if n > 1:
            steps = (eq[:-1] - eq[1:]) * weight
            s[:-1] = s[n - 1] + np.cumsum(steps[::-1])[::-1]
        values = np.empty(n, dtype=np.float64)
        values[order] = s
        total += values
    total /= m
    return {rid: float(v) for rid, v in zip(train_ids, total)}


def brute_force_shapley(train_vectors, train_labels, test_vector, test_label, k: int,
                        train_ids: list[str] | None = None) -> np.ndarray:
    """Permutation-enumeration Shapley values of the K-nearest-neighbor
    utility (v(empty) = 0) for one test point; rejects more than 8 rows."""
    x = stack_vectors(list(train_vectors)) if not isinstance(train_vectors, np.ndarray) else train_vectors
    n = x.shape[0]
    if n > 8:
        raise ValueError("brute-force valuation is limited to 8 train rows")
    y = np.asarray(train_labels)
    ids = train_ids if train_ids is not None else [f"r{i:03d}" for i in range(n)]
    order = _neighbor_order(x, ids, np.asarray(test_vector, dtype=np.float64))
    rank_of = np.empty(n, dtype=np.int64)
    rank_of[order] = np.arange(n)
    eq = (y == test_label).astype(np.float64)

    utility: dict[int, float] = {0: 0.0}
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        members.sort(key=lambda i: rank_of[i])
        utility[mask] = sum(eq[i] for i in members[: min(k, len(members))]) / k

    values = np.zeros(n, dtype=np.float64)
    count = 0
    for perm in itertools.permutations(range(n)):
        mask = 0
        for i in perm:
            values[i] += utility[mask | (1 << i)] - utility[mask]
            mask |= 1 << i
        count += 1
    return values / count


def select_flips(scores: dict[str, float], m: int) -> FlipSet:
    """The m most negative values strictly below zero; ties by ascending
    row id. An empty selection is allowed."""
    if m < 1:
        raise ValueError("m must be >= 1")
    negatives = sorted(
        ((v, rid) for rid, v in scores.items() if v < 0.0), key=lambda t: (t[0], t[1])
    )
    return FlipSet(frozenset(rid for _, rid in negatives[:m]), {"top_m": m})


def _train_intermediates(si: ShadowInput):
    roles = si.roles
    weak_rel = si.run.relation_of(roles.weak_label)
    embed_rel = si.run.relation_of(roles.train_embed)
    embed_node = si.plan.node(roles.train_embed)
    return weak_rel, embed_rel, embed_node.params["output_column"]


def _test_intermediates(si: ShadowInput):
    roles = si.roles
    test_rel = si.run.relation_of(roles.test_embed)
    score_node = si.plan.node(roles.score)
    score_input = si.run.relation_of(score_node.inputs[0])
    truth = list(score_input.columns[score_node.params["true_column"]])
    return test_rel, truth


def compute_scores(si: ShadowInput, config: LabelErrorConfig) -> dict[str, float]:
    roles = si.roles
    weak_rel, embed_rel, vec_col = _train_intermediates(si)
    test_rel, truth = _test_intermediates(si)
    return knn_shapley(
        embed_rel.columns[vec_col],
        weak_rel.columns[roles.label_column],
        test_rel.columns[roles.test_vector_column],
        truth,
        config.k,
        list(embed_rel.row_ids),
        test_ids=list(test_rel.row_ids),
    )


def _flipped_labels(weak_rel, label_col: str, flips: FlipSet) -> list[int]:
    return [
        1 - v if rid in flips.row_ids else v
        for rid, v in zip(weak_rel.row_ids, weak_rel.columns[label_col])
    ]


def _knn_majority(store: VectorStore, vectors, k: int) -> list[int]:
    labels = store.labels()
    preds = []
    for v in vectors:
        idx = retrieve(store, v, k)
        votes = [int(labels[i]) for i in idx]
        ones = sum(votes)
        if ones * 2 > len(votes):
            preds.append(1)
        elif ones * 2 < len(votes):
            preds.append(0)
        else:
            preds.append(votes[0])
    return preds


def evaluate_flip_impact(si: ShadowInput, flips: FlipSet, mode: str, config: LabelErrorConfig):
    """Evaluate flipping the selected weak labels.

    rag_incremental: metadata-only store update and re-inference of exactly
    the test rows whose retrieval lineage touches a flipped row.
    train_retrain: one full model retrain on the flipped labels.
    train_proxy: nearest-neighbor majority vote on the cached embeddings
    before and after the flips; its accuracy delta is the estimated impact.

    Returns (fixed outputs, accuracy_after, changed prediction ids, affected
    ids, proxy flag, invocation log).
    """
    roles = si.roles
    run = si.run
    weak_rel, embed_rel, vec_col = _train_intermediates(si)
    test_rel, truth = _test_intermediates(si)
    label_col = roles.label_column
    log = InvocationLog(si.latency, sleep=si.sleep)
    ctx = EvalContext(bundle=si.bundle, log=log)

    new_labels = _flipped_labels(weak_rel, label_col, flips)
    weak_out = weak_rel.with_column(label_col, new_labels)
    embed_out = embed_rel.with_column(
        label_col,
        [weak_out.value(label_col, rid) for rid in embed_rel.row_ids],
    )
    prior_pred = run.relation_of(roles.predictor)
    before = list(prior_pred.columns[roles.pred_column])
    fixed: dict = {
        roles.weak_label: (weak_out, run.lineage[roles.weak_label]),
        roles.train_embed: (embed_out, run.lineage[roles.train_embed]),
    }

    if mode == "rag_incremental":
        store: VectorStore = run.output_of(roles.store)
        store_out = store.with_metadata({rid: {label_col: weak_out.value(label_col, rid)} for rid in flips.row_ids})
        affected = sorted(affected_test_rows(run, flips.row_ids))
        pred_node = si.plan.node(roles.predictor)
        preds = list(before)
        pred_lineage = dict(run.lineage[roles.predictor])
        for rid in affected:
            i = test_rel.index_of(rid)
            pred, retrieved = rag_infer_row(
                store_out,
                test_rel.columns[roles.test_vector_column][i],
                test_rel.columns[roles.test_text_column][i],
                pred_node.params["k"],
                ctx,
            )
            preds[i] = pred
            pred_lineage[rid] = (frozenset((rid,)), frozenset(retrieved))
        log.record_rows("llm_infer", roles.predictor, affected)
        pred_out = prior_pred.with_column(roles.pred_column, preds)
        fixed[roles.store] = (store_out, run.lineage[roles.store])
        fixed[roles.predictor] = (pred_out, pred_lineage)
        correct = sum(1 for p, t in zip(preds, truth) if p == t)
        accuracy_after = correct / len(preds)
        proxy = False
    elif mode == "train_retrain":
        model_node = si.plan.node(roles.model)
        p = model_node.params
        model = train_mlp(
            stack_vectors(embed_out.columns[vec_col]),
            np.asarray(embed_out.columns[label_col], dtype=np.float64),
            hidden_units=p["hidden_units"], epochs=p["epochs"],
            learning_rate=p["learning_rate"], seed=p["seed"],
        )
        log.record_flat("mlp_train", roles.model)
        preds = [int(v) for v in predict_mlp(model, stack_vectors(test_rel.columns[roles.test_vector_column]))]
        pred_out = prior_pred.with_column(roles.pred_column, preds)
        fixed[roles.model] = (model, {"model:00000": (frozenset(embed_out.row_ids),)})
        fixed[roles.predictor] = (pred_out, run.lineage[roles.predictor])
        affected = sorted(test_rel.row_ids)
        correct = sum(1 for p_, t in zip(preds, truth) if p_ == t)
        accuracy_after = correct / len(preds)
        proxy = False
    elif mode == "train_proxy":
        store = VectorStore(
            tuple(embed_rel.row_ids),
            stack_vectors(embed_rel.columns[vec_col]),
            tuple({label_col: v} for v in weak_rel.columns[label_col]),
            label_col,
        )
        store_after = store.with_metadata({rid: {label_col: weak_out.value(label_col, rid)} for rid in flips.row_ids})
        test_vecs = test_rel.columns[roles.test_vector_column]
        proxy_before = _knn_majority(store, test_vecs, config.k)
        proxy_after = _knn_majority(store_after, test_vecs, config.k)
        acc_b = sum(1 for p, t in zip(proxy_before, truth) if p == t) / len(truth)
        acc_a = sum(1 for p, t in zip(proxy_after, truth) if p == t) / len(truth)
        accuracy_after = run.metrics["accuracy"] + (acc_a - acc_b)
        preds = proxy_after
        before = proxy_before
        affected = sorted(
            rid for rid, a, b in zip(test_rel.row_ids, proxy_before, proxy_after) if a != b
        )
        fixed = {}
        proxy = True
    else:  # pragma: no cover - modes validated upstream
        raise ValueError(f"unsupported mode {mode!r}")

    changed = {rid for rid, a, b in zip(test_rel.row_ids, before, preds) if a != b}
    return fixed, accuracy_after, changed, affected, proxy, log


def run_label_errors_shadow(si: ShadowInput, config: LabelErrorConfig | None = None) -> ShadowOutcome:
    config = config or LabelErrorConfig()
    mode = config.mode
    if mode == "auto":
        mode = "rag_incremental" if si.roles.kind == "rag" else "train_retrain"
    if mode == "rag_incremental" and si.roles.kind != "rag":
        raise ValueError("rag_incremental mode requires a retrieval pipeline")
    if mode in ("train_retrain", "train_proxy") and si.roles.kind != "train":
        raise ValueError(f"{mode} mode requires the trained-model pipeline")

    scores = compute_scores(si, config)
    flips = select_flips(scores, config.flip_count)
    report = {
        "mode": mode,
        "negative_values": sum(1 for v in scores.values() if v < 0.0),
        "flips": sorted(flips.row_ids),
    }
    outcome = ShadowOutcome("label_errors", [], [], report)
    if flips.empty:
        outcome.findings.append(Finding("label_errors", "no train row has a negative value", report))
        return outcome

    fixed, accuracy_after, changed, affected, proxy, log = evaluate_flip_impact(si, flips, mode, config)
    outcome.report["fix_invocations"] = {k: log.count(k) for k in ("llm_infer", "mlp_train") if log.count(k)}
    outcome.report["logs"] = {"fix": log}

    weak_rel, _, _ = _train_intermediates(si)
    existing = si.plan.node(si.roles.weak_label).params.get("label_overrides") or {}
    overrides = dict(existing)
    for rid in sorted(flips.row_ids):
        overrides[rid] = 1 - weak_rel.value(si.roles.label_column, rid)
    patch = PlanPatch(si.roles.weak_label, {"label_overrides": overrides})

    rel = si.run.relation_of(si.roles.predictor)
    notes = {}
    if not proxy:
        pred_out = fixed[si.roles.predictor][0]
        for rid in changed:
            a = rel.value(si.roles.pred_column, rid)
            b = pred_out.value(si.roles.pred_column, rid)
            notes[rid] = f"prediction flips {a}->{b} after fix"
    explanation = select_explanation_tuples(
        list(affected), si.run, si.roles, rel, si.user_country(),
        changed_predictions=changed, notes=notes, seed=si.seed,
    )
    fp = plan_fingerprint(si.plan)
    outcome.suggestions.append(
        Suggestion(
            id=f"label_errors:{fp[:12]}:01",
            source="label_errors",
            title=f"flip {len(flips.row_ids)} suspicious weak labels",
            patch=patch,
            accuracy_before=si.run.metrics["accuracy"],
            accuracy_after=accuracy_after,
            proxy=proxy,
            explanation=explanation,
            status="ready",
            plan_fingerprint=fp,
            fixed=fixed,
        )
    )
    return outcome
