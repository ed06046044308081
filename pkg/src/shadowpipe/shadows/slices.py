"""Slice finding over test-set errors, plus a translation fix for
underperforming language slices evaluated only on the rows it touches."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..calls import InvocationLog
from ..engine import EvalContext, rag_infer_row, stack_vectors
from ..mlp import predict_mlp
from ..plan import OperatorNode, PlanPatch, plan_fingerprint
from ..relation import identity_lineage
from ..suggest import select_explanation_tuples
from ..suggestion import Finding, ShadowOutcome, Suggestion
from . import ShadowInput


@dataclass(frozen=True)
class SliceConfig:
    alpha: float = 0.95
    min_support: int = 10
    max_level: int = 3
    top_k: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.min_support < 1 or self.max_level < 1 or self.top_k < 1:
            raise ValueError("min_support, max_level and top_k must be >= 1")


@dataclass(frozen=True)
class Slice:
    predicates: tuple[tuple[str, str], ...]
    support: int
    avg_error: float
    score: float

    def to_doc(self) -> dict:
        return {
            "predicates": {f: v for f, v in self.predicates},
            "support": self.support,
            "avg_error": self.avg_error,
            "score": self.score,
        }


def slice_score(alpha: float, n: int, e_bar: float, size: int, err: int) -> float:
    return alpha * ((err / size) / e_bar - 1.0) - (1.0 - alpha) * (n / size - 1.0)


def _refinement_bound(cfg: SliceConfig, n: int, e_bar: float, size: int, err: int) -> float:
    """Upper bound on the score of any refinement with support >= min_support.

    The bound is maximized over candidate supports; the score is piecewise
    monotone in the support with a breakpoint where the hypothetical
    refinement stops being all-error, so checking the interval ends and the
    breakpoint suffices.
    """
    candidates = {cfg.min_support, size}
    if 0 < err < size:
        candidates.add(max(cfg.min_support, min(err, size)))
    best = float("-inf")
    for s in candidates:
        if cfg.min_support <= s <= size:
            best = max(best, slice_score(cfg.alpha, n, e_bar, s, min(s, err)))
    return best


def slice_find(features: dict[str, list[str]], errors: list[int], config: SliceConfig | None = None) -> list[Slice]:
    """Level-wise lattice search over conjunctions of categorical predicates
    with sound upper-bound pruning against the running top-k floor."""
    config = config or SliceConfig()
    if not features:
        raise ValueError("slice finding requires at least one categorical feature")
    n = len(errors)
    for name, values in features.items():
        if len(values) != n:
            raise ValueError(f"feature {name!r} length mismatch")
    total_err = sum(errors)
    if n == 0 or total_err == 0:
        return []
    e_bar = total_err / n
    names = sorted(features)

    base: dict[tuple[str, str], list[int]] = {}
    for name in names:
        for i, v in enumerate(features[name]):
            base.setdefault((name, str(v)), []).append(i)

    scored: list[Slice] = []
    floor_heap: list[float] = []

    def register(predicates: tuple[tuple[str, str], ...], rows: list[int]) -> None:
        err = sum(errors[i] for i in rows)
        s = Slice(predicates, len(rows), err / len(rows), slice_score(config.alpha, n, e_bar, len(rows), err))
        scored.append(s)
        if len(floor_heap) < config.top_k:
            heapq.heappush(floor_heap, s.score)
        else:
            heapq.heappushpop(floor_heap, s.score)

    def floor() -> float:
        return floor_heap[0] if len(floor_heap) == config.top_k else float("-inf")

    level: list[tuple[tuple[tuple[str, str], ...], list[int]]] = []
    for key in sorted(base):
        rows = base[key]
        if len(rows) >= config.min_support:
            register((key,), rows)
            level.append(((key,), rows))

    depth = 1
    while depth < config.max_level and level:
        next_level = []
        for predicates, rows in level:
            err = sum(errors[i] for i in rows)
            if _refinement_bound(config, n, e_bar, len(rows), err) < floor():
                continue
            last_feature = predicates[-1][0]
            row_set = set(rows)
            for key in sorted(base):
                if key[0] <= last_feature:
                    continue
                refined = [i for i in base[key] if i in row_set]
                if len(refined) >= config.min_support:
                    new_preds = predicates + (key,)
                    register(new_preds, refined)
                    next_level.append((new_preds, refined))
        level = next_level
        depth += 1

    scored.sort(key=lambda s: (-s.score, len(s.predicates), s.predicates))
    return scored[: config.top_k]


def slice_features(si: ShadowInput) -> dict[str, list[str]]:
    rel = si.run.relation_of(si.roles.predictor)
    country = si.user_country()
    return {
        "country": [country.get(uid, "?") for uid in rel.columns["user_id"]],
        "language": [str(v) for v in rel.columns["language"]],
        "length_bucket": [str(v) for v in rel.columns["length_bucket"]],
    }


def _truth_values(si: ShadowInput) -> list[int]:
    score_node = si.plan.node(si.roles.score)
    score_input = si.run.relation_of(score_node.inputs[0])
    return list(score_input.columns[score_node.params["true_column"]])


def error_vector(si: ShadowInput) -> list[int]:
    preds = si.run.relation_of(si.roles.predictor).columns[si.roles.pred_column]
    return [int(p != t) for p, t in zip(preds, _truth_values(si))]


def evaluate_translation_fix(si: ShadowInput, language: str):
    """Re-run translate -> embed -> infer only for rows the inserted
    translate node would touch, splicing everything else from the prior run.

    Returns (patch, fixed node outputs, accuracy_after, changed prediction
    row ids, affected row ids, invocation log).
    """
    roles = si.roles
    plan = si.plan
    run = si.run
    embed_node = plan.node(roles.test_embed)
    upstream = embed_node.inputs[0]
    base_rel = run.relation_of(upstream)
    prior_embed = run.relation_of(roles.test_embed)
    prior_pred = run.relation_of(roles.predictor)

    log = InvocationLog(si.latency, sleep=si.sleep)
    ctx = EvalContext(bundle=si.bundle, log=log)

    text_col = embed_node.params["text_column"]
    vec_col = embed_node.params["output_column"]
    node_id = "translate_fix"
    while plan.has_node(node_id):
        node_id += "_x"
    affected = [rid for rid, lang in zip(base_rel.row_ids, base_rel.columns["language"])
                if lang == language]

    texts = list(base_rel.columns[text_col])
    vectors = list(prior_embed.columns[vec_col])
    for rid in affected:
        i = base_rel.index_of(rid)
        texts[i] = ctx.call_translate(texts[i])
    log.record_rows("translate", node_id, affected)
    for rid in affected:
        i = base_rel.index_of(rid)
        vectors[i] = ctx.call_embed(texts[i], embed_node.params["dim"])
    log.record_rows("embed", roles.test_embed, affected)

    translate_out = base_rel.with_column(text_col, texts)
    embed_out = translate_out.with_column(vec_col, vectors)

    preds = list(prior_pred.columns[roles.pred_column])
    pred_lineage = dict(run.lineage[roles.predictor])
    infer_ids = []
    if roles.kind == "rag":
        store = run.output_of(roles.store)
        pred_node = plan.node(roles.predictor)
        for rid in affected:
            i = embed_out.index_of(rid)
            pred, retrieved = rag_infer_row(
                store, vectors[i], texts[i], pred_node.params["k"], ctx
            )
            preds[i] = pred
            pred_lineage[rid] = (frozenset((rid,)), frozenset(retrieved))
            infer_ids.append(rid)
        log.record_rows("llm_infer", roles.predictor, infer_ids)
    else:
        model = run.output_of(roles.model)
        for rid in affected:
            i = embed_out.index_of(rid)
            preds[i] = int(predict_mlp(model, stack_vectors([vectors[i]]))[0])
    pred_out = embed_out.with_column(roles.pred_column, preds)

    truth = _truth_values(si)
    correct = sum(1 for p, t in zip(preds, truth) if p == t)
    accuracy_after = correct / pred_out.n_rows if pred_out.n_rows else 0.0
    before = prior_pred.columns[roles.pred_column]
    changed = {rid for rid, a, b in zip(prior_pred.row_ids, before, preds) if a != b}

    patch = PlanPatch(
        target_node=roles.test_embed,
        param_updates={},
        insert_after=(
            OperatorNode(node_id, "translate", {"text_column": text_col, "languages": [language]}, ()),
            upstream,
        ),
    )
    fixed = {
        node_id: (translate_out, identity_lineage(translate_out.row_ids, base_rel.row_ids)),
        roles.test_embed: (embed_out, identity_lineage(embed_out.row_ids, translate_out.row_ids)),
        roles.predictor: (pred_out, pred_lineage),
    }
    return patch, fixed, accuracy_after, changed, affected, log


def run_slices_shadow(si: ShadowInput, config: SliceConfig | None = None) -> ShadowOutcome:
    config = config or SliceConfig()
    errors = error_vector(si)
    features = slice_features(si)
    slices = slice_find(features, errors, config)
    report = {"slices": [s.to_doc() for s in slices], "overall_error": sum(errors) / len(errors) if errors else 0.0}
    outcome = ShadowOutcome("slices", [], [], report)
    if not slices:
        outcome.findings.append(Finding("slices", "no slice exceeds the support threshold", report))
        return outcome

    top = slices[0]
    language = dict(top.predicates).get("language")
    if language is None or language == "en":
        outcome.findings.append(
            Finding("slices", "top slice carries no translatable language predicate", top.to_doc())
        )
        return outcome

    patch, fixed, accuracy_after, changed, affected, log = evaluate_translation_fix(si, language)
    outcome.report["fix_invocations"] = {k: log.count(k) for k in ("translate", "embed", "llm_infer")}
    outcome.report["logs"] = {"fix": log}
    accuracy_before = si.run.metrics["accuracy"]
    rel = si.run.relation_of(si.roles.predictor)
    notes = {}
    for rid in changed:
        a = rel.value(si.roles.pred_column, rid)
        b = fixed[si.roles.predictor][0].value(si.roles.pred_column, rid)
        notes[rid] = f"prediction flips {a}->{b} after fix"
    explanation = select_explanation_tuples(
        affected, si.run, si.roles, rel, si.user_country(),
        changed_predictions=changed, notes=notes, seed=si.seed,
    )
    fp = plan_fingerprint(si.plan)
    outcome.suggestions.append(
        Suggestion(
            id=f"slices:{fp[:12]}:01",
            source="slices",
            title=f"translate {language} test posts before embedding",
            patch=patch,
            accuracy_before=accuracy_before,
            accuracy_after=accuracy_after,
            proxy=False,
            explanation=explanation,
            status="ready",
            plan_fingerprint=fp,
            fixed=fixed,
        )
    )
    outcome.cache = {"language": language, "affected": affected, "fixed": fixed, "patch": patch}
    return outcome


def maintain_slices_shadow(si: ShadowInput, prior_cache: dict,
                           changed_store_rows: frozenset[str],
                           store_vectors_changed: bool,
                           config: SliceConfig | None = None) -> ShadowOutcome:
    """Update the slice analysis after a pipeline edit, reusing the prior
    fix's translations and embeddings; inference reruns only where the
    changed train rows intersect the cached fix's retrieval lineage."""
    config = config or SliceConfig()
    errors = error_vector(si)
    features = slice_features(si)
    slices = slice_find(features, errors, config)
    report = {"slices": [s.to_doc() for s in slices],
              "overall_error": sum(errors) / len(errors) if errors else 0.0}
    outcome = ShadowOutcome("slices", [], [], report)
    if not slices:
        outcome.findings.append(Finding("slices", "no slice exceeds the support threshold", report))
        return outcome
    top = slices[0]
    language = dict(top.predicates).get("language")
    if language is None or language == "en":
        outcome.findings.append(
            Finding("slices", "top slice carries no translatable language predicate", top.to_doc())
        )
        return outcome
    if language != prior_cache.get("language"):
        return run_slices_shadow(si, config)

    roles = si.roles
    run = si.run
    log = InvocationLog(si.latency, sleep=si.sleep)
    ctx = EvalContext(bundle=si.bundle, log=log)
    embed_node = si.plan.node(roles.test_embed)
    upstream = embed_node.inputs[0]
    base_rel = run.relation_of(upstream)
    text_col = embed_node.params["text_column"]
    vec_col = embed_node.params["output_column"]
    affected = prior_cache["affected"]
    prior_fixed = prior_cache["fixed"]
    patch = prior_cache["patch"]
    translate_id = patch.insert_after[0].id
    cached_translate = prior_fixed[translate_id][0]
    cached_embed = prior_fixed[roles.test_embed][0]
    cached_pred, cached_pred_lineage = prior_fixed[roles.predictor]

    texts = list(base_rel.columns[text_col])
    vectors = list(run.relation_of(roles.test_embed).columns[vec_col])
    for rid in affected:
        i = base_rel.index_of(rid)
        texts[i] = cached_translate.value(text_col, rid)
        vectors[i] = cached_embed.value(vec_col, rid)
    translate_out = base_rel.with_column(text_col, texts)
    embed_out = translate_out.with_column(vec_col, vectors)

    prior_pred = run.relation_of(roles.predictor)
    preds = list(prior_pred.columns[roles.pred_column])
    pred_lineage = dict(run.lineage[roles.predictor])
    if roles.kind == "rag":
        store = run.output_of(roles.store)
        k = si.plan.node(roles.predictor).params["k"]
        reinfer = []
        for rid in affected:
            retrieved = cached_pred_lineage[rid][1]
            if store_vectors_changed or (retrieved & changed_store_rows):
                reinfer.append(rid)
            else:
                i = embed_out.index_of(rid)
                preds[i] = cached_pred.value(roles.pred_column, rid)
                pred_lineage[rid] = cached_pred_lineage[rid]
        for rid in reinfer:
            i = embed_out.index_of(rid)
            pred, retrieved = rag_infer_row(store, vectors[i], texts[i], k, ctx)
            preds[i] = pred
            pred_lineage[rid] = (frozenset((rid,)), frozenset(retrieved))
        log.record_rows("llm_infer", roles.predictor, reinfer)
    else:
        model = run.output_of(roles.model)
        for rid in affected:
            i = embed_out.index_of(rid)
            preds[i] = int(predict_mlp(model, stack_vectors([vectors[i]]))[0])
    pred_out = embed_out.with_column(roles.pred_column, preds)

    truth = _truth_values(si)
    correct = sum(1 for p, t in zip(preds, truth) if p == t)
    accuracy_after = correct / pred_out.n_rows if pred_out.n_rows else 0.0
    before_preds = prior_pred.columns[roles.pred_column]
    changed = {rid for rid, a, b in zip(prior_pred.row_ids, before_preds, preds) if a != b}
    fixed = {
        translate_id: (translate_out, identity_lineage(translate_out.row_ids, base_rel.row_ids)),
        roles.test_embed: (embed_out, identity_lineage(embed_out.row_ids, translate_out.row_ids)),
        roles.predictor: (pred_out, pred_lineage),
    }
    outcome.report["fix_invocations"] = {k: log.count(k) for k in ("translate", "embed", "llm_infer")}
    outcome.report["logs"] = {"fix": log}
    rel = run.relation_of(roles.predictor)
    notes = {rid: "prediction changes after fix" for rid in changed}
    explanation = select_explanation_tuples(
        affected, run, roles, rel, si.user_country(),
        changed_predictions=changed, notes=notes, seed=si.seed,
    )
    fp = plan_fingerprint(si.plan)
    outcome.suggestions.append(
        Suggestion(
            id=f"slices:{fp[:12]}:01",
            source="slices",
            title=f"translate {language} test posts before embedding",
            patch=patch,
            accuracy_before=run.metrics["accuracy"],
            accuracy_after=accuracy_after,
            proxy=False,
            explanation=explanation,
            status="ready",
            plan_fingerprint=fp,
            fixed=fixed,
        )
    )
    outcome.cache = {"language": language, "affected": affected, "fixed": fixed, "patch": patch}
    return outcome
