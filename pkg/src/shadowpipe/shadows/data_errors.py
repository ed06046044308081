"""Robustness probing: inject typos into a fraction of test posts, measure
the accuracy drop recomputing only the corrupted rows, and evaluate a
spell-check fix restricted to the same rows."""

from __future__ import annotations

import random
import string
from dataclasses import dataclass

from ..calls import InvocationLog
from ..engine import EvalContext, rag_infer_row, stack_vectors
from ..mlp import predict_mlp
from ..plan import OperatorNode, PlanPatch, plan_fingerprint
from ..relation import Relation
from ..suggest import select_explanation_tuples
from ..suggestion import Finding, ShadowOutcome, Suggestion
from . import ShadowInput

_OPS = ("swap_adjacent", "delete_char", "substitute_char")


@dataclass(frozen=True)
class CorruptionSpec:
    fraction: float = 0.10
    seed: int = 1286
    op_weights: tuple[float, float, float] = (0.4, 0.3, 0.3)
    per_word_probability: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        if abs(sum(self.op_weights) - 1.0) > 1e-9:
            raise ValueError("op weights must sum to 1")


@dataclass
class RobustnessReport:
    corrupted_rows: frozenset[str]
    accuracy_clean: float
    accuracy_corrupted: float
    accuracy_fixed: float | None
    invocations: dict[str, dict[str, int]]

    def to_doc(self) -> dict:
        return {
            "corrupted_rows": sorted(self.corrupted_rows),
            "accuracy_clean": self.accuracy_clean,
            "accuracy_corrupted": self.accuracy_corrupted,
            "accuracy_fixed": self.accuracy_fixed,
            "invocations": self.invocations,
        }


def _typo_word(word: str, rng: random.Random, weights) -> str:
    op = rng.choices(_OPS, weights=weights)[0]
    if op == "swap_adjacent" and len(word) >= 2:
        i = rng.randrange(len(word) - 1)
        return word[:i] + word[i + 1] + word[i] + word[i + 2 :]
    if op == "delete_char" and len(word) >= 2:
        i = rng.randrange(len(word))
        return word[:i] + word[i + 1 :]
    i = rng.randrange(len(word))
    repl = rng.choice([c for c in string.ascii_lowercase if c != word[i]])
    return word[:i] + repl + word[i + 1 :]


def corrupt_typos(rel: Relation, spec: CorruptionSpec, text_column: str,
                  vocabulary: frozenset[str]) -> tuple[Relation, frozenset[str]]:
    """Corrupt a seeded sample of exactly round(fraction * n) rows; every
    selected row is guaranteed to change and to carry at least one
    out-of-vocabulary token, so the spell-check contract stays exact.
    Unselected rows are byte-identical."""
    rng = random.Random(spec.seed)
    n = rel.n_rows
    count = round(spec.fraction * n)
    chosen = sorted(rng.sample(range(n), count)) if count else []
    texts = list(rel.columns[text_column])
    corrupted_ids = []
    for i in chosen:
        original = texts[i]
        for _ in range(1000):
            words = original.split()
            out = []
            for w in words:
                if rng.random() < spec.per_word_probability:
                    out.append(_typo_word(w, rng, spec.op_weights))
                else:
                    out.append(w)
            candidate = " ".join(out)
            if candidate != original and any(t not in vocabulary for t in candidate.split()):
                texts[i] = candidate
                break
        else:  # pragma: no cover - substitution always changes a character
            raise RuntimeError("could not corrupt row")
        corrupted_ids.append(rel.row_ids[i])
    return rel.with_column(text_column, texts), frozenset(corrupted_ids)


def _splice_predictions(si: ShadowInput, rel_texts: Relation, vectors: list, rows: list[str],
                        base_preds: list[int], base_lineage, ctx: EvalContext):
    """Re-infer only ``rows`` against the prior store/model, splicing into
    ``base_preds``. Returns (predictions, updated lineage)."""
    roles = si.roles
    preds = list(base_preds)
    lineage = dict(base_lineage)
    test_rel = si.run.relation_of(roles.test_embed)
    if roles.kind == "rag":
        store = si.run.output_of(roles.store)
        k = si.plan.node(roles.predictor).params["k"]
        for rid in rows:
            i = test_rel.index_of(rid)
            pred, retrieved = rag_infer_row(
                store, vectors[i], rel_texts.columns[roles.test_text_column][i], k, ctx
            )
            preds[i] = pred
            lineage[rid] = (frozenset((rid,)), frozenset(retrieved))
        ctx.log.record_rows("llm_infer", roles.predictor, rows)
    else:
        model = si.run.output_of(roles.model)
        for rid in rows:
            i = test_rel.index_of(rid)
            preds[i] = int(predict_mlp(model, stack_vectors([vectors[i]]))[0])
    return preds, lineage


def _truth(si: ShadowInput) -> list[int]:
    score_node = si.plan.node(si.roles.score)
    score_input = si.run.relation_of(score_node.inputs[0])
    return list(score_input.columns[score_node.params["true_column"]])


def measure_robustness(si: ShadowInput, spec: CorruptionSpec | None = None):
    """Issue-detection phase: corrupt, then re-embed and re-infer only the
    corrupted rows. Returns (report, corrupted test relation, corrupted
    vectors, corrupted predictions, detection log)."""
    spec = spec or CorruptionSpec()
    roles = si.roles
    embed_node = si.plan.node(roles.test_embed)
    base_rel = si.run.relation_of(embed_node.inputs[0])
    text_col = embed_node.params["text_column"]
    corrupted_rel, corrupted = corrupt_typos(base_rel, spec, text_col, si.bundle.vocabulary)

    log = InvocationLog(si.latency, sleep=si.sleep)
    ctx = EvalContext(bundle=si.bundle, log=log)
    prior_embed = si.run.relation_of(roles.test_embed)
    vectors = list(prior_embed.columns[roles.test_vector_column])
    rows = sorted(corrupted)
    for rid in rows:
        i = corrupted_rel.index_of(rid)
        vectors[i] = ctx.call_embed(corrupted_rel.columns[text_col][i], embed_node.params["dim"])
    ctx.log.record_rows("embed", roles.test_embed, rows)

    prior_pred = si.run.relation_of(roles.predictor)
    preds, det_lineage = _splice_predictions(
        si, corrupted_rel, vectors, rows,
        list(prior_pred.columns[roles.pred_column]), si.run.lineage[roles.predictor], ctx,
    )
    truth = _truth(si)
    correct = sum(1 for p, t in zip(preds, truth) if p == t)
    report = RobustnessReport(
        corrupted_rows=corrupted,
        accuracy_clean=si.run.metrics["accuracy"],
        accuracy_corrupted=correct / len(preds) if preds else 0.0,
        accuracy_fixed=None,
        invocations={"detection": {k: log.count(k) for k in ("embed", "llm_infer") }},
    )
    return report, corrupted_rel, vectors, preds, det_lineage, log


def evaluate_spellcheck_fix(si: ShadowInput, report: RobustnessReport, corrupted_rel: Relation,
                            corrupted_vectors: list, corrupted_preds: list[int]):
    """Fix phase on the corrupted variant: spell-check, re-embed, and
    re-infer restricted to the corrupted rows."""
    roles = si.roles
    embed_node = si.plan.node(roles.test_embed)
    text_col = embed_node.params["text_column"]
    log = InvocationLog(si.latency, sleep=si.sleep)
    ctx = EvalContext(bundle=si.bundle, log=log)

    rows = sorted(report.corrupted_rows)
    texts = list(corrupted_rel.columns[text_col])
    vectors = list(corrupted_vectors)
    changed_text_rows = []
    for rid in rows:
        i = corrupted_rel.index_of(rid)
        fixed_text = ctx.call_spellcheck(texts[i])
        if fixed_text != texts[i]:
            texts[i] = fixed_text
            changed_text_rows.append(rid)
    ctx.log.record_rows("spellcheck", "spellcheck_fix", rows)
    for rid in changed_text_rows:
        i = corrupted_rel.index_of(rid)
        vectors[i] = ctx.call_embed(texts[i], embed_node.params["dim"])
    ctx.log.record_rows("embed", roles.test_embed, changed_text_rows)

    fixed_rel = corrupted_rel.with_column(text_col, texts)
    preds, fix_lineage = _splice_predictions(
        si, fixed_rel, vectors, changed_text_rows, corrupted_preds,
        si.run.lineage[roles.predictor], ctx,
    )
    truth = _truth(si)
    correct = sum(1 for p, t in zip(preds, truth) if p == t)
    accuracy_fixed = correct / len(preds) if preds else 0.0
    changed = {
        rid for rid, a, b in zip(corrupted_rel.row_ids, corrupted_preds, preds) if a != b
    }
    return accuracy_fixed, fixed_rel, vectors, preds, fix_lineage, changed, log


def run_data_errors_shadow(si: ShadowInput, spec: CorruptionSpec | None = None) -> ShadowOutcome:
    spec = spec or CorruptionSpec()
    report, corrupted_rel, vectors, corrupted_preds, det_lineage, det_log = measure_robustness(si, spec)
    outcome = ShadowOutcome("data_errors", [], [], {})
    if report.accuracy_corrupted >= report.accuracy_clean:
        outcome.report = report.to_doc()
        outcome.report["logs"] = {"detection": det_log}
        outcome.findings.append(
            Finding("data_errors", "pipeline is robust to the injected typos", report.to_doc())
        )
        return outcome

    accuracy_fixed, fixed_rel, fixed_vectors, fixed_preds, fix_lineage, changed, fix_log = evaluate_spellcheck_fix(
        si, report, corrupted_rel, vectors, corrupted_preds
    )
    report.accuracy_fixed = accuracy_fixed
    report.invocations["fix"] = {
        k: fix_log.count(k) for k in ("spellcheck", "embed", "llm_infer")
    }
    outcome.report = report.to_doc()
    outcome.report["logs"] = {"detection": det_log, "fix": fix_log}

    roles = si.roles
    embed_node = si.plan.node(roles.test_embed)
    upstream = embed_node.inputs[0]
    node_id = "spellcheck_fix"
    while si.plan.has_node(node_id):
        node_id += "_x"
    patch = PlanPatch(
        target_node=roles.test_embed,
        param_updates={},
        insert_after=(
            OperatorNode(node_id, "spellcheck", {"text_column": embed_node.params["text_column"]}, ()),
            upstream,
        ),
    )
    rel = si.run.relation_of(roles.predictor)
    notes = {}
    for rid in changed:
        i = rel.index_of(rid)
        notes[rid] = f"prediction flips {corrupted_preds[i]}->{fixed_preds[i]} after fix"
    explanation = select_explanation_tuples(
        sorted(report.corrupted_rows), si.run, roles, rel, si.user_country(),
        changed_predictions=changed, notes=notes, seed=si.seed,
    )
    fp = plan_fingerprint(si.plan)
    outcome.suggestions.append(
        Suggestion(
            id=f"data_errors:{fp[:12]}:01",
            source="data_errors",
            title="insert spell-check before the test-side embedding",
            patch=patch,
            accuracy_before=report.accuracy_corrupted,
            accuracy_after=accuracy_fixed,
            proxy=False,
            explanation=explanation,
            status="ready",
            plan_fingerprint=fp,
            # the fix was evaluated on the corrupted variant; applying it to
            # the session data goes through the incremental path instead
            fixed={},
        )
    )
    outcome.cache = {
        "spec": spec,
        "corrupted_rel": corrupted_rel,
        "corrupted_vectors": vectors,
        "corrupted_rows": report.corrupted_rows,
        "det_preds": corrupted_preds,
        "det_lineage": det_lineage,
        "fixed_rel": fixed_rel,
        "fixed_vectors": fixed_vectors,
        "fix_preds": fixed_preds,
        "fix_lineage": fix_lineage,
    }
    return outcome


def maintain_data_errors_shadow(si: ShadowInput, prior_cache: dict,
                                changed_store_rows: frozenset[str],
                                store_vectors_changed: bool) -> ShadowOutcome:
    """Update the robustness analysis after a pipeline edit: the corruption,
    its embeddings, and the spell-checked texts are reused verbatim, and
    inference reruns only for rows whose cached retrieval touches the
    changed train rows."""
    spec: CorruptionSpec = prior_cache["spec"]
    roles = si.roles
    run = si.run
    corrupted_rel: Relation = prior_cache["corrupted_rel"]
    rows = sorted(prior_cache["corrupted_rows"])
    log = InvocationLog(si.latency, sleep=si.sleep)
    ctx = EvalContext(bundle=si.bundle, log=log)
    prior_pred = run.relation_of(roles.predictor)
    truth = _truth(si)

    text_col = si.plan.node(roles.test_embed).params["text_column"]

    def respliced(vectors, texts_rel, cached_preds, cached_lineage, member_rows):
        preds = list(prior_pred.columns[roles.pred_column])
        if roles.kind == "rag":
            store = run.output_of(roles.store)
            k = si.plan.node(roles.predictor).params["k"]
            reinfer = []
            for rid in member_rows:
                i = texts_rel.index_of(rid)
                retrieved = cached_lineage.get(rid, ((), frozenset()))[1]
                if store_vectors_changed or (retrieved & changed_store_rows):
                    reinfer.append(rid)
                else:
                    preds[i] = cached_preds[i]
            for rid in reinfer:
                i = texts_rel.index_of(rid)
                pred, _ = rag_infer_row(store, vectors[i], texts_rel.columns[text_col][i], k, ctx)
                preds[i] = pred
            log.record_rows("llm_infer", roles.predictor, reinfer)
        else:
            model = run.output_of(roles.model)
            for rid in member_rows:
                i = texts_rel.index_of(rid)
                preds[i] = int(predict_mlp(model, stack_vectors([vectors[i]]))[0])
        return preds

    det_preds = respliced(prior_cache["corrupted_vectors"], corrupted_rel,
                          prior_cache["det_preds"], prior_cache["det_lineage"], rows)
    det_correct = sum(1 for p, t in zip(det_preds, truth) if p == t)
    report = RobustnessReport(
        corrupted_rows=prior_cache["corrupted_rows"],
        accuracy_clean=run.metrics["accuracy"],
        accuracy_corrupted=det_correct / len(det_preds) if det_preds else 0.0,
        accuracy_fixed=None,
        invocations={"detection": {k: log.count(k) for k in ("embed", "llm_infer")}},
    )
    outcome = ShadowOutcome("data_errors", [], [], {})
    if report.accuracy_corrupted >= report.accuracy_clean:
        outcome.report = report.to_doc()
        outcome.report["logs"] = {"detection": log}
        outcome.findings.append(
            Finding("data_errors", "pipeline is robust to the injected typos", report.to_doc())
        )
        outcome.cache = dict(prior_cache)
        return outcome

    fixed_rel: Relation = prior_cache["fixed_rel"]
    changed_text_rows = [
        rid for rid in rows
        if fixed_rel.value(text_col, rid) != corrupted_rel.value(text_col, rid)
    ]
    base_fix = list(det_preds)
    fix_preds = list(base_fix)
    fix_log = InvocationLog(si.latency, sleep=si.sleep)
    fix_ctx = EvalContext(bundle=si.bundle, log=fix_log)
    if roles.kind == "rag":
        store = run.output_of(roles.store)
        k = si.plan.node(roles.predictor).params["k"]
        reinfer = []
        for rid in changed_text_rows:
            i = fixed_rel.index_of(rid)
            retrieved = prior_cache["fix_lineage"].get(rid, ((), frozenset()))[1]
            if store_vectors_changed or (retrieved & changed_store_rows):
                reinfer.append(rid)
            else:
                fix_preds[i] = prior_cache["fix_preds"][i]
        for rid in reinfer:
            i = fixed_rel.index_of(rid)
            pred, _ = rag_infer_row(store, prior_cache["fixed_vectors"][i],
                                    fixed_rel.columns[text_col][i], k, fix_ctx)
            fix_preds[i] = pred
        fix_log.record_rows("llm_infer", roles.predictor, reinfer)
    else:
        model = run.output_of(roles.model)
        for rid in changed_text_rows:
            i = fixed_rel.index_of(rid)
            fix_preds[i] = int(predict_mlp(model, stack_vectors([prior_cache["fixed_vectors"][i]]))[0])
    fix_correct = sum(1 for p, t in zip(fix_preds, truth) if p == t)
    report.accuracy_fixed = fix_correct / len(fix_preds) if fix_preds else 0.0
    report.invocations["fix"] = {k: fix_log.count(k) for k in ("spellcheck", "embed", "llm_infer")}
    outcome.report = report.to_doc()
    outcome.report["logs"] = {"detection": log, "fix": fix_log}
    changed = {rid for rid, a, b in zip(fixed_rel.row_ids, det_preds, fix_preds) if a != b}

    embed_node = si.plan.node(roles.test_embed)
    upstream = embed_node.inputs[0]
    node_id = "spellcheck_fix"
    while si.plan.has_node(node_id):
        node_id += "_x"
    patch = PlanPatch(
        target_node=roles.test_embed,
        param_updates={},
        insert_after=(
            OperatorNode(node_id, "spellcheck", {"text_column": embed_node.params["text_column"]}, ()),
            upstream,
        ),
    )
    rel = run.relation_of(roles.predictor)
    notes = {rid: "prediction changes after fix" for rid in changed}
    explanation = select_explanation_tuples(
        rows, run, roles, rel, si.user_country(),
        changed_predictions=changed, notes=notes, seed=si.seed,
    )
    fp = plan_fingerprint(si.plan)
    outcome.suggestions.append(
        Suggestion(
            id=f"data_errors:{fp[:12]}:01",
            source="data_errors",
            title="insert spell-check before the test-side embedding",
            patch=patch,
            accuracy_before=report.accuracy_corrupted,
            accuracy_after=report.accuracy_fixed,
            proxy=False,
            explanation=explanation,
            status="ready",
            plan_fingerprint=fp,
            fixed={},
        )
    )
    new_cache = dict(prior_cache)
    new_cache["det_preds"] = det_preds
    new_cache["fix_preds"] = fix_preds
    outcome.cache = new_cache
    return outcome
