from __future__ import annotations

import pytest

from shadowpipe.engine import EngineError, execute
from shadowpipe.ivm import (
    DeltaSet,
    MaintenancePolicy,
    affected_test_rows,
    diff_relations,
    incremental_update,
)
from shadowpipe.plan import PlanPatch, apply_patch

REGEX_EDIT = PlanPatch(
    "weak_labels",
    {"positive_patterns": ["(0|no|zero) (motivation|energy)", "lost (interest|motivation)"]},
)


def assert_bit_equal(result, cold):
    assert result.metrics == cold.metrics
    for nid in cold.node_outputs:
        assert result.node_outputs[nid] == cold.node_outputs[nid], nid


@pytest.mark.parametrize("pipeline", ["rag", "train"])
def test_regex_edit_matches_cold_run_bit_exactly(pipeline, bundle, rag_plan, train_plan,
                                                 rag_run, train_run):
    plan = rag_plan if pipeline == "rag" else train_plan
    prior = rag_run if pipeline == "rag" else train_run
    edited = apply_patch(plan, REGEX_EDIT)
    result, policy, report = incremental_update(prior, plan, edited, bundle)
    assert policy == MaintenancePolicy(True, None)
    cold = execute(edited, bundle)
    assert_bit_equal(result, cold)
    assert report["nodes"]["weak_labels"]["changed"] > 0


def test_regex_edit_reinference_set_is_exactly_the_affected_rows(bundle, rag_plan, rag_run):
    edited = apply_patch(rag_plan, REGEX_EDIT)
    result, _, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    weak_delta = diff_relations(
        rag_run.relation_of("weak_labels"), result.relation_of("weak_labels")
    )
    expected = affected_test_rows(rag_run, weak_delta.changed)
    assert result.invocations.row_ids("llm_infer") == expected
    assert result.invocations.count("llm_infer") == len(expected) > 0
    assert result.invocations.count("embed") == 0
    assert result.invocations.count("translate") == 0


def test_equivalent_rewrite_produces_empty_deltas_and_zero_invocations(bundle, rag_plan, rag_run):
    rewrite = PlanPatch(
        "weak_labels",
        {"positive_patterns": ["(0|no|zero) (motivation)", "lost (interest|motivation|motivation)"]},
    )
    edited = apply_patch(rag_plan, rewrite)
    result, policy, report = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy.enabled
    assert result.invocations.count() == 0
    assert result.metrics == rag_run.metrics
    assert all(n["changed"] == n["inserted"] == n["deleted"] == 0 for n in report["nodes"].values())


def test_identical_plan_is_a_no_op(bundle, rag_plan, rag_run):
    result, policy, _ = incremental_update(rag_run, rag_plan, rag_plan, bundle)
    assert policy.enabled
    assert result.invocations.count() == 0
    assert result.metrics == rag_run.metrics


def test_two_operator_edit_falls_back(bundle, rag_plan, rag_run):
    edited = apply_patch(apply_patch(rag_plan, REGEX_EDIT), PlanPatch("predictions", {"k": 7}))
    result, policy, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy == MaintenancePolicy(False, "multi_operator_change")
    cold = execute(edited, bundle)
    assert_bit_equal(result, cold)


def test_structural_edit_falls_back(bundle, rag_plan, rag_run):
    from shadowpipe.plan import OperatorNode

    node = OperatorNode("sc", "spellcheck", {"text_column": "post_text"}, ())
    edited = apply_patch(rag_plan, PlanPatch("test_embed", {}, insert_after=(node, "test_posts")))
    result, policy, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy == MaintenancePolicy(False, "structural_change")
    assert_bit_equal(result, execute(edited, bundle))


def test_source_param_edit_falls_back_with_source_reason(bundle, rag_plan, rag_run):
    edited = apply_patch(rag_plan, PlanPatch("test_posts", {"id_column": "user_id"}))
    result, policy, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy == MaintenancePolicy(False, "source_schema_change")
    assert_bit_equal(result, execute(edited, bundle))


def test_k_change_reinfers_everything_but_stays_equal(bundle, rag_plan, rag_run):
    edited = apply_patch(rag_plan, PlanPatch("predictions", {"k": 3}))
    result, policy, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy.enabled
    assert result.invocations.count("llm_infer") == 200
    assert result.invocations.count("embed") == 0
    assert_bit_equal(result, execute(edited, bundle))


def test_filter_values_edit_propagates_inserts_and_deletes(bundle, rag_plan, rag_run):
    edited = apply_patch(rag_plan, PlanPatch("country_filter", {"values": ["US", "CAN", "UK"]}))
    result, policy, report = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy.enabled
    cold = execute(edited, bundle)
    assert_bit_equal(result, cold)
    assert report["nodes"]["country_filter"]["inserted"] > 0
    # embeds run only for the newly joined rows
    new_rows = diff_relations(rag_run.relation_of("train_embed"), result.relation_of("train_embed"))
    assert result.invocations.row_ids("embed") == new_rows.inserted


def test_filter_narrowing_matches_cold_run(bundle, train_plan, train_run):
    edited = apply_patch(train_plan, PlanPatch("country_filter", {"values": ["US"]}))
    result, policy, _ = incremental_update(train_run, train_plan, edited, bundle)
    assert policy.enabled
    assert_bit_equal(result, execute(edited, bundle))
    assert result.invocations.count("embed") == 0  # rows only disappear
    assert result.invocations.count("mlp_train") == 1


def test_weak_label_override_edit_is_incremental(bundle, rag_plan, rag_run):
    weak = rag_run.relation_of("weak_labels")
    targets = weak.row_ids[:3]
    overrides = {rid: 1 - weak.value("weak_label", rid) for rid in targets}
    edited = apply_patch(rag_plan, PlanPatch("weak_labels", {"label_overrides": overrides}))
    result, policy, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy.enabled
    assert result.invocations.count("embed") == 0
    expected = affected_test_rows(rag_run, set(targets))
    assert result.invocations.row_ids("llm_infer") == expected
    assert_bit_equal(result, execute(edited, bundle))


def test_affected_test_rows_edges(rag_run, train_run):
    assert affected_test_rows(rag_run, set()) == set()
    store_ids = rag_run.output_of("store").row_ids
    all_affected = affected_test_rows(rag_run, set(store_ids))
    assert len(all_affected) == 200
    with pytest.raises(EngineError, match="rag_classify"):
        affected_test_rows(train_run, {"x"})


def test_affected_test_rows_matches_lineage(rag_run):
    lineage = rag_run.lineage["predictions"]
    some_train = next(iter(next(iter(lineage.values()))[1]))
    expected = {rid for rid, sets in lineage.items() if some_train in sets[1]}
    assert affected_test_rows(rag_run, {some_train}) == expected


def test_prior_plan_mismatch_rejected(bundle, rag_plan, train_plan, rag_run):
    with pytest.raises(EngineError, match="fingerprint"):
        incremental_update(rag_run, train_plan, rag_plan, bundle)


def test_policy_invariant():
    with pytest.raises(ValueError):
        MaintenancePolicy(True, "structural_change")
    with pytest.raises(ValueError):
        MaintenancePolicy(False, None)


def test_delta_set_and_diff_relations(rag_run):
    rel = rag_run.relation_of("test_posts")
    other = rel.with_column("post_text", ["x"] + rel.columns["post_text"][1:])
    delta = diff_relations(rel, other)
    assert delta.changed == {rel.row_ids[0]}
    assert not delta.inserted and not delta.deleted
    assert DeltaSet().empty
    sub = rel.take(list(range(1, rel.n_rows)))
    delta2 = diff_relations(rel, sub)
    assert delta2.deleted == {rel.row_ids[0]}
