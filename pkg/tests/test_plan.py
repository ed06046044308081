from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowpipe.builtin import builtin_plan_text
from shadowpipe.corpus import source_schemas
from shadowpipe.plan import (
    OperatorNode,
    PlanError,
    PlanPatch,
    apply_patch,
    diff_plans,
    fingerprint_plan,
    parse_plan,
    plan_from_doc,
    serialize_plan,
)


def test_bundled_rag_plan_is_eleven_nodes_ending_in_score(rag_plan):
    assert len(rag_plan.nodes) == 11
    assert rag_plan.node(rag_plan.outputs[0]).kind == "score_accuracy"


def test_unknown_input_id_reported():
    doc = {"nodes": [{"id": "a", "kind": "csv_source",
                      "params": {"path": "users.csv", "id_column": "user_id"}, "inputs": []},
                     {"id": "b", "kind": "filter_in",
                      "params": {"column": "country", "values": []}, "inputs": ["x"]}],
           "outputs": ["b"]}
    with pytest.raises(PlanError, match="unknown input id 'x'"):
        plan_from_doc(doc)


def test_cycle_reported_with_both_ids():
    doc = {"nodes": [
        {"id": "a", "kind": "filter_in", "params": {"column": "c", "values": []}, "inputs": ["b"]},
        {"id": "b", "kind": "filter_in", "params": {"column": "c", "values": []}, "inputs": ["a"]},
    ], "outputs": ["a"]}
    with pytest.raises(PlanError) as err:
        plan_from_doc(doc)
    assert "a" in str(err.value) and "b" in str(err.value)


def test_unknown_kind_missing_param_and_syntax_errors():
    with pytest.raises(PlanError, match="unknown kind"):
        plan_from_doc({"nodes": [{"id": "a", "kind": "nope", "params": {}, "inputs": []}], "outputs": ["a"]})
    with pytest.raises(PlanError, match="missing params"):
        plan_from_doc({"nodes": [{"id": "a", "kind": "csv_source", "params": {}, "inputs": []}], "outputs": ["a"]})
    with pytest.raises(PlanError, match="syntax error at line"):
        parse_plan("{not json")


def test_unknown_column_caught_by_schema_validation(bundle, rag_plan):
    schemas = source_schemas(bundle)
    doc = rag_plan.to_doc()
    for node in doc["nodes"]:
        if node["id"] == "weak_labels":
            node["params"]["text_column"] = "no_such_column"
    with pytest.raises(PlanError, match="unknown column 'no_such_column'"):
        plan_from_doc(doc, schemas)


def test_fingerprints_insensitive_to_key_and_node_order(rag_plan):
    fps = fingerprint_plan(rag_plan)
    doc = json.loads(builtin_plan_text("rag"))
    doc["nodes"] = list(reversed(doc["nodes"]))
    doc["nodes"] = [
        {"inputs": n["inputs"], "params": dict(reversed(list(n["params"].items()))),
         "kind": n["kind"], "id": n["id"]}
        for n in doc["nodes"]
    ]
    assert fingerprint_plan(plan_from_doc(doc)) == fps


def test_fingerprint_changes_propagate_downstream_only(rag_plan):
    base = fingerprint_plan(rag_plan)
    edited = apply_patch(rag_plan, PlanPatch("weak_labels", {
        "positive_patterns": ["(0|no|zero) (motivation|energy)", "lost (interest|motivation)"]}))
    new = fingerprint_plan(edited)
    changed = {nid for nid in base if base[nid] != new[nid]}
    assert changed == {"weak_labels", "train_embed", "store", "predictions", "accuracy"}


def test_source_path_change_invalidates_downstream(rag_plan):
    edited = apply_patch(rag_plan, PlanPatch("train_posts", {"path": "other.csv"}))
    base, new = fingerprint_plan(rag_plan), fingerprint_plan(edited)
    changed = {nid for nid in base if base[nid] != new[nid]}
    assert "train_posts" in changed
    assert {"train_joined", "weak_labels", "train_embed", "store", "predictions", "accuracy"} <= changed
    assert "users" not in changed and "test_embed" not in changed


def test_diff_identity_and_single_change(rag_plan):
    assert diff_plans(rag_plan, rag_plan).empty
    assert not diff_plans(rag_plan, rag_plan).single_operator_change
    edited = apply_patch(rag_plan, PlanPatch("weak_labels", {
        "positive_patterns": ["(0|no|zero) (motivation|energy)", "lost (interest|motivation)"]}))
    diff = diff_plans(rag_plan, edited)
    assert diff.changed == {"weak_labels"}
    assert diff.single_operator_change
    two = apply_patch(edited, PlanPatch("predictions", {"k": 7}))
    diff2 = diff_plans(rag_plan, two)
    assert diff2.changed == {"weak_labels", "predictions"}
    assert not diff2.single_operator_change


def test_apply_patch_noop_returns_equal_plan(rag_plan):
    assert apply_patch(rag_plan, PlanPatch("weak_labels", {})) == rag_plan


def test_insert_translate_yields_twelve_node_valid_plan(rag_plan, bundle):
    node = OperatorNode("tr", "translate", {"text_column": "post_text", "languages": ["xx"]}, ())
    patched = apply_patch(rag_plan, PlanPatch("test_embed", {}, insert_after=(node, "test_posts")),
                          source_schemas(bundle))
    assert len(patched.nodes) == 12
    assert patched.node("test_embed").inputs == ("tr",)
    assert patched.node("tr").inputs == ("test_posts",)


def test_insert_spellcheck_rewires_consumers(rag_plan):
    node = OperatorNode("sc", "spellcheck", {"text_column": "post_text"}, ())
    patched = apply_patch(rag_plan, PlanPatch("test_embed", {}, insert_after=(node, "test_posts")))
    downstream = patched.node("test_embed")
    assert downstream.inputs == ("sc",)


def test_diff_patch_round_trip(rag_plan):
    node = OperatorNode("tr", "translate", {"text_column": "post_text", "languages": ["xx"]}, ())
    patch = PlanPatch("test_embed", {"dim": 128}, insert_after=(node, "test_posts"))
    diff = diff_plans(rag_plan, apply_patch(rag_plan, patch))
    assert diff.changed | diff.added == {"test_embed", "tr"}
    assert diff.added == {"tr"}
    assert not diff.removed


def test_patch_errors(rag_plan):
    with pytest.raises(PlanError, match="unknown node"):
        apply_patch(rag_plan, PlanPatch("ghost", {"k": 1}))
    clash = OperatorNode("store", "spellcheck", {"text_column": "post_text"}, ())
    with pytest.raises(PlanError, match="already exists"):
        apply_patch(rag_plan, PlanPatch("test_embed", {}, insert_after=(clash, "test_posts")))


def test_serialize_parse_round_trip(rag_plan, train_plan):
    for plan in (rag_plan, train_plan):
        assert parse_plan(serialize_plan(plan)) == plan


def test_patch_doc_round_trip():
    node = OperatorNode("tr", "translate", {"text_column": "post_text", "languages": ["xx"]}, ())
    patch = PlanPatch("test_embed", {"dim": 64}, insert_after=(node, "test_posts"))
    assert PlanPatch.from_doc(patch.to_doc()) == patch
    assert PlanPatch.from_doc(PlanPatch("a", {"k": 3}).to_doc()) == PlanPatch("a", {"k": 3})


@settings(max_examples=25, deadline=None)
@given(st.permutations(["k", "text_column", "vector_column", "output_column"]))
def test_fingerprint_param_order_property(order):
    def build(param_order):
        params = {"k": 5, "text_column": "t", "vector_column": "v", "output_column": "o"}
        doc = {"nodes": [
            {"id": "src", "kind": "csv_source", "params": {"path": "test_posts.csv", "id_column": "post_id"}, "inputs": []},
            {"id": "emb", "kind": "embed", "params": {"text_column": "t", "dim": 8, "output_column": "v"}, "inputs": ["src"]},
            {"id": "st", "kind": "vector_store_build", "params": {"vector_column": "v", "metadata_columns": ["t"]}, "inputs": ["emb"]},
            {"id": "rag", "kind": "rag_classify", "params": {k: params[k] for k in param_order}, "inputs": ["emb", "st"]},
            {"id": "sc", "kind": "score_accuracy", "params": {"pred_column": "o", "true_column": "t"}, "inputs": ["rag"]},
        ], "outputs": ["sc"]}
        return fingerprint_plan(plan_from_doc(doc))

    assert build(order) == build(sorted(order))
