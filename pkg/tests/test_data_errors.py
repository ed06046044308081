from __future__ import annotations

from dataclasses import replace

import pytest

from shadowpipe.engine import execute
from shadowpipe.plan import apply_patch
from shadowpipe.shadows import ShadowInput
from shadowpipe.shadows.data_errors import (
    CorruptionSpec,
    corrupt_typos,
    measure_robustness,
    run_data_errors_shadow,
)


def test_corruption_count_is_exact(bundle):
    rel = bundle.test_posts
    corrupted, rows = corrupt_typos(rel, CorruptionSpec(), "post_text", bundle.vocabulary)
    assert len(rows) == round(0.10 * rel.n_rows) == 20


def test_untouched_rows_are_byte_identical(bundle):
    rel = bundle.test_posts
    corrupted, rows = corrupt_typos(rel, CorruptionSpec(), "post_text", bundle.vocabulary)
    for rid in rel.row_ids:
        original = rel.value("post_text", rid)
        mutated = corrupted.value("post_text", rid)
        if rid in rows:
            assert mutated != original
            assert any(tok not in bundle.vocabulary for tok in mutated.split())
        else:
            assert mutated == original


def test_zero_fraction_is_identity(bundle):
    rel = bundle.test_posts
    corrupted, rows = corrupt_typos(rel, CorruptionSpec(fraction=0.0), "post_text", bundle.vocabulary)
    assert rows == frozenset()
    assert corrupted == rel


def test_corruption_is_deterministic(bundle):
    rel = bundle.test_posts
    a, rows_a = corrupt_typos(rel, CorruptionSpec(seed=99), "post_text", bundle.vocabulary)
    b, rows_b = corrupt_typos(rel, CorruptionSpec(seed=99), "post_text", bundle.vocabulary)
    assert a == b and rows_a == rows_b
    c, _ = corrupt_typos(rel, CorruptionSpec(seed=100), "post_text", bundle.vocabulary)
    assert c != a


def test_invalid_spec_rejected():
    with pytest.raises(ValueError):
        CorruptionSpec(fraction=1.5)
    with pytest.raises(ValueError):
        CorruptionSpec(op_weights=(0.5, 0.5, 0.5))


@pytest.mark.parametrize("pipeline", ["rag", "train"])
def test_detection_phase_counts_and_degradation(pipeline, bundle, rag_plan, train_plan,
                                                rag_run, train_run):
    plan = rag_plan if pipeline == "rag" else train_plan
    run = rag_run if pipeline == "rag" else train_run
    si = ShadowInput(plan, bundle, run)
    report, _, _, _, _, log = measure_robustness(si, CorruptionSpec())
    assert len(report.corrupted_rows) == 20
    assert log.count("embed") == 20
    assert log.row_ids("embed") == report.corrupted_rows
    if pipeline == "rag":
        assert log.count("llm_infer") == 20
        assert log.row_ids("llm_infer") == report.corrupted_rows
    else:
        assert log.count("llm_infer") == 0
    assert report.accuracy_corrupted <= report.accuracy_clean
    # the frozen default corruption strictly degrades both pipelines
    assert report.accuracy_corrupted < report.accuracy_clean


def test_zero_fraction_detection_is_free(rag_plan, bundle, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    report, _, _, _, _, log = measure_robustness(si, CorruptionSpec(fraction=0.0))
    assert report.accuracy_corrupted == report.accuracy_clean
    assert log.count() == 0


@pytest.mark.parametrize("pipeline", ["rag", "train"])
def test_fix_restores_accuracy_and_respects_row_bounds(pipeline, bundle, rag_plan, train_plan,
                                                       rag_run, train_run):
    plan = rag_plan if pipeline == "rag" else train_plan
    run = rag_run if pipeline == "rag" else train_run
    si = ShadowInput(plan, bundle, run)
    outcome = run_data_errors_shadow(si)
    report = outcome.report
    assert report["accuracy_fixed"] is not None
    assert report["accuracy_fixed"] >= report["accuracy_corrupted"]
    corrupted_rows = set(report["corrupted_rows"])
    assert report["invocations"]["fix"]["spellcheck"] == len(corrupted_rows) == 20
    for phase in ("detection", "fix"):
        log = outcome.report["logs"][phase]
        for kind in ("embed", "llm_infer", "spellcheck"):
            assert log.row_ids(kind) <= corrupted_rows


def test_spliced_fix_accuracy_matches_full_rerun_on_corrupted_data(bundle, rag_plan, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    spec = CorruptionSpec()
    outcome = run_data_errors_shadow(si, spec)
    (sugg,) = outcome.suggestions
    corrupted, _rows = corrupt_typos(bundle.test_posts, spec, "post_text", bundle.vocabulary)
    corrupted_bundle = replace(bundle, test_posts=corrupted)
    cold_corrupted = execute(rag_plan, corrupted_bundle)
    assert outcome.report["accuracy_corrupted"] == cold_corrupted.metrics["accuracy"]
    cold_fixed = execute(apply_patch(rag_plan, sugg.patch), corrupted_bundle)
    assert outcome.report["accuracy_fixed"] == cold_fixed.metrics["accuracy"]


def test_robust_pipeline_yields_finding_only(bundle, rag_plan, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    outcome = run_data_errors_shadow(si, CorruptionSpec(fraction=0.0))
    assert outcome.suggestions == []
    assert outcome.findings and outcome.findings[0].source == "data_errors"
