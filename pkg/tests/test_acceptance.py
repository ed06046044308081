"""Acceptance suite: one test per criterion, each printing a PASS line
(run with -s to see them)."""

from __future__ import annotations

import json
import random
import time

import numpy as np
import pytest
from click.testing import CliRunner

from shadowpipe.bench import (
    default_scenarios,
    median_of,
    run_bench,
    run_maintenance_bench,
)
from shadowpipe.cli import main as cli_main
from shadowpipe.engine import execute
from shadowpipe.ivm import affected_test_rows, diff_relations, incremental_update
from shadowpipe.plan import PlanPatch, apply_patch
from shadowpipe.session import Session
from shadowpipe.shadows import ShadowInput
from shadowpipe.shadows.data_errors import CorruptionSpec, measure_robustness
from shadowpipe.shadows.label_errors import brute_force_shapley, knn_shapley
from shadowpipe.shadows.slices import SliceConfig, error_vector, slice_find, slice_features

from test_slices import assert_equal_slices, brute_force_slices

REGEX_EDIT = PlanPatch(
    "weak_labels",
    {"positive_patterns": ["(0|no|zero) (motivation|energy)", "lost (interest|motivation)"]},
)


def report(criterion: int, message: str) -> None:
    print(f"ACCEPTANCE {criterion} PASS: {message}")


def test_criterion_1_knn_shapley_oracle_equality():
    start = time.perf_counter()
    rng = random.Random(2024)
    cases = 0
    worst = 0.0
    eff_worst = 0.0
    while cases < 108:
        n = rng.randint(1, 6)
        k = rng.choice([1, 2, 3])
        vecs = []
        for _ in range(n):
            v = np.array([rng.gauss(0, 1) for _ in range(4)])
            v /= np.linalg.norm(v)
            vecs.append(tuple(float(x) for x in v))
        labels = [rng.randint(0, 1) for _ in range(n)]
        tv = np.array([rng.gauss(0, 1) for _ in range(4)])
        tv /= np.linalg.norm(tv)
        tv = tuple(float(x) for x in tv)
        tl = rng.randint(0, 1)
        ids = [f"r{i:03d}" for i in range(n)]
        fast = knn_shapley(vecs, labels, [tv], [tl], k, ids)
        brute = brute_force_shapley(vecs, labels, tv, tl, k, ids)
        worst = max(worst, max(abs(fast[rid] - brute[i]) for i, rid in enumerate(ids)))
        order = sorted(range(n), key=lambda i: (-float(np.dot(np.asarray(vecs[i]), tv)), ids[i]))
        v_full = sum(labels[j] == tl for j in order[: min(k, n)]) / k
        eff_worst = max(eff_worst, abs(sum(fast.values()) - v_full))
        cases += 1
    elapsed = time.perf_counter() - start
    assert worst <= 1e-9, f"recurrence deviates from the permutation oracle by {worst}"
    assert eff_worst <= 1e-9, f"efficiency violated by {eff_worst}"
    assert elapsed < 5.0, f"criterion 1 took {elapsed:.2f}s"
    report(1, f"{cases} instances, max |delta| {worst:.2e}, efficiency {eff_worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_sliceline_oracle_equality(rag_plan, bundle, rag_run):
    start = time.perf_counter()
    si = ShadowInput(rag_plan, bundle, rag_run)
    features = slice_features(si)
    errors = error_vector(si)
    config = SliceConfig()
    found = slice_find(features, errors, config)
    oracle = brute_force_slices(features, errors, config)
    assert_equal_slices(found, oracle)
    assert found[0].predicates == (("language", "xx"),), found[0]
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"criterion 2 took {elapsed:.2f}s"
    report(2, f"top-k matches exhaustive enumeration; top-1 {dict(found[0].predicates)}, {elapsed:.2f}s")


def test_criterion_3_corruption_contract(rag_plan, bundle, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    spec = CorruptionSpec()
    rep, corrupted_rel, _vecs, _preds, _lin, log = measure_robustness(si, spec)
    n_test = bundle.test_posts.n_rows
    expected = round(spec.fraction * n_test)
    assert len(rep.corrupted_rows) == expected
    base = rag_run.relation_of("test_posts")
    for rid in base.row_ids:
        if rid not in rep.corrupted_rows:
            assert corrupted_rel.value("post_text", rid) == base.value("post_text", rid)
    assert log.count("embed") == expected
    assert log.count("llm_infer") == expected
    assert log.row_ids("embed") == rep.corrupted_rows
    assert log.row_ids("llm_infer") == rep.corrupted_rows
    report(3, f"exactly {expected} rows corrupted; detection embed/| llm counts both {expected}")


@pytest.mark.parametrize("pipeline", ["rag", "train"])
def test_criterion_4_ivm_bit_equivalence(pipeline, bundle, rag_plan, train_plan,
                                         rag_run, train_run):
    plan = rag_plan if pipeline == "rag" else train_plan
    prior = rag_run if pipeline == "rag" else train_run
    edited = apply_patch(plan, REGEX_EDIT)
    incremental, policy, _ = incremental_update(prior, plan, edited, bundle)
    cold = execute(edited, bundle)
    assert policy.enabled
    assert incremental.metrics == cold.metrics
    for nid in cold.node_outputs:
        assert incremental.node_outputs[nid] == cold.node_outputs[nid], nid

    applied = {}
    for source in ("slices", "label_errors", "data_errors"):
        session = Session(plan, bundle)
        session.run_shadows([source])
        sugg = session.ranked_suggestions()[0]
        session.apply_suggestion(sugg.id)
        cold_fix = execute(apply_patch(plan, sugg.patch), bundle)
        assert session.metrics() == cold_fix.metrics, source
        for nid in cold_fix.node_outputs:
            assert session.run.node_outputs[nid] == cold_fix.node_outputs[nid], (source, nid)
        applied[source] = session.metrics()["accuracy"]
    report(4, f"{pipeline}: regex edit and all three fix applications bit-equal cold runs "
              f"(post-fix accuracies {applied})")


def test_criterion_5_recompute_minimality(rag_plan, bundle, rag_run):
    edited = apply_patch(rag_plan, REGEX_EDIT)
    result, policy, _ = incremental_update(rag_run, rag_plan, edited, bundle)
    assert policy.enabled
    changed = diff_relations(
        rag_run.relation_of("weak_labels"), result.relation_of("weak_labels")
    ).changed
    expected = affected_test_rows(rag_run, changed)
    got = result.invocations.row_ids("llm_infer")
    assert got == expected, f"re-inference set {len(got)} != affected set {len(expected)}"
    assert result.invocations.count("llm_infer") == len(expected)
    assert result.invocations.count("embed") == 0
    report(5, f"llm re-inference set equals the {len(expected)} affected rows; zero embeds")


@pytest.mark.bench
def test_criterion_6_benchmark_trends(bundle):
    start = time.perf_counter()
    scenarios = default_scenarios(repetitions=3, warmup=1)
    rows = run_bench(scenarios, bundle=bundle)
    speedups = {}
    for pipeline in ("rag", "train"):
        for shadow in ("slices", "data_errors", "label_errors"):
            naive = median_of(rows, pipeline, shadow, "naive")
            optimised = median_of(rows, pipeline, shadow, "optimised")
            speedups[(pipeline, shadow)] = naive / optimised
            assert naive / optimised >= 4.0, (
                f"{pipeline}:{shadow} speedup {naive / optimised:.2f} < 4"
            )
    proxy = median_of(rows, "train", "label_errors", "opt_proxy")
    naive_tl = median_of(rows, "train", "label_errors", "naive")
    proxy_speedup = naive_tl / proxy
    assert proxy_speedup > speedups[("train", "label_errors")], (
        f"opt_proxy {proxy_speedup:.1f} not above optimised "
        f"{speedups[('train', 'label_errors')]:.1f}"
    )

    maint = run_maintenance_bench([("train", "slices"), ("rag", "data_errors")],
                                  bundle=bundle, repetitions=3, warmup=1)
    maint_speedups = {}
    for cell in (("train", "slices"), ("rag", "data_errors")):
        naive = median_of(maint, *cell, "naive")
        incremental = median_of(maint, *cell, "incremental")
        maint_speedups[cell] = naive / incremental
        assert naive / incremental >= speedups[cell], (
            f"maintenance speedup {naive / incremental:.1f} below initial {speedups[cell]:.1f} for {cell}"
        )
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0, f"criterion 6 took {elapsed:.0f}s"
    pretty = {f"{p}:{s}": round(v, 1) for (p, s), v in speedups.items()}
    report(6, f"optimised speedups {pretty}, opt_proxy {proxy_speedup:.1f}x, "
              f"maintenance {[round(v,1) for v in maint_speedups.values()]}, {elapsed:.0f}s total")


def test_criterion_7_analysis_determinism(corpus_dir):
    runner = CliRunner()
    args = ["analyze", "--plan", "rag", "--data", str(corpus_dir), "--shadow", "all"]
    first = runner.invoke(cli_main, args)
    second = runner.invoke(cli_main, args)
    assert first.exit_code == second.exit_code == 0
    assert first.output == second.output
    payload = json.loads(first.output)
    assert len(payload["suggestions"]) == 3
    report(7, "two full analyses produced byte-identical suggestion JSON")


@pytest.mark.parametrize("pipeline", ["rag", "train"])
def test_criterion_8_end_to_end_improvement(pipeline, bundle, rag_plan, train_plan):
    plan = rag_plan if pipeline == "rag" else train_plan
    outcomes = {}
    for source in ("slices", "label_errors", "data_errors"):
        session = Session(plan, bundle)
        session.run_shadows([source])
        sugg = session.ranked_suggestions()[0]
        before = session.metrics()["accuracy"]
        session.apply_suggestion(sugg.id)
        after = session.metrics()["accuracy"]
        cold = execute(apply_patch(plan, sugg.patch), bundle)
        assert after == cold.metrics["accuracy"]
        assert after >= before, f"{source} decreased accuracy {before} -> {after}"
        if source == "slices":
            assert after > before, "translation fix must strictly improve accuracy"
        outcomes[source] = (before, after)
    report(8, f"{pipeline}: applied fixes never decrease accuracy {outcomes}")
