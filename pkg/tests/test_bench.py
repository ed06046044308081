from __future__ import annotations

import statistics

import pytest

from shadowpipe.bench import (
    BenchConfigs,
    BenchScenario,
    SCRIPTED_REGEX_EDIT,
    default_scenarios,
    median_of,
    run_bench,
    run_maintenance_bench,
    write_bench_csv,
)
from shadowpipe.calls import LatencyConfig
from shadowpipe.plan import apply_patch, diff_plans
from shadowpipe.shadows.data_errors import CorruptionSpec
from shadowpipe.shadows.label_errors import LabelErrorConfig
from shadowpipe.shadows.slices import SliceConfig

TINY = LatencyConfig(embed_per_row=0.0, llm_per_row=0.0, translate_per_row=0.0,
                     spellcheck_per_row=0.0, mlp_train_flat=0.0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        BenchScenario("rag", "label_errors", "opt_proxy")
    with pytest.raises(ValueError):
        BenchScenario("rag", "nope", "naive")
    grid = default_scenarios()
    assert len(grid) == 13  # 6 cells x 2 modes + opt_proxy


def test_scripted_edit_is_a_single_operator_change(rag_plan):
    diff = diff_plans(rag_plan, apply_patch(rag_plan, SCRIPTED_REGEX_EDIT))
    assert diff.single_operator_change
    assert diff.changed == {"weak_labels"}


def test_bench_rows_and_median_shape(bundle, tmp_path):
    scenarios = [BenchScenario("train", "slices", mode, repetitions=3, warmup=1)
                 for mode in ("naive", "optimised")]
    rows = run_bench(scenarios, latency=TINY, bundle=bundle)
    for mode in ("naive", "optimised"):
        reps = [r["ms"] for r in rows
                if r["mode"] == mode and isinstance(r["rep"], int)]
        assert len(reps) == 3
        assert median_of(rows, "train", "slices", mode) == statistics.median(reps)
        assert statistics.median(reps) == sorted(reps)[1]  # odd count: exact middle
    path = tmp_path / "bench.csv"
    write_bench_csv(rows, path)
    header = path.read_text().splitlines()[0]
    assert header == "scenario,pipeline,shadow,mode,rep,ms"


def test_maintenance_bench_results_match_naive_metric_for_metric(bundle):
    configs = BenchConfigs(SliceConfig(), LabelErrorConfig(), CorruptionSpec())
    # the harness raises if incremental maintenance diverges from the naive
    # recomputation on any reported metric
    rows = run_maintenance_bench(
        [("train", "slices"), ("rag", "data_errors"), ("rag", "label_errors")],
        latency=TINY, bundle=bundle, configs=configs, repetitions=1, warmup=0,
    )
    for pipeline, shadow in (("train", "slices"), ("rag", "data_errors")):
        assert median_of(rows, pipeline, shadow, "naive") >= 0
        assert median_of(rows, pipeline, shadow, "incremental") >= 0
