from __future__ import annotations

import itertools
import random

import pytest

from shadowpipe.engine import execute
from shadowpipe.plan import apply_patch
from shadowpipe.shadows import ShadowInput
from shadowpipe.shadows.slices import (
    Slice,
    SliceConfig,
    error_vector,
    run_slices_shadow,
    slice_find,
    slice_score,
    slice_features,
)


def brute_force_slices(features, errors, config: SliceConfig):
    """Exhaustive enumeration over every conjunction up to max_level."""
    n = len(errors)
    total = sum(errors)
    if n == 0 or total == 0:
        return []
    e_bar = total / n
    names = sorted(features)
    values = {f: sorted({str(v) for v in features[f]}) for f in names}
    scored = []
    for level in range(1, config.max_level + 1):
        for combo in itertools.combinations(names, level):
            for vals in itertools.product(*(values[f] for f in combo)):
                rows = [i for i in range(n)
                        if all(str(features[f][i]) == v for f, v in zip(combo, vals))]
                if len(rows) < config.min_support:
                    continue
                err = sum(errors[i] for i in rows)
                scored.append(Slice(tuple(zip(combo, vals)), len(rows), err / len(rows),
                                    slice_score(config.alpha, n, e_bar, len(rows), err)))
    scored.sort(key=lambda s: (-s.score, len(s.predicates), s.predicates))
    return scored[: config.top_k]


def assert_equal_slices(actual, expected):
    assert len(actual) == len(expected)
    for a, b in zip(actual, expected):
        assert a.predicates == b.predicates
        assert a.support == b.support
        assert abs(a.score - b.score) <= 1e-12


def test_whole_dataset_scores_zero():
    assert slice_score(0.95, 100, 0.3, 100, 30) == pytest.approx(0.0, abs=1e-12)


def test_slice_find_matches_brute_force_on_default_corpus(rag_plan, bundle, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    features = slice_features(si)
    errors = error_vector(si)
    config = SliceConfig()
    assert_equal_slices(slice_find(features, errors, config),
                        brute_force_slices(features, errors, config))


def test_top_slice_is_the_foreign_language_slice(rag_plan, train_plan, bundle, rag_run, train_run):
    for plan, run in ((rag_plan, rag_run), (train_plan, train_run)):
        si = ShadowInput(plan, bundle, run)
        top = slice_find(slice_features(si), error_vector(si), SliceConfig())[0]
        assert top.predicates == (("language", "xx"),)


@pytest.mark.parametrize("seed", range(12))
def test_slice_find_matches_brute_force_on_random_instances(seed):
    rng = random.Random(seed)
    n = rng.randint(40, 160)
    features = {
        "country": [rng.choice(["US", "CAN", "UK", "DE"]) for _ in range(n)],
        "language": [rng.choice(["en", "xx"]) for _ in range(n)],
        "length_bucket": [rng.choice(["short", "medium", "long"]) for _ in range(n)],
    }
    errors = [rng.random() < 0.3 for _ in range(n)]
    errors = [int(e) for e in errors]
    config = SliceConfig(alpha=rng.choice([0.8, 0.95, 1.0]), min_support=rng.choice([5, 10]),
                         max_level=3, top_k=rng.choice([3, 5]))
    assert_equal_slices(slice_find(features, errors, config),
                        brute_force_slices(features, errors, config))


def test_no_errors_returns_empty():
    assert slice_find({"f": ["a", "b"]}, [0, 0], SliceConfig(min_support=1)) == []


def test_no_features_rejected():
    with pytest.raises(ValueError):
        slice_find({}, [1, 0])


def test_ranking_tie_breaks_prefer_fewer_predicates():
    # two disjoint all-error slices with equal support tie on score; the
    # single-predicate slice must sort before any two-predicate rival
    features = {
        "a": ["x"] * 10 + ["y"] * 10 + ["z"] * 20,
        "b": ["p"] * 10 + ["q"] * 10 + ["r"] * 20,
    }
    errors = [1] * 20 + [0] * 20
    result = slice_find(features, errors, SliceConfig(min_support=10, top_k=4))
    assert all(len(s.predicates) == 1 for s in result[:4])


def test_fix_evaluation_splice_equals_cold_patched_run(rag_plan, train_plan, bundle,
                                                       rag_run, train_run):
    for plan, run in ((rag_plan, rag_run), (train_plan, train_run)):
        si = ShadowInput(plan, bundle, run)
        outcome = run_slices_shadow(si)
        (sugg,) = outcome.suggestions
        cold = execute(apply_patch(plan, sugg.patch), bundle)
        assert sugg.accuracy_after == cold.metrics["accuracy"]
        assert sugg.accuracy_after > sugg.accuracy_before


def test_fix_invocations_restricted_to_slice_rows(rag_plan, bundle, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    outcome = run_slices_shadow(si)
    counts = outcome.report["fix_invocations"]
    n_foreign = sum(1 for l in bundle.test_posts.columns["language"] if l == "xx")
    assert counts == {"translate": n_foreign, "embed": n_foreign, "llm_infer": n_foreign}
    log = outcome.report["logs"]["fix"]
    foreign_ids = {
        rid for rid, lang in zip(rag_run.relation_of("test_posts").row_ids,
                                 rag_run.relation_of("test_posts").columns["language"])
        if lang == "xx"
    }
    assert log.row_ids("translate") == foreign_ids
    assert log.row_ids("embed") == foreign_ids


def test_train_fix_uses_no_llm(train_plan, bundle, train_run):
    si = ShadowInput(train_plan, bundle, train_run)
    outcome = run_slices_shadow(si)
    assert outcome.report["fix_invocations"]["llm_infer"] == 0
    assert outcome.report["fix_invocations"]["translate"] == 30


def test_pruning_never_removes_an_oracle_top_slice(rag_plan, bundle, rag_run):
    si = ShadowInput(rag_plan, bundle, rag_run)
    features = slice_features(si)
    errors = error_vector(si)
    for top_k in (1, 2, 5, 8):
        config = SliceConfig(top_k=top_k)
        assert_equal_slices(slice_find(features, errors, config),
                            brute_force_slices(features, errors, config))


def test_slice_config_validation():
    with pytest.raises(ValueError):
        SliceConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SliceConfig(min_support=0)
