"""Jaccard dedup, sampling, random cuts and testbed derivation."""

import math
import random
from datetime import datetime, timezone

import pytest

from codecausal.features import DataPoint, compute_features
from codecausal.ingest import RawSample
from codecausal import testbeds as tb
from codecausal import tokenization
from codecausal.testbeds import (DedupReport, build_random_cut,
                                 build_raw_testbeds, cut_eligible, dedup,
                                 derive_task_testbeds, jaccard_similarity,
                                 sample_points)


def _oracle_jaccard(a, b):
    # independent of the library routine on purpose
    inter = sum(1 for x in a if x in b)
    union = len(a) + len(b) - inter
    return 1.0 if union == 0 else inter / union


def make_point(code, docstring=None, message="update helpers with care",
               fun_name="f"):
    sample = RawSample(
        commit_id="b" * 40, repository="demo", path="m.py",
        file_name="m.py", fun_name=fun_name, commit_message=message,
        docstring=docstring, code=code,
        committed_at=datetime(2022, 5, 1, tzinfo=timezone.utc))
    return DataPoint(raw=sample, features=compute_features(code, docstring))


_WORDS = ("alpha", "bravo", "carbon", "delta", "ember", "falcon", "garnet",
          "harbor", "indigo", "jasper", "krypton", "lumen", "meteor",
          "nimbus", "onyx", "prism", "quartz", "raven", "sierra", "topaz")


def _method(idx, lines=4):
    """Synthetic methods whose identifiers are unique per method and repeat
    inside it, mirroring real code: once the tokenizer merges them, token
    sets discriminate between methods."""
    rng = random.Random(idx * 7919 + 13)
    stem = f"{_WORDS[idx % 20]}{idx}"
    arg, acc, tmp = f"{stem}_input", f"{stem}_acc", f"{stem}_tmp"
    shapes = [
        lambda j: f"    {acc} = {acc} + {arg} * {rng.randint(2, 997)}\n",
        lambda j: (f"    if {acc} > {rng.randint(1, 500)}:\n"
                   f"        {acc} = {acc} - {tmp}\n"),
        lambda j: f"    {tmp} = '{stem}-{rng.randint(10, 99)}'\n",
        lambda j: (f"    for {tmp} in {arg}:\n"
                   f"        {acc} += {tmp} * {rng.randint(1, 50)}\n"),
        lambda j: f"    {tmp} = [{acc}, {rng.randint(10, 99)}, {arg}]\n",
    ]
    body = "".join(shapes[(idx + j) % len(shapes)](j) for j in range(lines))
    return f"def {stem}_run({arg}):\n    {acc} = 0\n{body}    return {acc}\n"


# -- jaccard ------------------------------------------------------------------

def test_identical_sets_score_one():
    s = frozenset({1, 2, 3})
    assert jaccard_similarity(s, s) == 1.0


def test_disjoint_sets_score_zero():
    assert jaccard_similarity(frozenset({1}), frozenset({2})) == 0.0


def test_hand_enumerated_example():
    a, b = frozenset("abc"), frozenset("bcd")
    assert jaccard_similarity(a, b) == 0.5  # |∩|=2, |∪|=4


def test_both_empty_defined_as_identical():
    assert jaccard_similarity(frozenset(), frozenset()) == 1.0


def test_symmetry():
    rng = random.Random(5)
    for _ in range(50):
        a = frozenset(rng.sample(range(30), rng.randint(0, 10)))
        b = frozenset(rng.sample(range(30), rng.randint(0, 10)))
        assert jaccard_similarity(a, b) == jaccard_similarity(b, a)
        assert math.isclose(jaccard_similarity(a, b), _oracle_jaccard(a, b))


# -- dedup -----------------------------------------------------------------------

def _planted_corpus():
    """100 token sets: 90 mutually disjoint originals + 10 near-clones
    (jaccard ~0.818 against their original)."""
    originals = [frozenset(range(100 * i, 100 * i + 30)) for i in range(90)]
    clones = []
    for k in range(10):
        base = set(originals[k])
        removed = sorted(base)[:3]
        for j, r in enumerate(removed):
            base.discard(r)
            base.add(9000 + 10 * k + j)
        clones.append(frozenset(base))
    sets = originals + clones
    points = [f"orig{i}" for i in range(90)] + [f"clone{k}" for k in range(10)]
    return points, sets


def test_planted_clones_are_exactly_the_drops():
    points, sets = _planted_corpus()
    # verify the planted geometry with the independent oracle first
    for k in range(10):
        assert _oracle_jaccard(sets[90 + k], sets[k]) >= 0.8
    kept, report = dedup(points, sets, threshold=0.7)
    assert kept == [f"orig{i}" for i in range(90)]
    assert report.before == 100 and report.dupes == 10 and report.after == 90
    assert math.isclose(report.rate, 0.10)


def test_post_dedup_max_pairwise_below_threshold():
    points, sets = _planted_corpus()
    kept, _ = dedup(points, sets, threshold=0.7)
    kept_sets = [sets[points.index(p)] for p in kept]
    worst = max(_oracle_jaccard(kept_sets[i], kept_sets[j])
                for i in range(len(kept_sets))
                for j in range(i + 1, len(kept_sets)))
    assert worst < 0.7


def test_all_distinct_corpus_drops_nothing():
    sets = [frozenset(range(10 * i, 10 * i + 5)) for i in range(40)]
    kept, report = dedup(list(range(40)), sets, threshold=0.7)
    assert report.dupes == 0 and len(kept) == 40


def test_similarity_exactly_at_threshold_counts_as_duplicate():
    a = frozenset(range(7))
    b = frozenset(range(10))          # |∩|=7, |∪|=10 → 0.7
    kept, report = dedup(["a", "b"], [a, b], threshold=0.7)
    assert kept == ["a"] and report.dupes == 1


def test_dedup_requires_valid_threshold():
    with pytest.raises(tb.TestbedError):
        dedup([], [], threshold=0.0)


def test_report_arithmetic_enforced():
    with pytest.raises(tb.TestbedError):
        DedupReport(before=10, dupes=2, after=9)


# -- sampling -----------------------------------------------------------------------

def test_sample_full_corpus_is_permutation():
    corpus = list(range(20))
    got = sample_points(corpus, 20, seed=3)
    assert sorted(got) == corpus


def test_sample_deterministic_under_seed():
    corpus = list(range(100))
    assert sample_points(corpus, 10, seed=9) == sample_points(corpus, 10, seed=9)


def test_sample_too_large_errors():
    with pytest.raises(tb.TestbedError):
        sample_points([1, 2], 3, seed=0)


def test_single_draw_frequencies_within_three_sigma():
    """Binomial oracle: over 10k draws of n=1 from 10 items, each item's
    count should stay within 3 sigma of np = 1000."""
    corpus = list(range(10))
    counts = {i: 0 for i in corpus}
    for s in range(10_000):
        counts[sample_points(corpus, 1, seed=s)[0]] += 1
    n, p = 10_000, 0.1
    sigma = math.sqrt(n * p * (1 - p))     # ~30
    for i, c in counts.items():
        assert abs(c - n * p) <= 3 * sigma, (i, c)


# -- random cut ------------------------------------------------------------------------

def test_short_method_is_filtered():
    dp = make_point("def f():\n    pass\n")     # 7 tokens, short
    assert not cut_eligible(dp)
    assert build_random_cut(dp, seed=1) is None


def test_cut_partitions_code_byte_exactly():
    dp = make_point(_method(1, lines=5))
    for seed in range(20):
        prefix, suffix = build_random_cut(dp, seed=seed)
        assert prefix + suffix == dp.raw.code


def test_cut_lands_after_signature_colon_before_final_token():
    dp = make_point(_method(2, lines=5))
    colon = dp.raw.code.index(":\n")
    for seed in range(20):
        prefix, suffix = build_random_cut(dp, seed=seed)
        assert len(prefix) > colon
        assert suffix.strip()  # the final token stays in the suffix


def test_cut_offsets_golden():
    """Five seeded cuts on one fixture method, frozen after manual review
    of the produced prefixes."""
    dp = make_point("def f(a):\n    b = a + 1\n    c = b * 2\n    return c\n")
    got = [len(build_random_cut(dp, seed=s)[0]) for s in range(5)]
    assert got == [30, 18, 14, 20, 20]


# -- task testbeds ------------------------------------------------------------------------

def _corpus(n=40):
    points = []
    for i in range(n):
        doc = f"Compute helper number {i} over its argument values carefully."
        msg = ("rework helper logic and tighten validations around input "
               f"handling case {i}")
        points.append(make_point(_method(i), docstring=doc, message=msg,
                                 fun_name=f"func_{i}"))
    return points


@pytest.fixture(scope="module")
def small_model():
    return tokenization.train_bpe([_method(i) for i in range(40)],
                                  vocab_size=800)


def test_build_raw_testbeds_and_task_derivation(small_model):
    points = _corpus()
    beds, reports = build_raw_testbeds(points, small_model, seed=7)
    assert reports["RawData"].dupes == 0
    raw, raw_doc = beds["RawData"], beds["RawDataDocstring"]
    task_beds, task_reports = derive_task_testbeds(
        raw, raw_doc, small_model, n=30, seed=7)
    assert set(task_beds) == {"RandomCut", "WithDocstring", "FromDocstring",
                              "CommitGen", "SummarizationGen"}
    for name, bed in task_beds.items():
        assert task_reports[name].after == len(bed.points)
    for tp in task_beds["RandomCut"].points:
        assert tp.cut_prefix + tp.expected_suffix == tp.point.raw.code
    for tp in task_beds["WithDocstring"].points:
        assert tp.cut_prefix is not None


def test_io_kinds_follow_task_table():
    assert tb.Testbed("FromDocstring", (), 0).io_kind == "text→code"
    assert tb.Testbed("WithDocstring", (), 0).io_kind == "code+text→code"
    assert tb.Testbed("CommitGen", (), 0).io_kind == "code→text"
    assert tb.Testbed("RandomCut", (), 0).task == "code completion"


def test_short_doc_and_message_excluded_from_gen_testbeds(small_model):
    points = _corpus(40)
    # plant one point with an 8-word docstring (<=50 chars) and 40-char msg
    weak = make_point(_method(99),
                      docstring="a short doc of just eight words here",
                      message="a forty char commit message lives here",
                      fun_name="weak_one")
    assert len(weak.raw.docstring.split()) == 8
    assert len(weak.raw.docstring) <= 50
    assert len(weak.raw.commit_message) <= 50
    assert len(weak.raw.commit_message.split()) <= 10
    beds, _ = build_raw_testbeds(points + [weak], small_model, seed=1)
    task_beds, _ = derive_task_testbeds(beds["RawData"],
                                        beds["RawDataDocstring"],
                                        small_model, n=30, seed=1)
    for name in ("SummarizationGen", "CommitGen"):
        assert all(tp.point.raw.fun_name != "weak_one"
                   for tp in task_beds[name].points), name


def test_derivation_is_deterministic(small_model):
    points = _corpus()
    beds, _ = build_raw_testbeds(points, small_model, seed=3)
    a, _ = derive_task_testbeds(beds["RawData"], beds["RawDataDocstring"],
                                small_model, n=30, seed=3)
    b, _ = derive_task_testbeds(beds["RawData"], beds["RawDataDocstring"],
                                small_model, n=30, seed=3)
    for name in a:
        assert tb.testbed_to_rows(a[name]) == tb.testbed_to_rows(b[name])


def test_insufficient_points_error_names_the_testbed(small_model):
    points = _corpus(10)
    beds, _ = build_raw_testbeds(points, small_model, seed=3)
    with pytest.raises(tb.TestbedError, match="RandomCut"):
        derive_task_testbeds(beds["RawData"], beds["RawDataDocstring"],
                             small_model, n=1000, seed=3)


def test_testbed_rows_round_trip(small_model):
    points = _corpus()
    beds, _ = build_raw_testbeds(points, small_model, seed=3)
    task_beds, _ = derive_task_testbeds(beds["RawData"],
                                        beds["RawDataDocstring"],
                                        small_model, n=30, seed=3)
    bed = task_beds["WithDocstring"]
    back = tb.testbed_from_rows(tb.testbed_to_rows(bed), seed=bed.seed)
    assert back.name == bed.name
    assert back.points == bed.points


def test_task_filters_are_idempotent():
    texts = ["alpha beta gamma delta epsilon zeta eta theta iota kappa lambda",
             "tiny", None, "x" * 60]
    from codecausal.testbeds import _long_enough
    once = [t for t in texts if _long_enough(t)]
    twice = [t for t in once if _long_enough(t)]
    assert once == twice
