"""Levenshtein / BLEU / CodeBLEU against independent oracles."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from codecausal.llm_eval.metrics import (MetricError, ast_match, bleu,
                                         codebleu, dataflow_edges,
                                         dataflow_match, levenshtein,
                                         weighted_bleu)


# -- exhaustive edit-search oracle (independent of the DP) --------------------

def _edits_within(a: str, b: str, budget: int) -> bool:
    if budget < 0:
        return False
    if abs(len(a) - len(b)) > budget:
        return False
    if not a:
        return len(b) <= budget
    if not b:
        return len(a) <= budget
    if a[0] == b[0] and _edits_within(a[1:], b[1:], budget):
        return True
    return (_edits_within(a[1:], b[1:], budget - 1)      # substitute
            or _edits_within(a[1:], b, budget - 1)       # delete
            or _edits_within(a, b[1:], budget - 1))      # insert


def oracle_levenshtein(a: str, b: str) -> int:
    k = 0
    while not _edits_within(a, b, k):
        k += 1
    return k


def test_levenshtein_identity():
    assert levenshtein("abc", "abc") == (0, 1.0)


def test_levenshtein_empty_vs_word():
    assert levenshtein("", "abc") == (3, 0.0)


def test_levenshtein_both_empty():
    assert levenshtein("", "") == (0, 1.0)


def test_levenshtein_kitten_sitting():
    dist, sim = levenshtein("kitten", "sitting")
    assert dist == 3
    assert math.isclose(sim, 1 - 3 / 7)


def test_levenshtein_equals_exhaustive_oracle_on_short_pairs():
    rng = random.Random(42)
    for _ in range(300):
        a = "".join(rng.choice("abc") for _ in range(rng.randint(0, 7)))
        b = "".join(rng.choice("abc") for _ in range(rng.randint(0, 7)))
        assert levenshtein(a, b)[0] == oracle_levenshtein(a, b), (a, b)


@given(st.text(alphabet="abcd", max_size=12),
       st.text(alphabet="abcd", max_size=12),
       st.text(alphabet="abcd", max_size=12))
@settings(max_examples=150, deadline=None)
def test_levenshtein_is_a_metric(a, b, c):
    dab, sab = levenshtein(a, b)
    dba, _ = levenshtein(b, a)
    dac, _ = levenshtein(a, c)
    dcb, _ = levenshtein(c, b)
    assert dab == dba                      # symmetry
    assert (dab == 0) == (a == b)          # identity of indiscernibles
    assert dab <= dac + dcb                # triangle inequality
    assert 0.0 <= sab <= 1.0
    assert dab <= max(len(a), len(b))


# -- BLEU ---------------------------------------------------------------------

def test_bleu_identical_is_one():
    code = "def f(a):\n    return a + 1\n"
    assert math.isclose(bleu(code, code), 1.0)


def test_bleu_hand_worked_full_overlap_decay():
    # cand [a b c d x y] vs ref [a b c d e f]:
    #  p1 = 4/6, p2 = 3/5, p3 = 2/4, p4 = 1/3, brevity = 1 (equal length)
    #  bleu = (4/6 * 3/5 * 2/4 * 1/3) ** (1/4) = (1/15) ** (1/4)
    expected = (1.0 / 15.0) ** 0.25
    assert abs(bleu("a b c d x y", "a b c d e f") - expected) < 1e-9


def test_bleu_hand_worked_short_candidate_brevity():
    # cand [x = y] vs ref [x = y + 1]: p1..p3 all 1, p4 smoothed to 1,
    # brevity = exp(1 - 5/3)
    expected = math.exp(1.0 - 5.0 / 3.0)
    assert abs(bleu("x = y", "x = y + 1") - expected) < 1e-9


def test_bleu_zero_unigram_overlap_is_zero():
    assert bleu("x y z", "a b c") == 0.0


def test_bleu_empty_reference_rejected():
    with pytest.raises(MetricError):
        bleu("x", "")


def test_bleu_empty_candidate_scores_zero():
    assert bleu("", "a b c") == 0.0


def test_bleu_single_token_identity():
    assert math.isclose(bleu("x", "x"), 1.0)


# -- CodeBLEU -------------------------------------------------------------------

FIXTURE_CODES = [
    "def f(a):\n    return a + 1\n",
    "def g(x, y):\n    if x > y:\n        return x\n    return y\n",
    "def h(items):\n    total = 0\n    for it in items:\n        total += it\n    return total\n",
    "class K:\n    def m(self):\n        return self.v * 2\n",
    "def w(path):\n    with open(path) as fh:\n        return fh.read()\n",
]


def test_codebleu_identity_on_fixtures():
    for code in FIXTURE_CODES:
        assert math.isclose(codebleu(code, code), 1.0), code


def test_codebleu_degenerate_weights_reduce_to_bleu():
    cand = "def f(a):\n    return a + 2\n"
    ref = "def f(a):\n    return a + 1\n"
    assert abs(codebleu(cand, ref, weights=(1, 0, 0, 0)) -
               bleu(cand, ref)) < 1e-12


def test_codebleu_weights_must_sum_to_one():
    with pytest.raises(MetricError):
        codebleu("x", "x", weights=(0.5, 0.5, 0.5, 0.5))


def test_renamed_variables_keep_ast_but_break_dataflow():
    ref = "def f(a):\n    b = a + 1\n    return b\n"
    cand = "def f(x):\n    y = x + 1\n    return y\n"
    assert ast_match(cand, ref) == 1.0
    assert dataflow_match(cand, ref) < 1.0


def test_dataflow_edges_track_reaching_definitions():
    code = "def f(a):\n    b = a + 1\n    return b\n"
    assert dict(dataflow_edges(code)) == {("a", 0): 1, ("b", 0): 1}


def test_dataflow_redefinition_bumps_ordinal():
    code = "x = 1\ny = x\nx = 2\nz = x\n"
    edges = dict(dataflow_edges(code))
    assert edges == {("x", 0): 1, ("x", 1): 1}


def test_dataflow_empty_reference_scores_one():
    assert dataflow_match("x = 1\n", "1 + 2\n") == 1.0


def test_ast_match_partial_overlap_between_zero_and_one():
    ref = "def f(a):\n    if a:\n        return 1\n    return 0\n"
    cand = "def f(a):\n    return 1\n"
    assert 0.0 < ast_match(cand, ref) < 1.0


def test_weighted_bleu_boosts_keyword_matches():
    ref = "def f():\n    return 1\n"
    kw_match = "def g():\n    return 2\n"     # keywords align, names differ
    id_match = "f = lambda: 1\n"
    assert weighted_bleu(kw_match, ref) > bleu(kw_match, ref) * 0.99
    assert weighted_bleu(kw_match, ref) > weighted_bleu(id_match, ref)


def test_codebleu_tolerates_error_nodes():
    ref = "def f(a):\n    return a\n"
    cand = "def f(a:\n    return a\n"          # malformed candidate
    score = codebleu(cand, ref)
    assert 0.0 <= score <= 1.0


@given(st.sampled_from(FIXTURE_CODES), st.sampled_from(FIXTURE_CODES))
@settings(max_examples=25, deadline=None)
def test_codebleu_bounded(cand, ref):
    assert 0.0 <= codebleu(cand, ref) <= 1.0
