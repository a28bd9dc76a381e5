"""Feature extraction against the hand-computed oracle fixture set."""

import pytest
from hypothesis import given, strategies as st

from codecausal.features import (compute_features, compute_software_metrics,
                                 compute_syntactic_features,
                                 extract_docstring_features,
                                 is_valid_docstring, parse_method)


def test_curated_fixture_set_matches_hand_oracles(curated_methods):
    assert len(curated_methods) == 20
    for entry in curated_methods:
        fv = compute_features(entry["code"])
        for key, expected in entry["expected"].items():
            got = getattr(fv, key)
            assert got == expected, (
                f"{entry['name']}.{key}: hand oracle {expected}, got {got}")


def test_feature_computation_is_idempotent(curated_methods):
    for entry in curated_methods[:5]:
        assert compute_features(entry["code"]) == compute_features(entry["code"])


def test_single_space_between_names():
    tree, _ = parse_method("a b")
    *_, n_ws = compute_syntactic_features(tree, "a b")
    assert n_ws == 1


def test_whitespace_counts_characters_not_runs():
    code = "x  =  1\n"
    tree, _ = parse_method(code)
    *_, n_ws = compute_syntactic_features(tree, code)
    assert n_ws == 5  # four spaces plus the newline


def test_straight_line_complexity_is_one():
    code = "def f(a):\n    b = a * 2\n    c = b + 1\n    return c\n"
    tree, _ = parse_method(code)
    _, complexity, _ = compute_software_metrics(tree, code)
    assert complexity == 1


def test_if_else_complexity_two():
    code = "def f(a):\n    if a:\n        return 1\n    else:\n        return 2\n"
    tree, _ = parse_method(code)
    assert compute_software_metrics(tree, code)[1] == 2


def test_if_and_complexity_three():
    code = "def f(a, b):\n    if a and b:\n        return 1\n    return 0\n"
    tree, _ = parse_method(code)
    assert compute_software_metrics(tree, code)[1] == 3


def test_nloc_skips_blank_and_comment_only_lines():
    code = "def f():\n\n    # just a note\n    return 1\n"
    tree, _ = parse_method(code)
    nloc, _, _ = compute_software_metrics(tree, code)
    assert nloc == 2


def test_multiline_string_lines_count_in_nloc():
    code = 'def f():\n    s = """a\nb\nc"""\n    return s\n'
    tree, _ = parse_method(code)
    nloc, _, _ = compute_software_metrics(tree, code)
    assert nloc == 5


def test_docstring_features():
    n_words, vocab, lang = extract_docstring_features(
        "Returns the sum of inputs.")
    assert n_words == 5
    assert vocab == 5
    assert lang == "en"


def test_docstring_vocab_lowercases():
    n_words, vocab, _ = extract_docstring_features("Sum sum SUM values")
    assert n_words == 4
    assert vocab == 2


def test_docstring_validity_boundary():
    assert not is_valid_docstring("fix bug")
    assert not is_valid_docstring("three word doc")      # exactly 3: invalid
    assert is_valid_docstring("four words right here")
    assert not is_valid_docstring(None)
    assert not is_valid_docstring("")


def test_absent_docstring_features_are_zeroed():
    assert extract_docstring_features(None) == (0, 0, "en")


_STATEMENTS = st.sampled_from([
    "    x = y + 1\n", "    z = f(x)\n", "    w = 'txt'\n",
    "    q = x * 3\n", "    r = [1, 2]\n"])


@given(st.lists(_STATEMENTS, min_size=1, max_size=6))
def test_straight_line_functions_have_complexity_one(lines):
    code = "def gen(y, f, x):\n" + "".join(lines)
    fv = compute_features(code)
    assert fv.complexity == 1


@given(st.lists(_STATEMENTS, min_size=1, max_size=5), _STATEMENTS)
def test_appending_a_statement_never_decreases_counts(lines, extra):
    base = "def gen(y, f, x):\n" + "".join(lines)
    grown = base + extra
    fv0, fv1 = compute_features(base), compute_features(grown)
    assert fv1.nloc >= fv0.nloc
    assert fv1.token_count >= fv0.token_count
    assert fv1.n_ast_nodes >= fv0.n_ast_nodes


def test_invariants_hold_on_fixture_set(curated_methods):
    for entry in curated_methods:
        fv = compute_features(entry["code"])
        assert fv.complexity >= 1
        assert fv.n_identifiers <= fv.token_count
        if fv.n_ast_nodes >= 1:
            assert fv.n_ast_levels >= 1


def test_feature_vector_rejects_negative_counts():
    from codecausal.features import FeatureVector
    with pytest.raises(ValueError):
        FeatureVector(n_whitespaces=-1, nloc=0, token_count=0,
                      n_identifiers=0, complexity=1, n_ast_errors=0,
                      n_ast_levels=1, n_ast_nodes=1, n_words=0,
                      vocab_size=0, language="en")
