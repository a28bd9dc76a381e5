"""Repository selection, harvesting and JSONL round-trips."""

from datetime import date, datetime, timezone

import pytest

from codecausal.ingest import (DateWindow, IngestError, RawSample, RepoQuery,
                               export_jsonl, harvest_methods, import_jsonl,
                               select_repositories, validate_sample,
                               RepoSearchClient)

WINDOW = DateWindow(date(2022, 1, 2), date(2023, 1, 1))


def _sample(**overrides):
    base = dict(
        commit_id="a" * 40,
        repository="demo",
        path="pkg/mod.py",
        file_name="mod.py",
        fun_name="f",
        commit_message="add f",
        docstring="Do the useful thing now.",
        code="def f():\n    return 1\n",
        committed_at=datetime(2022, 6, 1, tzinfo=timezone.utc),
    )
    base.update(overrides)
    return RawSample(**base)


# -- repository selection ----------------------------------------------------

CATALOG = [
    {"name": "good", "language": "Python", "fork": False, "size": 45_000,
     "pushed_at": "2022-05-01", "stars": 5_000},
    {"name": "fork", "language": "Python", "fork": True, "size": 45_000,
     "pushed_at": "2022-05-01", "stars": 5_000},
    {"name": "small", "language": "Python", "fork": False, "size": 10,
     "pushed_at": "2022-05-01", "stars": 5_000},
    {"name": "stale", "language": "Python", "fork": False, "size": 45_000,
     "pushed_at": "2020-01-01", "stars": 5_000},
    {"name": "js", "language": "JavaScript", "fork": False, "size": 45_000,
     "pushed_at": "2022-05-01", "stars": 5_000},
    {"name": "edge-stars", "language": "Python", "fork": False,
     "size": 45_000, "pushed_at": "2022-05-01", "stars": 1_000},
]


def test_default_query_keeps_only_the_matching_repo():
    got = select_repositories(RepoQuery(), CATALOG)
    assert [r["name"] for r in got] == ["good"]


def test_empty_catalog_gives_empty_result():
    assert select_repositories(RepoQuery(), []) == []


def test_star_floor_is_strict():
    got = select_repositories(RepoQuery(), CATALOG)
    assert all(r["name"] != "edge-stars" for r in got)


def test_selection_preserves_input_order():
    catalog = [dict(CATALOG[0], name=f"r{i}") for i in range(5)]
    got = select_repositories(RepoQuery(), catalog)
    assert [r["name"] for r in got] == [f"r{i}" for i in range(5)]


def test_window_requires_ordered_dates():
    with pytest.raises(ValueError):
        DateWindow(date(2023, 1, 1), date(2022, 1, 1))


# -- harvesting ----------------------------------------------------------------

def test_harvest_skips_commits_outside_window(fixture_repo):
    samples = harvest_methods(fixture_repo, WINDOW)
    assert all("ancient" != s.fun_name for s in samples)


def test_harvest_one_sample_per_added_method(fixture_repo):
    samples = harvest_methods(fixture_repo, WINDOW)
    added = [s for s in samples if s.commit_message == "add pair of helpers"]
    assert sorted(s.fun_name for s in added) == ["first", "second"]
    assert len({s.commit_id for s in added}) == 1


def test_harvest_diff_walk_oracle(fixture_repo):
    """Expected sample set derived by hand from the 3-commit fixture:
    commit 2 adds `first` and `second`; commit 3 only changes the body of
    `first` (a trailing comment), so exactly `first` reappears and its
    docstring is unchanged."""
    samples = harvest_methods(fixture_repo, WINDOW)
    key = [(s.commit_message, s.fun_name) for s in samples]
    assert key == [
        ("add pair of helpers", "first"),
        ("add pair of helpers", "second"),
        ("comment the identity", "first"),
    ]
    commented = samples[2]
    assert commented.docstring == "Return the input unchanged for now."
    assert "# identity" in commented.code


def test_harvest_window_soundness(fixture_repo):
    for s in harvest_methods(fixture_repo, WINDOW):
        assert WINDOW.contains(s.committed_at)


def test_harvest_is_deterministic(fixture_repo):
    first = harvest_methods(fixture_repo, WINDOW)
    second = harvest_methods(fixture_repo, WINDOW)
    assert first == second


def test_harvest_unreadable_repo_raises(tmp_path):
    with pytest.raises(IngestError, match="unreadable"):
        harvest_methods(str(tmp_path / "nope"), WINDOW)


# -- validation -----------------------------------------------------------------

def test_validate_in_window_with_docstring_passes():
    rep = validate_sample(_sample(docstring="does the thing for inputs"),
                          WINDOW)
    assert rep.passed and rep.reasons == ()


def test_validate_out_of_window_fails():
    rep = validate_sample(
        _sample(committed_at=datetime(2023, 2, 1, tzinfo=timezone.utc)),
        WINDOW)
    assert not rep.passed
    assert "outside window" in rep.reasons


def test_validate_short_docstring_fails_with_named_rule():
    rep = validate_sample(_sample(docstring="fix bug"), WINDOW)
    assert not rep.passed
    assert "docstring not larger than 3 words" in rep.reasons


def test_validate_lists_every_violation():
    rep = validate_sample(
        _sample(docstring="st",
                committed_at=datetime(2024, 1, 1, tzinfo=timezone.utc)),
        WINDOW)
    assert len(rep.reasons) == 2


def test_absent_docstring_is_not_a_violation():
    assert validate_sample(_sample(docstring=None), WINDOW).passed


# -- jsonl -----------------------------------------------------------------------

def test_jsonl_round_trip_empty():
    assert import_jsonl(export_jsonl([])) == []


def test_jsonl_round_trip_three_samples():
    samples = [_sample(fun_name=f"f{i}") for i in range(3)]
    stream = export_jsonl(samples)
    assert stream.count(b"\n") == 3
    assert import_jsonl(stream) == samples


def test_jsonl_preserves_unknown_keys():
    s = _sample(extras={"stars": 7, "note": "kept"})
    back = import_jsonl(export_jsonl([s]))[0]
    assert back.extras == {"stars": 7, "note": "kept"}


def test_jsonl_truncated_line_errors_with_line_number():
    with pytest.raises(IngestError, match="line 1"):
        import_jsonl(b'{"commit_id": "abc"')


def test_jsonl_missing_field_is_named():
    with pytest.raises(IngestError, match="fun_name"):
        import_jsonl(b'{"commit_id": "' + b"a" * 40 +
                     b'", "repo": "r", "path": "p", "file_name": "f"}')


def test_sample_rejects_empty_code():
    with pytest.raises(ValueError):
        _sample(code="")


def test_sample_rejects_bad_commit_hash():
    with pytest.raises(ValueError):
        _sample(commit_id="xyz")


# -- search client -----------------------------------------------------------------

def test_search_client_caches_responses(tmp_path):
    calls = []

    def transport(url, params):
        calls.append(params)
        return [{"name": "hit", "language": "Python"}]

    client = RepoSearchClient("https://example.test/search",
                              str(tmp_path / "cache"), transport=transport)
    q = RepoQuery()
    first = client.search(q)
    second = client.search(q)
    assert first == second == [{"name": "hit", "language": "Python"}]
    assert len(calls) == 1  # second hit served from disk
