"""Near-duplicate removal and task testbed construction.

Deduplication runs Jaccard similarity over the distinct-BPE-token sets of
each point's original method source (set semantics, not multisets). The scan
is greedy first-wins in stable input order: a point is dropped iff it is
similar (>= threshold) to a point already kept. Cuts are applied after
dedup, on the surviving points.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Sequence

from .features import DataPoint, FeatureVector, is_valid_docstring
from .ingest import sample_to_dict, sample_from_dict
from .pyparse import lexical_tokens
from . import tokenization

TASK_OF_TESTBED = {
    "RawData": "raw",
    "RawDataDocstring": "raw",
    "RandomCut": "code completion",
    "WithDocstring": "code completion",
    "FromDocstring": "code completion",
    "CommitGen": "code generation",
    "SummarizationGen": "summarization",
}

IO_OF_TESTBED = {
    "RawData": "code→code",
    "RawDataDocstring": "code→code",
    "RandomCut": "code→code",
    "WithDocstring": "code+text→code",
    "FromDocstring": "text→code",
    "CommitGen": "code→text",
    "SummarizationGen": "code→text",
}


class TestbedError(Exception):
    pass


@dataclass(frozen=True)
class TestbedPoint:
    """A data point inside a testbed, with task-derived fields when the
    task needs them (cut prefix/suffix for completion testbeds)."""

    point: DataPoint
    cut_prefix: str | None = None
    expected_suffix: str | None = None


@dataclass(frozen=True)
class Testbed:
    name: str
    points: tuple[TestbedPoint, ...]
    seed: int

    def __post_init__(self):
        if self.name not in TASK_OF_TESTBED:
            raise TestbedError(f"unknown testbed name {self.name!r}")

    @property
    def task(self) -> str:
        return TASK_OF_TESTBED[self.name]

    @property
    def io_kind(self) -> str:
        return IO_OF_TESTBED[self.name]

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class DedupReport:
    before: int
    dupes: int
    after: int

    def __post_init__(self):
        if self.after != self.before - self.dupes:
            raise TestbedError("dedup report arithmetic does not close")

    @property
    def rate(self) -> float:
        return self.dupes / self.before if self.before else 0.0


# ---------------------------------------------------------------------------
# Similarity and dedup
# ---------------------------------------------------------------------------

def jaccard_similarity(a: frozenset | set, b: frozenset | set) -> float:
    """|a ∩ b| / |a ∪ b|; two empty sets count as identical (1.0)."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def dedup(points: Sequence, token_sets: Sequence[frozenset],
          threshold: float = 0.7) -> tuple[list, DedupReport]:
    """Greedy first-wins near-duplicate removal at the given threshold.

    ``token_sets[i]`` is the distinct-token set for ``points[i]``. Similarity
    exactly equal to the threshold counts as duplicate.
    """
    if not 0.0 < threshold <= 1.0:
        raise TestbedError(f"threshold must be in (0, 1], got {threshold}")
    if len(points) != len(token_sets):
        raise TestbedError("points and token_sets lengths differ")
    kept: list = []
    kept_sets: list[frozenset] = []
    dupes = 0
    for point, toks in zip(points, token_sets):
        if any(jaccard_similarity(toks, seen) >= threshold
               for seen in kept_sets):
            dupes += 1
            continue
        kept.append(point)
        kept_sets.append(toks)
    return kept, DedupReport(before=len(points), dupes=dupes, after=len(kept))


def sample_points(corpus: Sequence, n: int, seed: int) -> list:
    """Uniform sample without replacement, deterministic under the seed."""
    if n > len(corpus):
        raise TestbedError(f"cannot sample {n} from corpus of {len(corpus)}")
    return random.Random(seed).sample(list(corpus), n)


# ---------------------------------------------------------------------------
# Random cuts
# ---------------------------------------------------------------------------

def cut_eligible(point: DataPoint) -> bool:
    """Methods long enough to cut: more than 10 tokens or 100 characters."""
    return point.features.token_count > 10 or len(point.raw.code) > 100


def build_random_cut(point: DataPoint, seed: int) -> tuple[str, str] | None:
    """Split the method uniformly at a token boundary strictly after the
    signature's closing colon and strictly before the final token.

    Returns (cut_prefix, expected_suffix) with prefix + suffix == code, or
    None when the point is ineligible (too short or no valid boundary).
    """
    if not cut_eligible(point):
        return None
    code = point.raw.code
    offsets = _cut_offsets(code)
    if not offsets:
        return None
    pos = random.Random(seed).choice(offsets)
    return code[:pos], code[pos:]


def _cut_offsets(code: str) -> list[int]:
    toks = lexical_tokens(code)
    colon_idx = _signature_colon(toks)
    if colon_idx is None or colon_idx >= len(toks) - 2:
        return []
    # start offsets of tokens strictly after the colon, strictly before the
    # final token
    return [t.start for t in toks[colon_idx + 1:len(toks) - 1]]


def _signature_colon(toks) -> int | None:
    """Index of the ':' closing the first def header, at bracket depth 0."""
    depth = 0
    seen_def = False
    for i, t in enumerate(toks):
        if t.text == "def" and not seen_def:
            seen_def = True
        elif seen_def:
            if t.text in "([{":
                depth += 1
            elif t.text in ")]}":
                depth -= 1
            elif t.text == ":" and depth == 0:
                return i
    return None


# ---------------------------------------------------------------------------
# Task testbeds
# ---------------------------------------------------------------------------

def _long_enough(text: str | None) -> bool:
    """CommitGen/SummarizationGen target filter: more than 10 words or 50
    characters."""
    if not text:
        return False
    return len(text.split()) > 10 or len(text) > 50


def _dedup_testbed(name: str, candidates: list[TestbedPoint],
                   encode_set: Callable[[str], frozenset], seed: int,
                   threshold: float) -> tuple[Testbed, DedupReport]:
    sets = [encode_set(tp.point.raw.code) for tp in candidates]
    kept, report = dedup(candidates, sets, threshold)
    return Testbed(name=name, points=tuple(kept), seed=seed), report


def build_raw_testbeds(points: Sequence[DataPoint],
                       bpe: tokenization.BpeModel,
                       seed: int = 0,
                       threshold: float = 0.7,
                       ) -> tuple[dict[str, Testbed], dict[str, DedupReport]]:
    """RawData (deduped corpus) and RawDataDocstring (its valid-docstring
    subset) from the validated corpus."""
    tps = [TestbedPoint(dp) for dp in points]
    sets = [tokenization.token_set(bpe, tp.point.raw.code) for tp in tps]
    kept, raw_report = dedup(tps, sets, threshold)
    raw_bed = Testbed(name="RawData", points=tuple(kept), seed=seed)
    # the docstring corpus is the valid-docstring subset of the deduped raw
    # corpus, so it needs no second dedup pass
    doc_points = tuple(tp for tp in kept
                       if is_valid_docstring(tp.point.raw.docstring))
    doc_bed = Testbed(name="RawDataDocstring", points=doc_points, seed=seed)
    return ({"RawData": raw_bed, "RawDataDocstring": doc_bed},
            {"RawData": raw_report})


def derive_task_testbeds(
    raw: Testbed,
    raw_doc: Testbed,
    bpe: tokenization.BpeModel,
    n: int = 3000,
    seed: int = 0,
    threshold: float = 0.7,
) -> tuple[dict[str, Testbed], dict[str, DedupReport]]:
    """Build the five task testbeds from the raw corpora.

    RandomCut samples from ``raw``; the docstring-dependent testbeds sample
    from ``raw_doc`` (every point there must carry a valid docstring). Each
    testbed is deduplicated after construction, on original method source.
    """
    for tp in raw_doc.points:
        if not is_valid_docstring(tp.point.raw.docstring):
            raise TestbedError(
                f"point {tp.point.raw.fun_name!r} in {raw_doc.name} lacks a "
                "valid docstring")

    raw_points = [tp.point for tp in raw.points]
    doc_points = [tp.point for tp in raw_doc.points]

    def encode_set(code: str) -> frozenset:
        return tokenization.token_set(bpe, code)

    testbeds: dict[str, Testbed] = {}
    reports: dict[str, DedupReport] = {}

    def build(name: str, pool: Sequence[DataPoint],
              eligible: Callable[[DataPoint], bool],
              with_cut: bool, sub_seed: int) -> None:
        pool = [dp for dp in pool if eligible(dp)]
        if len(pool) < n:
            raise TestbedError(
                f"testbed {name}: only {len(pool)} eligible points, need {n}")
        chosen = sample_points(pool, n, seed + sub_seed)
        tps: list[TestbedPoint] = []
        for j, dp in enumerate(chosen):
            if with_cut:
                cut = build_random_cut(dp, seed + sub_seed * 1_000_003 + j)
                if cut is None:
                    continue
                tps.append(TestbedPoint(dp, cut_prefix=cut[0],
                                        expected_suffix=cut[1]))
            else:
                tps.append(TestbedPoint(dp))
        bed, report = _dedup_testbed(name, tps, encode_set,
                                     seed + sub_seed, threshold)
        testbeds[name], reports[name] = bed, report

    build("RandomCut", raw_points, cut_eligible, True, 1)
    build("WithDocstring", doc_points, cut_eligible, True, 2)
    build("FromDocstring", doc_points, lambda dp: True, False, 3)
    build("CommitGen", doc_points,
          lambda dp: _long_enough(dp.raw.commit_message), False, 4)
    build("SummarizationGen", doc_points,
          lambda dp: _long_enough(dp.raw.docstring), False, 5)
    return testbeds, reports


# ---------------------------------------------------------------------------
# Serialization (feature-augmented JSONL + testbed keys)
# ---------------------------------------------------------------------------

def point_to_row(dp: DataPoint) -> dict:
    row = sample_to_dict(dp.raw)
    row.update(dp.features.to_dict())
    return row


def point_from_row(row: dict) -> DataPoint:
    feature_keys = set(FeatureVector.__dataclass_fields__)
    sample_row = {k: v for k, v in row.items() if k not in feature_keys}
    features = FeatureVector(**{k: row[k] for k in feature_keys})
    return DataPoint(raw=sample_from_dict(sample_row), features=features)


def testbed_to_rows(bed: Testbed) -> list[dict]:
    rows = []
    for i, tp in enumerate(bed.points):
        row = point_to_row(tp.point)
        row["testbed"] = bed.name
        row["task"] = bed.task
        row["point_id"] = f"{bed.name}-{i:05d}"
        if tp.cut_prefix is not None:
            row["cut_prefix"] = tp.cut_prefix
            row["expected_suffix"] = tp.expected_suffix
        rows.append(row)
    return rows


def testbed_from_rows(rows: Sequence[dict], seed: int = 0) -> Testbed:
    if not rows:
        raise TestbedError("cannot rebuild a testbed from zero rows")
    name = rows[0]["testbed"]
    points = []
    for row in rows:
        row = dict(row)
        cut_prefix = row.pop("cut_prefix", None)
        expected_suffix = row.pop("expected_suffix", None)
        row.pop("testbed", None)
        row.pop("task", None)
        row.pop("point_id", None)
        points.append(TestbedPoint(point_from_row(row),
                                   cut_prefix=cut_prefix,
                                   expected_suffix=expected_suffix))
    return Testbed(name=name, points=tuple(points), seed=seed)
