"""Byte-pair-encoding tokenizer and the keyword taxonomy classifier.

The BPE model is byte-level: the base alphabet is the 256 byte values, so
encoding is lossless for any text and decode(encode(text)) == text always
holds. Training is deterministic: on equal pair frequency the
lexicographically smallest pair wins.

Serialized form is a single JSON document ``{"vocab", "merges",
"special_tokens"}`` where token strings are the latin-1 rendering of their
byte sequences (every byte value maps to one code point, so the mapping is
exact and reversible).
"""

from __future__ import annotations

import json
import keyword
import re
from collections import Counter
from dataclasses import dataclass, field

# Pre-tokenization: merges never cross a word/whitespace/punctuation
# boundary, so token sets discriminate between methods instead of being
# dominated by shared single bytes.
_PRETOKEN_RE = re.compile(r"\w+|\s+|[^\w\s]+", re.UNICODE)


class TokenizationError(Exception):
    pass


def _segments(text: str) -> list[bytes]:
    return [seg.encode("utf-8") for seg in _PRETOKEN_RE.findall(text)]


def _b2s(bs: bytes) -> str:
    return bs.decode("latin-1")


def _s2b(s: str) -> bytes:
    return s.encode("latin-1")


@dataclass(frozen=True)
class BpeModel:
    vocab: dict[str, int]                 # latin-1 token string -> id
    merges: list[tuple[str, str]]         # ordered symbol pairs
    special_tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for left, right in self.merges:
            merged = left + right
            if merged in seen:
                raise TokenizationError(f"duplicate merge result {merged!r}")
            seen.add(merged)
            if merged not in self.vocab:
                raise TokenizationError(
                    f"merge result {merged!r} missing from vocabulary")

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "vocab": self.vocab,
            "merges": [[l, r] for l, r in self.merges],
            "special_tokens": self.special_tokens,
        }
        return json.dumps(doc, ensure_ascii=True, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BpeModel":
        doc = json.loads(text)
        return cls(vocab=doc["vocab"],
                   merges=[(l, r) for l, r in doc["merges"]],
                   special_tokens=list(doc.get("special_tokens", [])))

    def id_to_token(self) -> dict[int, str]:
        return {i: t for t, i in self.vocab.items()}


def train_bpe(corpus: list[str], vocab_size: int) -> BpeModel:
    """Learn a byte-level BPE model.

    Deterministic given corpus order and ``vocab_size``; stops early when no
    adjacent pair occurs at least twice (further merges would not compress).
    """
    if not corpus:
        raise TokenizationError("training corpus is empty")
    if vocab_size <= 256:
        raise TokenizationError("vocab_size must exceed the 256-byte alphabet")

    sequences = [[bytes([b]) for b in seg]
                 for doc in corpus for seg in _segments(doc)]
    vocab: dict[str, int] = {_b2s(bytes([i])): i for i in range(256)}
    merges: list[tuple[str, str]] = []

    while len(vocab) < vocab_size:
        counts: Counter[tuple[bytes, bytes]] = Counter()
        for seq in sequences:
            for a, b in zip(seq, seq[1:]):
                counts[(a, b)] += 1
        if not counts:
            break
        best_pair, best_n = None, 0
        for pair, n in counts.items():
            if n > best_n or (n == best_n and (best_pair is None or pair < best_pair)):
                best_pair, best_n = pair, n
        if best_n < 2:
            break
        merged = best_pair[0] + best_pair[1]
        vocab[_b2s(merged)] = len(vocab)
        merges.append((_b2s(best_pair[0]), _b2s(best_pair[1])))
        sequences = [_apply_merge(seq, best_pair, merged) for seq in sequences]

    return BpeModel(vocab=vocab, merges=merges)


def _apply_merge(seq: list[bytes], pair: tuple[bytes, bytes],
                 merged: bytes) -> list[bytes]:
    out = []
    i = 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def encode(model: BpeModel, text: str) -> list[int]:
    """Encode text to token ids; merges apply in training-priority order
    within each pre-token segment."""
    if text == "":
        return []
    ranks = {(_s2b(l), _s2b(r)): k for k, (l, r) in enumerate(model.merges)}
    ids: list[int] = []
    for segment in _segments(text):
        seq = [bytes([b]) for b in segment]
        while len(seq) > 1:
            best_rank, best_i = None, None
            for i, pair in enumerate(zip(seq, seq[1:])):
                rank = ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_i = rank, i
            if best_i is None:
                break
            seq = seq[:best_i] + [seq[best_i] + seq[best_i + 1]] \
                + seq[best_i + 2:]
        ids.extend(model.vocab[_b2s(tok)] for tok in seq)
    return ids


def decode(model: BpeModel, ids: list[int]) -> str:
    table = model.id_to_token()
    data = b"".join(_s2b(table[i]) for i in ids)
    return data.decode("utf-8")


def encode_pieces(model: BpeModel, text: str) -> list[str]:
    """Encoded tokens as text pieces (exact byte spans, latin-1 safe)."""
    table = model.id_to_token()
    return [table[i] for i in encode(model, text)]


def token_set(model: BpeModel, text: str) -> frozenset[int]:
    """Distinct token ids of a text; the unit the dedup similarity runs on."""
    return frozenset(encode(model, text))


# ---------------------------------------------------------------------------
# Token taxonomy
# ---------------------------------------------------------------------------

TAXONOMY_CLASSES = ("blocks", "tests", "oop", "declarations", "exceptions",
                    "datatype", "loops", "operators", "conditionals",
                    "extraTokens")

DEFAULT_TAXONOMY = {
    "exceptions": ["try", "except", "finally", "raise"],
    "conditionals": ["if", "elif", "else"],
    "loops": ["for", "while", "break", "continue"],
    "oop": ["class", "self", "super"],
    "declarations": ["def", "lambda", "import", "from", "as", "global",
                     "nonlocal", "return"],
    "datatype": ["int", "float", "str", "bool", "list", "dict", "set",
                 "tuple"],
    "tests": ["assert"],
    "blocks": ["with", "pass", "yield"],
    "operators": ["and", "or", "not", "in", "is"],
}


@dataclass(frozen=True)
class TaxonomyTable:
    class_of: dict[str, str]

    def __post_init__(self):
        for kw, cls in self.class_of.items():
            if cls not in TAXONOMY_CLASSES:
                raise TokenizationError(f"unknown taxonomy class {cls!r}")

    @classmethod
    def default(cls) -> "TaxonomyTable":
        return cls.from_class_lists(DEFAULT_TAXONOMY)

    @classmethod
    def from_class_lists(cls, lists: dict[str, list[str]]) -> "TaxonomyTable":
        mapping: dict[str, str] = {}
        for klass, words in lists.items():
            for w in words:
                if w in mapping:
                    raise TokenizationError(
                        f"keyword {w!r} mapped to both {mapping[w]!r} and {klass!r}")
                mapping[w] = klass
        return cls(class_of=mapping)

    @classmethod
    def from_json(cls, text: str) -> "TaxonomyTable":
        return cls.from_class_lists(json.loads(text))

    def classify(self, token: str) -> str:
        return self.class_of.get(token.strip(), "extraTokens")


def classify_tokens(tokens: list[str], table: TaxonomyTable | None = None
                    ) -> dict[str, int]:
    """Histogram class -> count over the given token strings.

    Every token lands somewhere (non-keywords fall in ``extraTokens``), so
    the counts always sum to ``len(tokens)``.
    """
    table = table or TaxonomyTable.default()
    hist: dict[str, int] = {}
    for tok in tokens:
        cls = table.classify(tok)
        hist[cls] = hist.get(cls, 0) + 1
    return hist


def python_keywords() -> frozenset[str]:
    return frozenset(keyword.kwlist)
