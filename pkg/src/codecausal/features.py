"""Feature extraction for Python method source.

Computes the syntactic, software-metric and documentation features attached
to every data point. All functions are pure and idempotent: the same source
always yields the same feature vector.

Counting conventions (fixed so oracle tests are possible):

* ``n_ast_nodes``   — named CST nodes (rule nodes plus value leaves).
* ``n_ast_levels``  — max root-to-leaf depth over named nodes, root = 1.
* ``n_ast_errors``  — error nodes in the tolerant parse.
* ``token_count``   — lexical tokens (names, keywords, numbers, strings,
  operators), comments excluded.
* ``n_whitespaces`` — whitespace characters: space, tab, newline.
* ``nloc``          — lines carrying at least one non-comment token.
* ``complexity``    — 1 + decision keywords {if, elif, while, for, except,
  assert, and, or}; the token-level rule so conditional expressions and
  comprehension clauses are covered.
* ``n_identifiers`` — distinct non-keyword name spellings.
"""

from __future__ import annotations

import keyword
from dataclasses import dataclass, asdict
from typing import TYPE_CHECKING

from .pyparse import Node, parse, lexical_tokens
from .pyparse.lexer import TokenKind

if TYPE_CHECKING:
    from .ingest import RawSample

DECISION_KEYWORDS = frozenset(
    {"if", "elif", "while", "for", "except", "assert", "and", "or"})

_KEYWORDS = frozenset(keyword.kwlist)


@dataclass(frozen=True)
class FeatureVector:
    n_whitespaces: int
    nloc: int
    token_count: int
    n_identifiers: int
    complexity: int
    n_ast_errors: int
    n_ast_levels: int
    n_ast_nodes: int
    n_words: int
    vocab_size: int
    language: str

    def to_dict(self) -> dict:
        return asdict(self)

    def __post_init__(self):
        if min(self.n_whitespaces, self.nloc, self.token_count,
               self.n_identifiers, self.n_ast_errors, self.n_ast_levels,
               self.n_ast_nodes, self.n_words, self.vocab_size) < 0:
            raise ValueError("feature counts must be non-negative")
        if self.complexity < 1:
            raise ValueError("complexity is at least 1")


def parse_method(code: str | bytes) -> tuple[Node, int]:
    """Parse method source into a CST, tolerating syntax errors.

    Returns the tree and the number of error nodes. Only non-UTF-8 byte
    input raises.
    """
    tree = parse(code)
    return tree, tree.error_count()


def compute_syntactic_features(tree: Node, code: str) -> tuple[int, int, int, int, int]:
    """(n_ast_nodes, n_ast_levels, n_ast_errors, token_count, n_whitespaces)."""
    n_ast_nodes = tree.named_count()
    n_ast_levels = tree.named_depth()
    n_ast_errors = tree.error_count()
    token_count = len(lexical_tokens(code))
    n_whitespaces = sum(code.count(ch) for ch in (" ", "\t", "\n"))
    return n_ast_nodes, n_ast_levels, n_ast_errors, token_count, n_whitespaces


def compute_software_metrics(tree: Node, code: str) -> tuple[int, int, int]:
    """(nloc, complexity, n_identifiers)."""
    toks = lexical_tokens(code)
    lines: set[int] = set()
    for t in toks:
        lines.update(range(t.line, t.end_line + 1))
    nloc = len(lines)

    complexity = 1 + sum(1 for t in toks
                         if t.kind is TokenKind.NAME
                         and t.text in DECISION_KEYWORDS)
    identifiers = {t.text for t in toks
                   if t.kind is TokenKind.NAME and t.text not in _KEYWORDS}
    return nloc, complexity, len(identifiers)


def extract_docstring_features(docstring: str | None) -> tuple[int, int, str]:
    """(n_words, vocab_size, language) of a docstring; (0, 0, "en") if absent."""
    if not docstring:
        return 0, 0, "en"
    words = docstring.split()
    vocab = {w.lower() for w in words}
    return len(words), len(vocab), detect_language(docstring)


def is_valid_docstring(docstring: str | None) -> bool:
    """A docstring counts as valid only when it has more than 3 words."""
    if not docstring:
        return False
    return len(docstring.split()) > 3


# Tiny trigram/stopword profiles; best effort only, feeds a descriptive
# column and never a filter.
_LANG_MARKERS = {
    "en": {"the", "and", "for", "with", "this", "that", "from", "are", "was",
           "not", "all", "can", "will", "has", "have", "its", "when", "each"},
    "es": {"el", "la", "los", "las", "que", "para", "con", "una", "del",
           "por", "este", "esta", "como", "más", "pero"},
    "fr": {"le", "la", "les", "des", "une", "est", "pour", "dans", "qui",
           "avec", "pas", "sur", "par", "cette"},
    "de": {"der", "die", "das", "und", "ist", "für", "mit", "ein", "eine",
           "nicht", "auch", "auf", "wird", "sind"},
    "pt": {"de", "não", "uma", "para", "com", "por", "mais", "como", "mas",
           "foi", "ser", "são", "também"},
}


def detect_language(text: str) -> str:
    words = [w.strip(".,;:!?()[]'\"").lower() for w in text.split()]
    best, best_hits = "en", 0
    for lang, markers in _LANG_MARKERS.items():
        hits = sum(1 for w in words if w in markers)
        if hits > best_hits:
            best, best_hits = lang, hits
    return best


def compute_features(code: str, docstring: str | None = None) -> FeatureVector:
    """Full feature vector for one method."""
    tree, _ = parse_method(code)
    n_ast_nodes, n_ast_levels, n_ast_errors, token_count, n_whitespaces = \
        compute_syntactic_features(tree, code)
    nloc, complexity, n_identifiers = compute_software_metrics(tree, code)
    n_words, vocab_size, language = extract_docstring_features(docstring)
    return FeatureVector(
        n_whitespaces=n_whitespaces,
        nloc=nloc,
        token_count=token_count,
        n_identifiers=n_identifiers,
        complexity=complexity,
        n_ast_errors=n_ast_errors,
        n_ast_levels=n_ast_levels,
        n_ast_nodes=n_ast_nodes,
        n_words=n_words,
        vocab_size=vocab_size,
        language=language,
    )


@dataclass(frozen=True)
class DataPoint:
    """One method with its feature vector attached."""

    raw: "RawSample"
    features: FeatureVector

    @classmethod
    def from_sample(cls, sample: "RawSample") -> "DataPoint":
        return cls(raw=sample,
                   features=compute_features(sample.code, sample.docstring))
