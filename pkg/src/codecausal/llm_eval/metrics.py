"""Outcome metrics for generated code: Levenshtein, BLEU-4 and CodeBLEU.

BLEU operates on the parser's lexical tokens (comments excluded). CodeBLEU
combines plain BLEU, keyword-weighted BLEU, an AST subtree match ratio
(structure only, identifier spellings ignored) and a def-use dataflow match
ratio (name-sensitive), with caller-supplied weights summing to 1.
"""

from __future__ import annotations

import keyword
from collections import Counter
from math import exp, log

from ..pyparse import Node, parse, lexical_tokens

_KEYWORDS = frozenset(keyword.kwlist)
_KEYWORD_WEIGHT = 5.0


class MetricError(Exception):
    pass


# ---------------------------------------------------------------------------
# Levenshtein
# ---------------------------------------------------------------------------

def levenshtein(a: str, b: str) -> tuple[int, float]:
    """(edit distance, similarity). Distance is the minimal number of
    unit-cost character edits; similarity = 1 - distance / max(|a|, |b|),
    and two empty strings are perfectly similar."""
    dist = _levenshtein_distance(a, b)
    longest = max(len(a), len(b))
    similarity = 1.0 if longest == 0 else 1.0 - dist / longest
    return dist, similarity


def _levenshtein_distance(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1,          # delete
                         cur[j - 1] + 1,       # insert
                         prev[j - 1] + (ca != cb))  # substitute
        prev = cur
    return prev[-1]


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def code_tokens(text: str) -> list[str]:
    return [t.text for t in lexical_tokens(text)]


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """BLEU over lexical tokens: geometric mean of modified n-gram
    precisions (n = 1..max_n) times the brevity penalty.

    Smoothing: add-one on zero match counts for n >= 2 only; a candidate
    with zero unigram overlap scores 0.
    """
    return _bleu_tokens(code_tokens(candidate), code_tokens(reference), max_n)


def _bleu_tokens(cand: list[str], ref: list[str], max_n: int = 4,
                 unigram_weights: dict[str, float] | None = None) -> float:
    if not ref:
        raise MetricError("reference must not be empty")
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_grams = _ngrams(cand, n)
        ref_grams = _ngrams(ref, n)
        if n == 1 and unigram_weights is not None:
            matches = sum(min(c, ref_grams.get(g, 0))
                          * unigram_weights.get(g[0], 1.0)
                          for g, c in cand_grams.items())
            possible = sum(c * unigram_weights.get(g[0], 1.0)
                           for g, c in cand_grams.items())
        else:
            matches = sum(min(c, ref_grams.get(g, 0))
                          for g, c in cand_grams.items())
            possible = sum(cand_grams.values())
        if n >= 2 and matches == 0:
            matches, possible = matches + 1, possible + 1
        if matches == 0 or possible == 0:
            return 0.0
        log_sum += log(matches / possible) / max_n
    brevity = 1.0 if len(cand) >= len(ref) else exp(1.0 - len(ref) / len(cand))
    return brevity * exp(log_sum)


def weighted_bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """BLEU variant where Python keyword tokens weigh 5x in the unigram
    precision; higher n-grams are scored as in plain BLEU."""
    weights = {kw: _KEYWORD_WEIGHT for kw in _KEYWORDS}
    return _bleu_tokens(code_tokens(candidate), code_tokens(reference),
                        max_n, unigram_weights=weights)


# ---------------------------------------------------------------------------
# AST subtree match
# ---------------------------------------------------------------------------

def _subtree_signatures(node: Node, acc: Counter) -> tuple:
    children = tuple(_subtree_signatures(c, acc)
                     for c in node.children if c.is_named)
    sig = (node.kind, children)
    acc[sig] += 1
    return sig


def ast_match(candidate: str, reference: str) -> float:
    """Clipped multiset overlap of named-subtree shapes, normalized by the
    reference's subtree count. Leaf values are ignored, so consistent
    renamings leave the score at 1.0."""
    cand_sigs: Counter = Counter()
    ref_sigs: Counter = Counter()
    _subtree_signatures(parse(candidate), cand_sigs)
    _subtree_signatures(parse(reference), ref_sigs)
    total = sum(ref_sigs.values())
    if total == 0:
        return 1.0
    matched = sum(min(c, cand_sigs.get(sig, 0)) for sig, c in ref_sigs.items())
    return matched / total


# ---------------------------------------------------------------------------
# Dataflow (def-use chains)
# ---------------------------------------------------------------------------

class _DefUse:
    """Flow-order def-use walker over one parse tree.

    Edges are (variable name, ordinal of the reaching definition). The walk
    is source-ordered and single-scope: nested def/class bodies are skipped
    (their names count as definitions in the enclosing scope).
    """

    def __init__(self):
        self.def_counts: dict[str, int] = {}
        self.edges: Counter = Counter()

    def define(self, name: str) -> None:
        self.def_counts[name] = self.def_counts.get(name, 0) + 1

    def use(self, name: str) -> None:
        count = self.def_counts.get(name, 0)
        if count > 0:
            self.edges[(name, count - 1)] += 1

    # -- target handling ---------------------------------------------------

    def collect_targets(self, node: Node) -> None:
        if node.kind == "identifier":
            self.define(node.token.text)
        elif node.kind in ("tuple", "list", "parenthesized_expression"):
            for c in node.children:
                if c.is_named:
                    self.collect_targets(c)
        elif node.kind == "list_splat":
            for c in node.children:
                if c.is_named:
                    self.collect_targets(c)
        else:
            # attribute/subscript targets define no variable; their parts
            # are reads
            self.visit(node)

    # -- traversal -----------------------------------------------------------

    def visit_children(self, node: Node) -> None:
        for c in node.children:
            self.visit(c)

    def visit(self, node: Node) -> None:
        handler = getattr(self, f"_visit_{node.kind}", None)
        if handler is not None:
            handler(node)
            return
        if node.kind == "identifier":
            self.use(node.token.text)
            return
        self.visit_children(node)

    def _split_assignment(self, node: Node):
        texts = [c.token.text if c.token else None for c in node.children]
        eq = len(texts) - 1 - texts[::-1].index("=") if "=" in texts else None
        colon = texts.index(":") if ":" in texts else None
        return eq, colon

    def _visit_assignment(self, node: Node) -> None:
        eq, colon = self._split_assignment(node)
        if eq is not None:
            self.visit(node.children[eq + 1])            # RHS first
        if colon is not None:
            self.visit(node.children[colon + 1])         # annotation reads
        if eq is not None or colon is not None:
            self.collect_targets(node.children[0])
        else:
            self.visit_children(node)

    def _visit_augmented_assignment(self, node: Node) -> None:
        self.visit(node.children[-1])
        self.visit(node.children[0])                     # read old value
        self.collect_targets(node.children[0])

    def _visit_named_expression(self, node: Node) -> None:
        self.visit(node.children[-1])
        self.collect_targets(node.children[0])

    def _visit_for_statement(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        # [target, iterable, block, (else)]
        if len(named) >= 2:
            self.visit(named[1])
            self.collect_targets(named[0])
            for extra in named[2:]:
                self.visit(extra)
        else:
            self.visit_children(node)

    def _visit_for_in_clause(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        if len(named) >= 2:
            self.visit(named[1])
            self.collect_targets(named[0])
        else:
            self.visit_children(node)

    def _visit_with_item(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        self.visit(named[0])
        if len(named) > 1:
            self.collect_targets(named[1])

    def _visit_except_clause(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        has_as = any(c.token is not None and c.token.text == "as"
                     for c in node.children)
        binding = named[1] if has_as and len(named) >= 3 else None
        for i, c in enumerate(named):
            if binding is not None and c is binding:
                self.define(c.token.text)
            else:
                self.visit(c)

    def _visit_function_definition(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        if named and named[0].kind == "identifier":
            self.define(named[0].token.text)
        params = next((c for c in node.children if c.kind == "parameters"),
                      None)
        if params is not None:
            self._visit_parameters(params)
        block = next((c for c in node.children if c.kind == "block"), None)
        if block is not None:
            self.visit(block)

    def _visit_parameters(self, node: Node) -> None:
        for c in node.children:
            if c.kind == "identifier":
                self.define(c.token.text)
            elif c.kind in ("typed_parameter", "default_parameter",
                            "list_splat_pattern", "dictionary_splat_pattern"):
                named = [g for g in c.children if g.is_named]
                for g in named:
                    if g.kind == "identifier":
                        self.define(g.token.text)
                        break
                    if g.kind == "typed_parameter":
                        inner = [h for h in g.children if h.kind == "identifier"]
                        if inner:
                            self.define(inner[0].token.text)
                        break
                # defaults and annotations are reads
                for g in named[1:]:
                    self.visit(g)

    def _visit_class_definition(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        if named and named[0].kind == "identifier":
            self.define(named[0].token.text)
        # class bodies are their own scope; skip

    def _visit_lambda(self, node: Node) -> None:
        params = next((c for c in node.children
                       if c.kind == "lambda_parameters"), None)
        if params is not None:
            self._visit_parameters(params)
        body = node.children[-1]
        self.visit(body)

    def _visit_attribute(self, node: Node) -> None:
        self.visit(node.children[0])                     # only the base reads

    def _visit_keyword_argument(self, node: Node) -> None:
        self.visit(node.children[-1])                    # name is not a use

    def _visit_global_statement(self, node: Node) -> None:
        for c in node.children:
            if c.kind == "identifier":
                self.define(c.token.text)

    _visit_nonlocal_statement = _visit_global_statement

    def _visit_aliased_import(self, node: Node) -> None:
        named = [c for c in node.children if c.is_named]
        if named:
            self.collect_targets(named[-1])

    def _visit_import_statement(self, node: Node) -> None:
        for c in node.children:
            if c.kind == "dotted_name":
                ids = [g for g in c.children if g.kind == "identifier"]
                if ids:
                    self.define(ids[0].token.text)
            elif c.kind == "aliased_import":
                self._visit_aliased_import(c)

    _visit_import_from_statement = _visit_import_statement


def dataflow_edges(code: str) -> Counter:
    walker = _DefUse()
    walker.visit(parse(code))
    return walker.edges


def dataflow_match(candidate: str, reference: str) -> float:
    """Clipped multiset overlap of def-use edges, normalized by the
    reference's edge count; name-sensitive by construction. A reference
    without any dataflow scores 1.0 (nothing to miss)."""
    ref_edges = dataflow_edges(reference)
    total = sum(ref_edges.values())
    if total == 0:
        return 1.0
    cand_edges = dataflow_edges(candidate)
    matched = sum(min(c, cand_edges.get(e, 0)) for e, c in ref_edges.items())
    return matched / total


# ---------------------------------------------------------------------------
# CodeBLEU
# ---------------------------------------------------------------------------

def codebleu(candidate: str, reference: str,
             weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25),
             ) -> float:
    """Weighted sum of BLEU, keyword-weighted BLEU, AST match and dataflow
    match. Weights must sum to 1."""
    if abs(sum(weights) - 1.0) > 1e-9:
        raise MetricError(f"weights must sum to 1, got {sum(weights)}")
    w_bleu, w_kw, w_ast, w_df = weights
    score = 0.0
    if w_bleu:
        score += w_bleu * bleu(candidate, reference)
    if w_kw:
        score += w_kw * weighted_bleu(candidate, reference)
    if w_ast:
        score += w_ast * ast_match(candidate, reference)
    if w_df:
        score += w_df * dataflow_match(candidate, reference)
    return score
