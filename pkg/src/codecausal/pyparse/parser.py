"""Error-tolerant recursive-descent parser producing a concrete syntax tree.

Conventions (these are load-bearing for the metric suite and must not drift):

* Named nodes are grammar-rule nodes plus the value leaves ``identifier``,
  ``integer``, ``float``, ``string``, ``true``, ``false``, ``none`` and
  ``ellipsis``. Keyword and punctuation leaves are kept in the tree but are
  unnamed.
* ``error`` nodes are named. A region that fails to parse is consumed up to
  the end of its logical line and wrapped in one ``error`` node; stray ERROR
  tokens from the lexer become ``error`` leaves.
* Depth is counted over named nodes with the root at level 1.
"""

from __future__ import annotations

import keyword
from dataclasses import dataclass, field

from .lexer import Token, TokenKind, tokenize

KEYWORD_SET = frozenset(keyword.kwlist)

_NAMED_LEAVES = {"identifier", "integer", "float", "string", "true", "false",
                 "none", "ellipsis"}

_AUG_OPS = {"+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=",
            "|=", "^=", "@="}

_COMPARE_OPS = {"<", ">", "<=", ">=", "==", "!="}


@dataclass
class Node:
    kind: str
    children: list["Node"] = field(default_factory=list)
    token: Token | None = None
    is_named: bool = True
    is_error: bool = False

    # -- tree measurements -------------------------------------------------

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()

    def named_count(self) -> int:
        return sum(1 for n in self.walk() if n.is_named)

    def error_count(self) -> int:
        return sum(1 for n in self.walk() if n.is_error)

    def named_depth(self) -> int:
        """Max root-to-leaf depth over named nodes; a bare leaf is level 1."""
        child_depths = [c.named_depth() for c in self.children if c.is_named]
        own = 1 if self.is_named else 0
        return own + (max(child_depths) if child_depths else 0)

    def first_token(self) -> Token | None:
        if self.token is not None:
            return self.token
        for child in self.children:
            t = child.first_token()
            if t is not None:
                return t
        return None

    def last_token(self) -> Token | None:
        if self.token is not None:
            return self.token
        for child in reversed(self.children):
            t = child.last_token()
            if t is not None:
                return t
        return None

    def text(self, code: str) -> str:
        """Source slice covered by this node's tokens."""
        first, last = self.first_token(), self.last_token()
        if first is None or last is None:
            return ""
        return code[first.start:last.end]

    def find_all(self, kind: str) -> list["Node"]:
        return [n for n in self.walk() if n.kind == kind]

    def sexp(self, include_unnamed: bool = False) -> str:
        """S-expression rendering, used for hand-walked tree oracles."""
        if not self.children:
            if self.kind in ("identifier",) or not self.is_named:
                label = self.kind if self.is_named else repr(self.token.text)
                if self.kind == "identifier":
                    return f"(identifier {self.token.text})"
                return label
            return f"({self.kind})"
        parts = [c.sexp(include_unnamed) for c in self.children
                 if c.is_named or include_unnamed]
        inner = " ".join(p for p in parts if p)
        return f"({self.kind} {inner})" if inner else f"({self.kind})"


def _leaf(tok: Token) -> Node:
    if tok.kind is TokenKind.NAME:
        if tok.text in ("True", "False"):
            kind = tok.text.lower()
        elif tok.text == "None":
            kind = "none"
        elif tok.text in KEYWORD_SET:
            kind = tok.text
        else:
            kind = "identifier"
    elif tok.kind is TokenKind.NUMBER:
        text = tok.text.lower()
        is_float = (("." in text or "e" in text or "j" in text)
                    and not text.startswith(("0x", "0o", "0b")))
        kind = "float" if is_float else "integer"
    elif tok.kind is TokenKind.STRING:
        kind = "string"
    elif tok.kind is TokenKind.ERROR:
        return Node("error", token=tok, is_named=True, is_error=True)
    else:
        kind = tok.text if tok.text == "..." else tok.text
    if tok.text == "...":
        kind = "ellipsis"
    named = kind in _NAMED_LEAVES
    return Node(kind, token=tok, is_named=named)


class _ParseError(Exception):
    pass


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = [t for t in tokens if t.kind is not TokenKind.COMMENT]
        self.pos = 0

    # -- token access --------------------------------------------------------

    def _peek(self, offset: int = 0) -> Token | None:
        j = self.pos + offset
        return self.toks[j] if j < len(self.toks) else None

    def _at(self, text: str) -> bool:
        t = self._peek()
        return t is not None and t.kind in (TokenKind.OP, TokenKind.NAME) \
            and t.text == text

    def _at_kind(self, kind: TokenKind) -> bool:
        t = self._peek()
        return t is not None and t.kind is kind

    def _advance(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def _accept(self, text: str) -> Node | None:
        if self._at(text):
            return _leaf(self._advance())
        return None

    def _expect(self, text: str) -> Node:
        node = self._accept(text)
        if node is None:
            raise _ParseError(f"expected {text!r}")
        return node

    def _skip_newlines(self) -> None:
        while self._at_kind(TokenKind.NEWLINE):
            self._advance()

    # -- entry ----------------------------------------------------------------

    def parse_module(self) -> Node:
        module = Node("module")
        while self._peek() is not None:
            if self._at_kind(TokenKind.NEWLINE):
                self._advance()
                continue
            if self._at_kind(TokenKind.DEDENT):
                self._advance()
                continue
            if self._at_kind(TokenKind.INDENT):
                # stray indentation at top level: parse it as a block but flag it
                err = Node("error", is_error=True)
                self._advance()
                err.children.append(self._statements_until_dedent())
                module.children.append(err)
                continue
            module.children.append(self._statement_with_recovery())
        return module

    # -- statements -------------------------------------------------------------

    def _statement_with_recovery(self) -> Node:
        start = self.pos
        try:
            return self._statement()
        except _ParseError:
            self.pos = start
            return self._recover_line()

    def _recover_line(self) -> Node:
        """Consume to the end of the current logical line into an error node."""
        err = Node("error", is_error=True)
        while self._peek() is not None:
            t = self._peek()
            if t.kind is TokenKind.NEWLINE:
                self._advance()
                break
            if t.kind is TokenKind.DEDENT:
                break
            if t.kind is TokenKind.INDENT:
                self._advance()
                err.children.append(self._statements_until_dedent())
                break
            err.children.append(_leaf(self._advance()))
        return err

    def _statements_until_dedent(self) -> Node:
        block = Node("block")
        while self._peek() is not None and not self._at_kind(TokenKind.DEDENT):
            if self._at_kind(TokenKind.NEWLINE):
                self._advance()
                continue
            if self._at_kind(TokenKind.INDENT):
                err = Node("error", is_error=True)
                self._advance()
                err.children.append(self._statements_until_dedent())
                block.children.append(err)
                continue
            block.children.append(self._statement_with_recovery())
        if self._at_kind(TokenKind.DEDENT):
            self._advance()
        return block

    def _statement(self) -> Node:
        t = self._peek()
        if t is None:
            raise _ParseError("eof")
        if t.kind is TokenKind.NAME:
            handler = {
                "if": self._if_statement,
                "while": self._while_statement,
                "for": self._for_statement,
                "try": self._try_statement,
                "with": self._with_statement,
                "def": self._function_definition,
                "class": self._class_definition,
                "return": self._return_statement,
                "pass": lambda: self._simple_keyword("pass_statement"),
                "break": lambda: self._simple_keyword("break_statement"),
                "continue": lambda: self._simple_keyword("continue_statement"),
                "raise": self._raise_statement,
                "assert": self._assert_statement,
                "import": self._import_statement,
                "from": self._import_from_statement,
                "global": lambda: self._name_list_statement("global_statement"),
                "nonlocal": lambda: self._name_list_statement("nonlocal_statement"),
                "del": self._delete_statement,
                "async": self._async_statement,
                "match": self._match_or_simple,
            }.get(t.text)
            if handler is not None:
                return handler()
        if self._at("@"):
            return self._decorated_definition()
        return self._simple_statement_line()

    def _end_simple(self, node: Node) -> Node:
        # simple statements share a line when separated by ';'
        if self._at(";"):
            self._advance()
            return node
        if self._at_kind(TokenKind.NEWLINE):
            self._advance()
            return node
        t = self._peek()
        if t is None or t.kind is TokenKind.DEDENT:
            return node
        raise _ParseError("trailing tokens after statement")

    def _simple_keyword(self, kind: str) -> Node:
        node = Node(kind, [_leaf(self._advance())])
        return self._end_simple(node)

    def _return_statement(self) -> Node:
        node = Node("return_statement", [_leaf(self._advance())])
        if not self._simple_stmt_boundary():
            node.children.append(self._expression_list())
        return self._end_simple(node)

    def _simple_stmt_boundary(self) -> bool:
        t = self._peek()
        return (t is None or t.kind in (TokenKind.NEWLINE, TokenKind.DEDENT)
                or (t.kind is TokenKind.OP and t.text == ";"))

    def _raise_statement(self) -> Node:
        node = Node("raise_statement", [_leaf(self._advance())])
        if not self._simple_stmt_boundary():
            node.children.append(self._expression())
            if self._at("from"):
                node.children.append(_leaf(self._advance()))
                node.children.append(self._expression())
        return self._end_simple(node)

    def _assert_statement(self) -> Node:
        node = Node("assert_statement", [_leaf(self._advance())])
        node.children.append(self._expression())
        if self._at(","):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._expression())
        return self._end_simple(node)

    def _dotted_name(self) -> Node:
        node = Node("dotted_name", [self._identifier()])
        while self._at("."):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._identifier())
        return node

    def _aliased(self, target: Node) -> Node:
        if self._at("as"):
            alias = Node("aliased_import", [target, _leaf(self._advance()),
                                            self._identifier()])
            return alias
        return target

    def _import_statement(self) -> Node:
        node = Node("import_statement", [_leaf(self._advance())])
        node.children.append(self._aliased(self._dotted_name()))
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._aliased(self._dotted_name()))
        return self._end_simple(node)

    def _import_from_statement(self) -> Node:
        node = Node("import_from_statement", [_leaf(self._advance())])
        while self._at(".") or self._at("..."):
            node.children.append(_leaf(self._advance()))
        if not self._at("import"):
            node.children.append(self._dotted_name())
        node.children.append(self._expect("import"))
        if self._at("*"):
            node.children.append(_leaf(self._advance()))
            return self._end_simple(node)
        parenthesized = self._at("(")
        if parenthesized:
            node.children.append(_leaf(self._advance()))
        node.children.append(self._aliased(self._identifier()))
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if parenthesized and self._at(")"):
                break
            node.children.append(self._aliased(self._identifier()))
        if parenthesized:
            node.children.append(self._expect(")"))
        return self._end_simple(node)

    def _name_list_statement(self, kind: str) -> Node:
        node = Node(kind, [_leaf(self._advance()), self._identifier()])
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._identifier())
        return self._end_simple(node)

    def _delete_statement(self) -> Node:
        node = Node("delete_statement", [_leaf(self._advance()),
                                         self._expression_list()])
        return self._end_simple(node)

    def _simple_statement_line(self) -> Node:
        """Expression statement, assignment or augmented assignment."""
        left = self._expression_list()
        if self._at("="):
            node = Node("assignment", [left, _leaf(self._advance())])
            node.children.append(self._assignment_rhs())
            return self._end_simple(node)
        t = self._peek()
        if t is not None and t.kind is TokenKind.OP and t.text in _AUG_OPS:
            node = Node("augmented_assignment", [left, _leaf(self._advance()),
                                                 self._expression_list()])
            return self._end_simple(node)
        if self._at(":"):
            node = Node("assignment", [left, _leaf(self._advance()),
                                       self._expression()])
            if self._at("="):
                node.children.append(_leaf(self._advance()))
                node.children.append(self._assignment_rhs())
            return self._end_simple(node)
        return self._end_simple(Node("expression_statement", [left]))

    def _assignment_rhs(self) -> Node:
        rhs = self._expression_list()
        if self._at("="):
            node = Node("assignment", [rhs, _leaf(self._advance()),
                                       self._assignment_rhs()])
            return node
        return rhs

    # -- compound statements -----------------------------------------------------

    def _suite(self) -> Node:
        self._expect(":")
        if self._at_kind(TokenKind.NEWLINE):
            self._advance()
            if not self._at_kind(TokenKind.INDENT):
                raise _ParseError("expected indented block")
            self._advance()
            return self._statements_until_dedent()
        block = Node("block")
        block.children.append(self._statement())
        while not self._simple_line_done():
            block.children.append(self._statement())
        return block

    def _simple_line_done(self) -> bool:
        t = self._peek()
        return t is None or t.kind in (TokenKind.NEWLINE, TokenKind.DEDENT) \
            or self.toks[self.pos - 1].kind is TokenKind.NEWLINE

    def _if_statement(self) -> Node:
        node = Node("if_statement", [_leaf(self._advance()),
                                     self._expression()])
        node.children.append(self._suite())
        while self._at("elif"):
            clause = Node("elif_clause", [_leaf(self._advance()),
                                          self._expression()])
            clause.children.append(self._suite())
            node.children.append(clause)
        if self._at("else"):
            node.children.append(self._else_clause())
        return node

    def _else_clause(self) -> Node:
        clause = Node("else_clause", [_leaf(self._advance())])
        clause.children.append(self._suite())
        return clause

    def _while_statement(self) -> Node:
        node = Node("while_statement", [_leaf(self._advance()),
                                        self._expression()])
        node.children.append(self._suite())
        if self._at("else"):
            node.children.append(self._else_clause())
        return node

    def _for_statement(self, async_kw: Node | None = None) -> Node:
        children = [async_kw] if async_kw else []
        children.append(_leaf(self._advance()))
        node = Node("for_statement", children)
        node.children.append(self._target_list())
        node.children.append(self._expect("in"))
        node.children.append(self._expression_list())
        node.children.append(self._suite())
        if self._at("else"):
            node.children.append(self._else_clause())
        return node

    def _try_statement(self) -> Node:
        node = Node("try_statement", [_leaf(self._advance())])
        node.children.append(self._suite())
        saw_handler = False
        while self._at("except"):
            saw_handler = True
            clause = Node("except_clause", [_leaf(self._advance())])
            if self._at("*"):
                clause.children.append(_leaf(self._advance()))
            if not self._at(":"):
                clause.children.append(self._expression())
                if self._at("as"):
                    clause.children.append(_leaf(self._advance()))
                    clause.children.append(self._identifier())
            clause.children.append(self._suite())
            node.children.append(clause)
        if self._at("else"):
            node.children.append(self._else_clause())
        if self._at("finally"):
            clause = Node("finally_clause", [_leaf(self._advance())])
            clause.children.append(self._suite())
            node.children.append(clause)
            saw_handler = True
        if not saw_handler:
            raise _ParseError("try without except/finally")
        return node

    def _with_statement(self, async_kw: Node | None = None) -> Node:
        children = [async_kw] if async_kw else []
        children.append(_leaf(self._advance()))
        node = Node("with_statement", children)
        parenthesized = self._at("(") and self._with_items_parenthesized()
        if parenthesized:
            node.children.append(_leaf(self._advance()))
        node.children.append(self._with_item())
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if parenthesized and self._at(")"):
                break
            node.children.append(self._with_item())
        if parenthesized:
            node.children.append(self._expect(")"))
        node.children.append(self._suite())
        return node

    def _with_items_parenthesized(self) -> bool:
        # distinguish `with (a, b):` tuple-ish item from parenthesized items
        # `with (open(x) as f, open(y) as g):` by scanning for `as` before the
        # matching close paren.
        depth = 0
        j = self.pos
        while j < len(self.toks):
            t = self.toks[j]
            if t.kind is TokenKind.OP:
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    depth -= 1
                    if depth == 0:
                        return False
            elif t.kind is TokenKind.NAME and t.text == "as" and depth == 1:
                return True
            elif t.kind is TokenKind.NEWLINE and depth == 0:
                return False
            j += 1
        return False

    def _with_item(self) -> Node:
        item = Node("with_item", [self._expression()])
        if self._at("as"):
            item.children.append(_leaf(self._advance()))
            item.children.append(self._primary())
        return item

    def _identifier(self) -> Node:
        t = self._peek()
        if t is None or t.kind is not TokenKind.NAME or t.text in KEYWORD_SET:
            raise _ParseError("expected identifier")
        return _leaf(self._advance())

    def _function_definition(self, async_kw: Node | None = None) -> Node:
        children = [async_kw] if async_kw else []
        children.append(_leaf(self._advance()))
        node = Node("function_definition", children)
        node.children.append(self._identifier())
        node.children.append(self._parameters())
        if self._at("->"):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._expression())
        node.children.append(self._suite())
        return node

    def _parameters(self) -> Node:
        node = Node("parameters", [self._expect("(")])
        while not self._at(")"):
            if self._peek() is None:
                raise _ParseError("unterminated parameter list")
            node.children.append(self._parameter())
            if self._at(","):
                node.children.append(_leaf(self._advance()))
            elif not self._at(")"):
                raise _ParseError("expected ',' or ')' in parameters")
        node.children.append(_leaf(self._advance()))
        return node

    def _parameter(self, typed: bool = True) -> Node:
        if self._at("*"):
            star = _leaf(self._advance())
            if self._at(",") or self._at(")") or self._at(":"):
                return Node("keyword_separator", [star])
            return self._annotated_splat("list_splat_pattern", star, typed)
        if self._at("**"):
            return self._annotated_splat("dictionary_splat_pattern",
                                         _leaf(self._advance()), typed)
        if self._at("/"):
            return Node("positional_separator", [_leaf(self._advance())])
        name = self._identifier()
        if typed and self._at(":"):
            node = Node("typed_parameter", [name, _leaf(self._advance()),
                                            self._expression()])
            name = node
        if self._at("="):
            return Node("default_parameter", [name, _leaf(self._advance()),
                                              self._expression()])
        return name

    def _annotated_splat(self, kind: str, star: Node, typed: bool) -> Node:
        node = Node(kind, [star, self._identifier()])
        if typed and self._at(":"):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._expression())
        return node

    def _class_definition(self) -> Node:
        node = Node("class_definition", [_leaf(self._advance()),
                                         self._identifier()])
        if self._at("("):
            node.children.append(self._argument_list())
        node.children.append(self._suite())
        return node

    def _decorated_definition(self) -> Node:
        node = Node("decorated_definition")
        while self._at("@"):
            dec = Node("decorator", [_leaf(self._advance()),
                                     self._expression()])
            node.children.append(dec)
            if self._at_kind(TokenKind.NEWLINE):
                self._advance()
        node.children.append(self._statement())
        return node

    def _async_statement(self) -> Node:
        async_kw = _leaf(self._advance())
        if self._at("def"):
            return self._function_definition(async_kw)
        if self._at("for"):
            return self._for_statement(async_kw)
        if self._at("with"):
            return self._with_statement(async_kw)
        raise _ParseError("async without def/for/with")

    def _match_or_simple(self) -> Node:
        # `match` is a soft keyword: attempt a match statement, fall back to a
        # plain simple statement (e.g. `match = compile(...)`).
        start = self.pos
        try:
            return self._match_statement()
        except _ParseError:
            self.pos = start
            return self._simple_statement_line()

    def _match_statement(self) -> Node:
        node = Node("match_statement", [_leaf(self._advance()),
                                        self._expression_list()])
        self._expect(":")
        if not self._at_kind(TokenKind.NEWLINE):
            raise _ParseError("match body must be a block")
        self._advance()
        if not self._at_kind(TokenKind.INDENT):
            raise _ParseError("expected indented match body")
        self._advance()
        block = Node("block")
        while self._peek() is not None and not self._at_kind(TokenKind.DEDENT):
            if self._at_kind(TokenKind.NEWLINE):
                self._advance()
                continue
            if not self._at("case"):
                raise _ParseError("expected case clause")
            clause = Node("case_clause", [_leaf(self._advance()),
                                          self._case_pattern()])
            if self._at("if"):
                guard = Node("if_clause", [_leaf(self._advance()),
                                           self._or_expr()])
                clause.children.append(guard)
            clause.children.append(self._suite())
            block.children.append(clause)
        if self._at_kind(TokenKind.DEDENT):
            self._advance()
        node.children.append(block)
        return node

    def _case_pattern(self) -> Node:
        """Match patterns look enough like expressions to reuse that grammar;
        ternaries are excluded so a guard's `if` is left alone."""
        first = self._or_expr()
        if self._at("as"):
            first = Node("as_pattern", [first, _leaf(self._advance()),
                                        self._identifier()])
        if not self._at(","):
            return first
        node = Node("tuple", [first])
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if self._at(":") or self._at("if"):
                break
            node.children.append(self._or_expr())
        return node

    # -- expressions ----------------------------------------------------------

    def _expression_list(self) -> Node:
        """One or more comma-separated expressions; >1 becomes a bare tuple."""
        first = self._expression()
        if not self._at(","):
            return first
        node = Node("tuple", [first])
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if self._expression_boundary():
                break
            node.children.append(self._expression())
        return node

    def _target_list(self) -> Node:
        """Assignment/loop targets: primaries (never comparisons, so a
        following ``in`` keyword is left for the enclosing clause)."""
        first = self._target()
        if not self._at(","):
            return first
        node = Node("tuple", [first])
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if self._at("in") or self._expression_boundary():
                break
            node.children.append(self._target())
        return node

    def _target(self) -> Node:
        if self._at("*"):
            return Node("list_splat", [_leaf(self._advance()),
                                       self._primary()])
        return self._primary()

    def _expression_boundary(self) -> bool:
        t = self._peek()
        if t is None or t.kind in (TokenKind.NEWLINE, TokenKind.DEDENT,
                                   TokenKind.INDENT):
            return True
        if t.kind is TokenKind.OP and t.text in (")", "]", "}", ":", ";", "="):
            return True
        if t.kind is TokenKind.NAME and t.text in ("in", "for", "if", "else",
                                                   "as", "from", "import"):
            return True
        return False

    def _expression(self) -> Node:
        if self._at("lambda"):
            return self._lambda()
        if self._at("yield"):
            return self._yield_expression()
        if self._at("*"):
            return Node("list_splat", [_leaf(self._advance()),
                                       self._or_expr()])
        node = self._or_expr()
        if self._at(":="):
            return Node("named_expression", [node, _leaf(self._advance()),
                                             self._expression()])
        if self._at("if"):
            cond = Node("conditional_expression", [node,
                                                   _leaf(self._advance()),
                                                   self._or_expr()])
            cond.children.append(self._expect("else"))
            cond.children.append(self._expression())
            return cond
        return node

    def _lambda(self) -> Node:
        node = Node("lambda", [_leaf(self._advance())])
        if not self._at(":"):
            params = Node("lambda_parameters", [self._parameter(typed=False)])
            while self._at(","):
                params.children.append(_leaf(self._advance()))
                params.children.append(self._parameter(typed=False))
            node.children.append(params)
        node.children.append(self._expect(":"))
        node.children.append(self._expression())
        return node

    def _yield_expression(self) -> Node:
        node = Node("yield_expression", [_leaf(self._advance())])
        if self._at("from"):
            node.children.append(_leaf(self._advance()))
            node.children.append(self._expression())
        elif not self._expression_boundary() and not self._at(","):
            node.children.append(self._expression_list())
        return node

    def _or_expr(self) -> Node:
        node = self._and_expr()
        while self._at("or"):
            node = Node("boolean_operator", [node, _leaf(self._advance()),
                                             self._and_expr()])
        return node

    def _and_expr(self) -> Node:
        node = self._not_expr()
        while self._at("and"):
            node = Node("boolean_operator", [node, _leaf(self._advance()),
                                             self._not_expr()])
        return node

    def _not_expr(self) -> Node:
        if self._at("not"):
            return Node("not_operator", [_leaf(self._advance()),
                                         self._not_expr()])
        return self._comparison()

    def _comparison(self) -> Node:
        node = self._bit_or()
        operands: list[Node] = []
        while True:
            t = self._peek()
            if t is None:
                break
            if t.kind is TokenKind.OP and t.text in _COMPARE_OPS:
                operands.append(_leaf(self._advance()))
            elif t.kind is TokenKind.NAME and t.text == "in":
                operands.append(_leaf(self._advance()))
            elif t.kind is TokenKind.NAME and t.text == "not" \
                    and self._peek(1) is not None and self._peek(1).text == "in":
                operands.append(_leaf(self._advance()))
                operands.append(_leaf(self._advance()))
            elif t.kind is TokenKind.NAME and t.text == "is":
                operands.append(_leaf(self._advance()))
                if self._at("not"):
                    operands.append(_leaf(self._advance()))
            else:
                break
            operands.append(self._bit_or())
        if not operands:
            return node
        return Node("comparison_operator", [node] + operands)

    def _binary_level(self, ops: tuple[str, ...], next_level) -> Node:
        node = next_level()
        while True:
            t = self._peek()
            if t is None or t.kind is not TokenKind.OP or t.text not in ops:
                break
            node = Node("binary_operator", [node, _leaf(self._advance()),
                                            next_level()])
        return node

    def _bit_or(self) -> Node:
        return self._binary_level(("|",), self._bit_xor)

    def _bit_xor(self) -> Node:
        return self._binary_level(("^",), self._bit_and)

    def _bit_and(self) -> Node:
        return self._binary_level(("&",), self._shift)

    def _shift(self) -> Node:
        return self._binary_level(("<<", ">>"), self._arith)

    def _arith(self) -> Node:
        return self._binary_level(("+", "-"), self._term)

    def _term(self) -> Node:
        return self._binary_level(("*", "/", "//", "%", "@"), self._factor)

    def _factor(self) -> Node:
        t = self._peek()
        if t is not None and t.kind is TokenKind.OP and t.text in ("+", "-", "~"):
            return Node("unary_operator", [_leaf(self._advance()),
                                           self._factor()])
        return self._power()

    def _power(self) -> Node:
        node = self._primary()
        if self._at("**"):
            return Node("binary_operator", [node, _leaf(self._advance()),
                                            self._factor()])
        return node

    def _primary(self) -> Node:
        node = self._atom()
        while True:
            if self._at("("):
                node = Node("call", [node, self._argument_list()])
            elif self._at("."):
                node = Node("attribute", [node, _leaf(self._advance()),
                                          self._identifier()])
            elif self._at("["):
                sub = Node("subscript", [node, _leaf(self._advance())])
                sub.children.append(self._subscript_inner())
                sub.children.append(self._expect("]"))
                node = sub
            else:
                return node

    def _subscript_inner(self) -> Node:
        items = [self._slice_item()]
        while self._at(","):
            comma = _leaf(self._advance())
            if self._at("]"):
                items.append(comma)
                break
            items.append(comma)
            items.append(self._slice_item())
        if len(items) == 1:
            return items[0]
        return Node("tuple", items)

    def _slice_item(self) -> Node:
        if self._at(":"):
            return self._slice_tail(None)
        expr = self._expression()
        if self._at(":"):
            return self._slice_tail(expr)
        return expr

    def _slice_tail(self, start: Node | None) -> Node:
        node = Node("slice", [start] if start else [])
        node.children.append(self._expect(":"))
        if not self._at("]") and not self._at(":") and not self._at(","):
            node.children.append(self._expression())
        if self._at(":"):
            node.children.append(_leaf(self._advance()))
            if not self._at("]") and not self._at(","):
                node.children.append(self._expression())
        return node

    def _argument_list(self) -> Node:
        node = Node("argument_list", [self._expect("(")])
        while not self._at(")"):
            if self._peek() is None:
                raise _ParseError("unterminated argument list")
            node.children.append(self._argument())
            if self._at(","):
                node.children.append(_leaf(self._advance()))
            elif not self._at(")"):
                raise _ParseError("expected ',' or ')' in arguments")
        node.children.append(_leaf(self._advance()))
        return node

    def _argument(self) -> Node:
        if self._at("*"):
            return Node("list_splat", [_leaf(self._advance()),
                                       self._expression()])
        if self._at("**"):
            return Node("dictionary_splat", [_leaf(self._advance()),
                                             self._expression()])
        t, nxt = self._peek(), self._peek(1)
        if (t is not None and t.kind is TokenKind.NAME
                and t.text not in KEYWORD_SET
                and nxt is not None and nxt.kind is TokenKind.OP
                and nxt.text == "="):
            return Node("keyword_argument", [self._identifier(),
                                             _leaf(self._advance()),
                                             self._expression()])
        expr = self._expression()
        if self._at("for") or self._at("async"):
            gen = Node("generator_expression", [expr])
            self._comprehension_clauses(gen)
            return gen
        return expr

    def _comprehension_clauses(self, node: Node) -> None:
        while True:
            if self._at("async"):
                async_kw = _leaf(self._advance())
                clause = Node("for_in_clause", [async_kw,
                                                self._expect("for")])
            elif self._at("for"):
                clause = Node("for_in_clause", [_leaf(self._advance())])
            elif self._at("if"):
                node.children.append(Node("if_clause",
                                          [_leaf(self._advance()),
                                           self._or_expr()]))
                continue
            else:
                return
            clause.children.append(self._target_list())
            clause.children.append(self._expect("in"))
            clause.children.append(self._or_expr())
            node.children.append(clause)

    def _atom(self) -> Node:
        t = self._peek()
        if t is None:
            raise _ParseError("unexpected eof in expression")
        if t.kind is TokenKind.ERROR:
            return _leaf(self._advance())
        if t.kind is TokenKind.NAME:
            if t.text == "await":
                return Node("await_expression", [_leaf(self._advance()),
                                                 self._factor()])
            if t.text in ("True", "False", "None"):
                return _leaf(self._advance())
            if t.text == "lambda":
                return self._lambda()
            if t.text in KEYWORD_SET:
                raise _ParseError(f"unexpected keyword {t.text!r}")
            return _leaf(self._advance())
        if t.kind is TokenKind.NUMBER:
            return _leaf(self._advance())
        if t.kind is TokenKind.STRING:
            first = _leaf(self._advance())
            if self._at_kind(TokenKind.STRING):
                node = Node("concatenated_string", [first])
                while self._at_kind(TokenKind.STRING):
                    node.children.append(_leaf(self._advance()))
                return node
            return first
        if t.kind is TokenKind.OP:
            if t.text == "...":
                return _leaf(self._advance())
            if t.text == "(":
                return self._paren_atom()
            if t.text == "[":
                return self._bracket_atom()
            if t.text == "{":
                return self._brace_atom()
        raise _ParseError(f"unexpected token {t.text!r}")

    def _paren_atom(self) -> Node:
        open_tok = _leaf(self._advance())
        if self._at(")"):
            return Node("tuple", [open_tok, _leaf(self._advance())])
        first = self._expression()
        if self._at("for") or self._at("async"):
            node = Node("generator_expression", [open_tok, first])
            self._comprehension_clauses(node)
            node.children.append(self._expect(")"))
            return node
        if self._at(","):
            node = Node("tuple", [open_tok, first])
            while self._at(","):
                node.children.append(_leaf(self._advance()))
                if self._at(")"):
                    break
                node.children.append(self._expression())
            node.children.append(self._expect(")"))
            return node
        node = Node("parenthesized_expression", [open_tok, first,
                                                 self._expect(")")])
        return node

    def _bracket_atom(self) -> Node:
        open_tok = _leaf(self._advance())
        if self._at("]"):
            return Node("list", [open_tok, _leaf(self._advance())])
        first = self._expression()
        if self._at("for") or self._at("async"):
            node = Node("list_comprehension", [open_tok, first])
            self._comprehension_clauses(node)
            node.children.append(self._expect("]"))
            return node
        node = Node("list", [open_tok, first])
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if self._at("]"):
                break
            node.children.append(self._expression())
        node.children.append(self._expect("]"))
        return node

    def _brace_atom(self) -> Node:
        open_tok = _leaf(self._advance())
        if self._at("}"):
            return Node("dictionary", [open_tok, _leaf(self._advance())])
        if self._at("**"):
            first: Node = Node("dictionary_splat", [_leaf(self._advance()),
                                                    self._or_expr()])
            is_dict = True
        else:
            key = self._expression()
            if self._at(":"):
                pair = Node("pair", [key, _leaf(self._advance()),
                                     self._expression()])
                first = pair
                is_dict = True
            else:
                first = key
                is_dict = False
        if self._at("for") or self._at("async"):
            kind = "dictionary_comprehension" if is_dict else "set_comprehension"
            node = Node(kind, [open_tok, first])
            self._comprehension_clauses(node)
            node.children.append(self._expect("}"))
            return node
        node = Node("dictionary" if is_dict else "set", [open_tok, first])
        while self._at(","):
            node.children.append(_leaf(self._advance()))
            if self._at("}"):
                break
            if is_dict:
                if self._at("**"):
                    node.children.append(
                        Node("dictionary_splat", [_leaf(self._advance()),
                                                  self._or_expr()]))
                else:
                    key = self._expression()
                    pair = Node("pair", [key, self._expect(":"),
                                         self._expression()])
                    node.children.append(pair)
            else:
                node.children.append(self._expression())
        node.children.append(self._expect("}"))
        return node


def parse(code: str | bytes) -> Node:
    """Parse ``code`` into a module CST. Never raises on malformed source;
    only non-UTF-8 byte input is rejected."""
    if isinstance(code, bytes):
        code = code.decode("utf-8")  # strict: non-UTF-8 input is an error
    return _Parser(tokenize(code)).parse_module()
