"""Tolerant lexer for Python source.

Produces a flat token stream (including INDENT/DEDENT/NEWLINE structure
tokens) from arbitrary text. Unlike the stdlib ``tokenize`` module it never
raises on malformed input: unterminated strings, stray characters and
inconsistent dedents all degrade to ERROR tokens or a recovered indentation
stack instead of an exception.
"""

from __future__ import annotations

import keyword
import re
from dataclasses import dataclass
from enum import Enum


class TokenKind(Enum):
    NAME = "name"
    NUMBER = "number"
    STRING = "string"
    OP = "op"
    COMMENT = "comment"
    NEWLINE = "newline"
    INDENT = "indent"
    DEDENT = "dedent"
    ERROR = "error"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    start: int          # char offset into the source, inclusive
    end: int            # char offset, exclusive
    line: int           # 1-based line of the first char
    end_line: int       # 1-based line of the last char (strings may span lines)

    def __repr__(self) -> str:  # compact, for debugging parse trees
        return f"Token({self.kind.value}, {self.text!r}@{self.start})"


KEYWORDS = frozenset(keyword.kwlist)

# Longest match first.
_OPERATORS = [
    "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==", "->", ":=",
    "**", "//", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "@=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">",
    "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "=",
]

_NAME_RE = re.compile(r"[^\W\d]\w*", re.UNICODE)
_NUMBER_RE = re.compile(
    r"""
    (?:
        0[xX][0-9a-fA-F_]+
      | 0[oO][0-7_]+
      | 0[bB][01_]+
      | (?:\d[\d_]*)?\.\d[\d_]*(?:[eE][+-]?\d[\d_]*)?
      | \d[\d_]*\.(?:\d[\d_]*)?(?:[eE][+-]?\d[\d_]*)?
      | \d[\d_]*(?:[eE][+-]?\d[\d_]*)?
    )
    [jJ]?
    """,
    re.VERBOSE,
)
_STRING_PREFIX_RE = re.compile(r"[rRbBuUfF]{1,3}")

_OPENERS = {"(", "[", "{"}
_CLOSERS = {")", "]", "}"}

_TABSIZE = 8


class _Lexer:
    def __init__(self, code: str):
        self.code = code
        self.n = len(code)
        self.i = 0
        self.line = 1
        self.tokens: list[Token] = []
        self.indents = [0]
        self.depth = 0              # bracket nesting depth
        self.line_has_content = False

    # -- helpers ---------------------------------------------------------

    def _peek(self, offset: int = 0) -> str:
        j = self.i + offset
        return self.code[j] if j < self.n else ""

    def _emit(self, kind: TokenKind, start: int, end: int, start_line: int,
              end_line: int | None = None) -> None:
        self.tokens.append(Token(kind, self.code[start:end], start, end,
                                 start_line, end_line or self.line))

    def _emit_marker(self, kind: TokenKind) -> None:
        self.tokens.append(Token(kind, "", self.i, self.i, self.line, self.line))

    # -- line structure ---------------------------------------------------

    def _handle_indent(self) -> None:
        """Measure leading whitespace and emit INDENT/DEDENT as needed.

        Blank and comment-only lines never affect the indent stack.
        """
        col = 0
        j = self.i
        while j < self.n and self.code[j] in " \t\f":
            if self.code[j] == "\t":
                col = (col // _TABSIZE + 1) * _TABSIZE
            elif self.code[j] == "\f":
                col = 0
            else:
                col += 1
            j += 1
        nxt = self.code[j] if j < self.n else ""
        if nxt in ("", "\n", "\r", "#"):
            return  # blank or comment-only line
        self.i = j
        if col > self.indents[-1]:
            self.indents.append(col)
            self._emit_marker(TokenKind.INDENT)
            return
        while col < self.indents[-1]:
            self.indents.pop()
            self._emit_marker(TokenKind.DEDENT)
        if col > self.indents[-1]:
            # inconsistent dedent; recover by opening a fresh level
            self.indents.append(col)
            self._emit_marker(TokenKind.INDENT)

    def _newline(self) -> None:
        start = self.i
        if self._peek() == "\r" and self._peek(1) == "\n":
            self.i += 2
        else:
            self.i += 1
        if self.depth == 0 and self.line_has_content:
            self._emit(TokenKind.NEWLINE, start, self.i, self.line)
            self.line_has_content = False
        self.line += 1

    # -- compound token scanners -------------------------------------------

    def _read_string(self, start: int, start_line: int) -> None:
        """Scan a string literal whose opening quote is at ``self.i``.

        ``start`` points at the prefix (if any). Unterminated strings become
        ERROR tokens covering the consumed span.
        """
        quote = self.code[self.i]
        triple = self.code[self.i:self.i + 3] == quote * 3
        self.i += 3 if triple else 1
        terminator = quote * 3 if triple else quote
        while self.i < self.n:
            ch = self.code[self.i]
            if ch == "\\" and self.i + 1 < self.n:
                if self.code[self.i + 1] == "\n":
                    self.line += 1
                self.i += 2
                continue
            if self.code.startswith(terminator, self.i):
                self.i += len(terminator)
                self._emit(TokenKind.STRING, start, self.i, start_line)
                return
            if ch == "\n":
                if not triple:
                    # unterminated single-quoted string: stop at EOL
                    self._emit(TokenKind.ERROR, start, self.i, start_line)
                    return
                self.line += 1
            self.i += 1
        self._emit(TokenKind.ERROR, start, self.i, start_line)

    def _read_name_or_prefixed_string(self) -> None:
        start = self.i
        start_line = self.line
        m = _NAME_RE.match(self.code, self.i)
        assert m is not None
        text = m.group()
        end = m.end()
        if (len(text) <= 3 and _STRING_PREFIX_RE.fullmatch(text)
                and end < self.n and self.code[end] in "'\""):
            self.i = end
            self._read_string(start, start_line)
            return
        self.i = end
        self._emit(TokenKind.NAME, start, self.i, start_line)

    # -- main loop ----------------------------------------------------------

    def run(self) -> list[Token]:
        at_line_start = True
        while self.i < self.n:
            if at_line_start:
                if self.depth == 0:
                    self._handle_indent()
                at_line_start = False
                continue
            ch = self._peek()
            if ch in " \t\f":
                self.i += 1
            elif ch == "\\" and self._peek(1) in ("\n", "\r"):
                self.i += 2 if self._peek(1) == "\n" else 1
                if self._peek() == "\n":  # \r\n after backslash
                    self.i += 1
                self.line += 1
            elif ch in "\r\n":
                self._newline()
                at_line_start = True
            elif ch == "#":
                start = self.i
                while self.i < self.n and self.code[self.i] not in "\r\n":
                    self.i += 1
                self._emit(TokenKind.COMMENT, start, self.i, self.line)
            elif ch in "'\"":
                self.line_has_content = True
                self._read_string(self.i, self.line)
            elif _NAME_RE.match(self.code, self.i):
                self.line_has_content = True
                self._read_name_or_prefixed_string()
            elif ch.isdigit() or (ch == "." and self._peek(1).isdigit()):
                self.line_has_content = True
                m = _NUMBER_RE.match(self.code, self.i)
                start = self.i
                self.i = m.end()
                self._emit(TokenKind.NUMBER, start, self.i, self.line)
            else:
                op = next((o for o in _OPERATORS
                           if self.code.startswith(o, self.i)), None)
                self.line_has_content = True
                start = self.i
                if op is None:
                    self.i += 1
                    self._emit(TokenKind.ERROR, start, self.i, self.line)
                else:
                    if op in _OPENERS:
                        self.depth += 1
                    elif op in _CLOSERS:
                        self.depth = max(0, self.depth - 1)
                    self.i += len(op)
                    self._emit(TokenKind.OP, start, self.i, self.line)
        if self.line_has_content:
            self._emit(TokenKind.NEWLINE, self.n, self.n, self.line)
        while len(self.indents) > 1:
            self.indents.pop()
            self._emit_marker(TokenKind.DEDENT)
        return self.tokens


def tokenize(code: str) -> list[Token]:
    """Tokenize ``code`` into a full token stream. Never raises."""
    return _Lexer(code).run()


_LAYOUT = {TokenKind.NEWLINE, TokenKind.INDENT, TokenKind.DEDENT,
           TokenKind.COMMENT}


def lexical_tokens(code: str) -> list[Token]:
    """The lexical tokens of ``code``: names, keywords, numbers, strings and
    operators. Comments and layout (newline/indent/dedent) are excluded."""
    return [t for t in tokenize(code) if t.kind not in _LAYOUT]
