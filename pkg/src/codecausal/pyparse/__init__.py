"""Error-tolerant lexing and parsing for Python method source.

The lexer never raises on malformed input; the parser always returns a
concrete syntax tree, wrapping unparseable regions in ``error`` nodes.
"""

from .lexer import Token, TokenKind, tokenize, lexical_tokens
from .parser import Node, parse

__all__ = [
    "Token",
    "TokenKind",
    "tokenize",
    "lexical_tokens",
    "Node",
    "parse",
]
