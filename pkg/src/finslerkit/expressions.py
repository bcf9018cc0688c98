"""Small expression language for user-defined scalar fields on the chart.

Grammar (integers only as exponents; unary minus accepted as an extension):

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | var | fn '(' expr ')' | '(' expr ')' | '-' base
    var    := 'x'digit+ | 'y'digit+
    fn     := 'sqrt' | 'exp' | 'log' | 'sin' | 'cos'

Parsed trees evaluate on any backend whose values support the arithmetic
operators, so the same tree runs on plain numpy arrays and on jets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import jets

__all__ = ["MetricExpr", "ParseError", "parse_expression"]

_FUNCTIONS = {
    "sqrt": jets.sqrt,
    "exp": jets.exp,
    "log": jets.log,
    "sin": jets.sin,
    "cos": jets.cos,
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    """Syntax or name error in a metric expression, with source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            rest = source[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", pos)
        if m.group("number") is not None:
            tokens.append(_Token("number", m.group(0).strip(), m.start()))
        elif m.group("name") is not None:
            tokens.append(_Token("name", m.group("name"), m.start("name")))
        else:
            tokens.append(_Token("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


# Expression nodes are plain tuples: ("num", v), ("var", block, index),
# ("neg", a), ("+"|"-"|"*"|"/", a, b), ("pow", a, int), ("fn", name, a).


class _Parser:
    def __init__(self, tokens: list[_Token], dim: int, length: int):
        self.tokens = tokens
        self.dim = dim
        self.length = length
        self.i = 0

    def _peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self) -> _Token:
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of expression", self.length)
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self._peek()
        if tok is not None:
            raise ParseError(f"unexpected trailing {tok.text!r}", tok.pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            tok = self._peek()
            if tok is not None and tok.kind == "op" and tok.text in "+-":
                self._next()
                node = (tok.text, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            tok = self._peek()
            if tok is not None and tok.kind == "op" and tok.text in "*/":
                self._next()
                node = (tok.text, node, self.factor())
            else:
                return node

    def factor(self):
        node = self.base()
        tok = self._peek()
        if tok is not None and tok.kind == "op" and tok.text == "^":
            self._next()
            sign = 1
            tok = self._next()
            if tok.kind == "op" and tok.text == "-":
                sign = -1
                tok = self._next()
            if tok.kind != "number" or any(c in tok.text for c in ".eE"):
                raise ParseError("exponent must be an integer", tok.pos)
            node = ("pow", node, sign * int(tok.text))
        return node

    def base(self):
        tok = self._next()
        if tok.kind == "number":
            return ("num", float(tok.text))
        if tok.kind == "op" and tok.text == "-":
            return ("neg", self.base())
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self._expect(")")
            return node
        if tok.kind == "name":
            m = re.fullmatch(r"([xy])(\d+)", tok.text)
            if m:
                idx = int(m.group(2))
                if not 1 <= idx <= self.dim:
                    raise ParseError(
                        f"variable {tok.text!r} out of range for dimension {self.dim}",
                        tok.pos,
                    )
                return ("var", m.group(1), idx - 1)
            if tok.text in _FUNCTIONS:
                self._expect("(")
                node = self.expr()
                self._expect(")")
                return ("fn", tok.text, node)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.pos)
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos)

    def _expect(self, text: str):
        tok = self._next()
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.pos)


def _evaluate(node, xs, ys):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return xs[node[2]] if node[1] == "x" else ys[node[2]]
    if kind == "neg":
        return -_to_operand(_evaluate(node[1], xs, ys))
    if kind == "+":
        return _evaluate(node[1], xs, ys) + _evaluate(node[2], xs, ys)
    if kind == "-":
        return _to_operand(_evaluate(node[1], xs, ys)) - _evaluate(node[2], xs, ys)
    if kind == "*":
        return _evaluate(node[1], xs, ys) * _evaluate(node[2], xs, ys)
    if kind == "/":
        return _to_operand(_evaluate(node[1], xs, ys)) / _evaluate(node[2], xs, ys)
    if kind == "pow":
        return _to_operand(_evaluate(node[1], xs, ys)) ** node[2]
    if kind == "fn":
        return _FUNCTIONS[node[1]](_evaluate(node[2], xs, ys))
    raise AssertionError(f"unhandled node {kind!r}")


def _to_operand(v):
    # bare python floats lack the jet dunders on the left side of - / **
    return v if not isinstance(v, (int, float)) else np.float64(v)


@dataclass(frozen=True)
class MetricExpr:
    """A parsed, closed expression over x1..xn, y1..yn."""

    source: str
    dim: int
    tree: tuple

    def __call__(self, xs, ys):
        """Evaluate on sequences of per-variable values (arrays or jets)."""
        return _evaluate(self.tree, xs, ys)


def parse_expression(source: str, dim: int) -> MetricExpr:
    """Parse ``source`` against the grammar; every name must be a declared
    variable or a known function."""
    tokens = _tokenize(source)
    if not tokens:
        raise ParseError("empty expression", 0)
    tree = _Parser(tokens, dim, len(source)).parse()
    return MetricExpr(source, dim, tree)
