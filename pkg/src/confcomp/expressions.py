"""Minimal arithmetic expression grammar over chart coordinates.

Grammar (version 1), evaluated with numpy so compiled expressions accept
both single points and batches of points:

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?          right-associative
    atom   := NUMBER | CONSTANT | COORDINATE | FUNCTION '(' expr ')' | '(' expr ')'

    FUNCTION   := exp | ln | abs | sqrt | sin | cos
    CONSTANT   := pi | e
    COORDINATE := x1 .. xn   (1-based, n = chart dimension)

Numbers are ordinary decimal literals, scientific notation allowed.
`^` is exponentiation (numpy power semantics: a negative base with a
fractional exponent yields NaN, which downstream positivity checks reject).
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ExpressionError

GRAMMAR_VERSION = "1"

_FUNCTIONS = {
    "exp": np.exp,
    "ln": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            stray = source[pos:].lstrip()
            if not stray:
                break
            raise ExpressionError(
                f"unexpected character {stray[0]!r} at position {pos}",
                source=source,
                position=pos,
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class Expression:
    """A parsed coordinate expression.

    Calling the expression with an array of shape (dim,) or (..., dim)
    evaluates it pointwise and returns a scalar or an array of shape (...).
    """

    def __init__(self, source: str, dim: int, func, used_coordinates):
        self.source = source
        self.dim = dim
        self._func = func
        self.used_coordinates = frozenset(used_coordinates)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ExpressionError(
                f"expression over {self.dim} coordinates evaluated at a point "
                f"with {x.shape[-1]} components",
                source=self.source,
            )
        out = self._func(x)
        if np.ndim(out) < x.ndim - 1:  # constant expression broadcast
            out = np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()
        if x.ndim == 1:
            return float(out)
        return np.asarray(out, dtype=float)

    def __repr__(self):
        return f"Expression({self.source!r}, dim={self.dim})"


class _Parser:
    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.idx = 0
        self.used = set()

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def fail(self, message):
        _, text, pos = self.peek()
        raise ExpressionError(
            f"{message} (at position {pos}, near {text!r})",
            source=self.source,
            position=pos,
        )

    def parse(self):
        func = self.expr()
        if self.peek()[0] != "end":
            self.fail("trailing input after expression")
        return func

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            right = self.term()
            node = self._binary(op, node, right)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            right = self.unary()
            node = self._binary(op, node, right)
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            inner = self.unary()
            return lambda x, f=inner: -f(x)
        if self.peek()[:2] == ("op", "+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            exponent = self.unary()
            return lambda x, b=base, e=exponent: np.power(b(x), e(x))
        return base

    def atom(self):
        kind, text, _ = self.peek()
        if kind == "number":
            self.advance()
            value = float(text)
            return lambda x, v=value: v
        if kind == "name":
            self.advance()
            if text in _FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    self.fail(f"function {text!r} requires parentheses")
                self.advance()
                inner = self.expr()
                if self.peek()[:2] != ("op", ")"):
                    self.fail("missing closing parenthesis")
                self.advance()
                return lambda x, f=_FUNCTIONS[text], g=inner: f(g(x))
            if text in _CONSTANTS:
                value = _CONSTANTS[text]
                return lambda x, v=value: v
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                index = int(m.group(1))
                if not 1 <= index <= self.dim:
                    self.fail(
                        f"coordinate {text!r} out of range for a "
                        f"{self.dim}-dimensional chart"
                    )
                self.used.add(index)
                return lambda x, i=index - 1: x[..., i]
            self.fail(f"unknown identifier {text!r}")
        if kind == "op" and text == "(":
            self.advance()
            inner = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.fail("missing closing parenthesis")
            self.advance()
            return inner
        self.fail("expected a number, coordinate, function or parenthesis")

    @staticmethod
    def _binary(op, left, right):
        if op == "+":
            return lambda x: left(x) + right(x)
        if op == "-":
            return lambda x: left(x) - right(x)
        if op == "*":
            return lambda x: left(x) * right(x)
        return lambda x: left(x) / right(x)


def parse_expression(source: str, dim: int) -> Expression:
    """Parse `source` into an Expression over an n-dimensional chart."""
    if not isinstance(source, str) or not source.strip():
        raise ExpressionError("empty expression", source=source)
    if dim < 1:
        raise ExpressionError(f"chart dimension must be >= 1, got {dim}")
    parser = _Parser(source, dim)
    func = parser.parse()
    return Expression(source, dim, func, parser.used)
