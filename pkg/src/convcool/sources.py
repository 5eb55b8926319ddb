"""Heat-source catalog and a small arithmetic expression language for custom sources.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 'y' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'sin' | 'cos' | 'exp'
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import SourceTerm


class ExpressionError(ValueError):
    """Syntax error in a source expression; ``pos`` is the character offset."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

Node = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _tokenize(text: str):
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        num, name, op = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            tokens.append(("num", float(num), start))
        elif name is not None:
            tokens.append(("name", name, start))
        else:
            if op not in "+-*/^()":
                raise ExpressionError(f"unexpected character {op!r}", start)
            tokens.append(("op", op, start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            lhs, rhs = node, self.term()
            node = (lambda a, b: lambda x, y: a(x, y) + b(x, y))(lhs, rhs) if op == "+" else \
                (lambda a, b: lambda x, y: a(x, y) - b(x, y))(lhs, rhs)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            lhs, rhs = node, self.unary()
            node = (lambda a, b: lambda x, y: a(x, y) * b(x, y))(lhs, rhs) if op == "*" else \
                (lambda a, b: lambda x, y: a(x, y) / b(x, y))(lhs, rhs)
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            inner = self.unary()
            return inner if val == "+" else (lambda a: lambda x, y: -a(x, y))(inner)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            exponent = self.unary()
            return (lambda a, b: lambda x, y: a(x, y) ** b(x, y))(base, exponent)
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return lambda x, y, c=val: np.full(np.shape(x), c)
        if kind == "name":
            if val == "x":
                return lambda x, y: np.asarray(x, dtype=float)
            if val == "y":
                return lambda x, y: np.asarray(y, dtype=float)
            if val == "pi":
                return lambda x, y: np.full(np.shape(x), np.pi)
            if val in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return (lambda fn, a: lambda x, y: fn(a(x, y)))(_FUNCS[val], arg)
            raise ExpressionError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExpressionError("unexpected end of expression", pos)
        raise ExpressionError(f"unexpected {val!r}", pos)


def parse_expression(text: str) -> Node:
    """Compile ``text`` into a vectorized function of ``(x, y)``."""
    if not text or not text.strip():
        raise ExpressionError("empty expression", 0)
    return _Parser(text).parse()


def source_from_expression(text: str, tag: str | None = None) -> SourceTerm:
    return SourceTerm(tag or text.strip(), parse_expression(text))


@dataclass(frozen=True)
class Example:
    number: int
    expression: str
    description: str

    def source(self) -> SourceTerm:
        return source_from_expression(self.expression, tag=f"example{self.number}")


EXAMPLES = {
    1: Example(1, "2*pi^2*sin(pi*x)*sin(pi*y)", "symmetric sine source"),
    2: Example(2, "1000*((x-0.5)^2 + (y-0.75)^2)*x*(1-x)*y*(1-y)", "asymmetric polynomial source"),
    3: Example(3, "100*exp(-100*(x-0.75)^2 - 100*(y-0.75)^2)", "Gaussian source near the upper right corner"),
    4: Example(4, "75*exp(-(9*x-2)^2/4 - (9*y-2)^2/4) - 75*exp(-(9*x-4)^2/4 - (9*y-7)^2/4)",
               "source and sink"),
}


def example_source(number: int) -> SourceTerm:
    if number not in EXAMPLES:
        raise ValueError(f"unknown example {number!r}; choose from {sorted(EXAMPLES)}")
    return EXAMPLES[number].source()
