"""Tiny total expression language for vector fields and envelope terms.

Grammar (total; parse errors carry position):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom (('^' | '**') integer)?
    atom    := number | variable | 'sin' '(' expr ')' | 'cos' '(' expr ')'
             | '(' expr ')'

Variables are x1..xn. Every node evaluates pointwise and over intervals;
interval division by a zero-crossing denominator raises (no silent widening
to infinity).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class ParseError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class IntervalError(ValueError):
    """Raised when an interval bound cannot be computed soundly."""


def _ivadd(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _ivsub(a, b):
    return (a[0] - b[1], a[1] - b[0])


def _ivmul(a, b):
    c = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return (min(c), max(c))


def _ivdiv(a, b):
    if b[0] <= 0.0 <= b[1]:
        raise IntervalError(f"division by an interval containing zero: {b}")
    return _ivmul(a, (1.0 / b[1], 1.0 / b[0]))


def _ivpow(a, p):
    if p == 0:
        return (1.0, 1.0)
    lo, hi = a[0] ** p, a[1] ** p
    if p % 2 == 0 and a[0] < 0.0 < a[1]:
        return (0.0, max(lo, hi))
    return (min(lo, hi), max(lo, hi))


def _ivsin(a):
    lo, hi = a
    if hi - lo >= 2 * math.pi:
        return (-1.0, 1.0)
    vals = [math.sin(lo), math.sin(hi)]
    # stationary points at pi/2 + m*pi
    m = math.ceil((lo - math.pi / 2) / math.pi)
    while math.pi / 2 + m * math.pi <= hi:
        vals.append(math.sin(math.pi / 2 + m * math.pi))
        m += 1
    return (min(vals), max(vals))


def _ivcos(a):
    return _ivsin((a[0] + math.pi / 2, a[1] + math.pi / 2))


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple

    def eval(self, x):
        op, args = self.op, self.args
        if op == "const":
            return args[0]
        if op == "var":
            return float(x[args[0]])
        if op == "neg":
            return -args[0].eval(x)
        if op == "+":
            return args[0].eval(x) + args[1].eval(x)
        if op == "-":
            return args[0].eval(x) - args[1].eval(x)
        if op == "*":
            return args[0].eval(x) * args[1].eval(x)
        if op == "/":
            return args[0].eval(x) / args[1].eval(x)
        if op == "pow":
            return args[0].eval(x) ** args[1]
        if op == "sin":
            return math.sin(args[0].eval(x))
        if op == "cos":
            return math.cos(args[0].eval(x))
        raise AssertionError(op)

    def eval_batch(self, X):
        """Evaluate over a batch of states (rows of X); returns a length-m array."""
        import numpy as np

        op, args = self.op, self.args
        if op == "const":
            return np.full(X.shape[0], args[0])
        if op == "var":
            return X[:, args[0]]
        if op == "neg":
            return -args[0].eval_batch(X)
        if op in ("+", "-", "*", "/"):
            a = args[0].eval_batch(X)
            b = args[1].eval_batch(X)
            return {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[op](a, b)
        if op == "pow":
            return args[0].eval_batch(X) ** args[1]
        if op == "sin":
            return np.sin(args[0].eval_batch(X))
        if op == "cos":
            return np.cos(args[0].eval_batch(X))
        raise AssertionError(op)

    def interval(self, boxes):
        """Range bound over per-variable intervals [(lo, hi), ...]."""
        op, args = self.op, self.args
        if op == "const":
            return (args[0], args[0])
        if op == "var":
            return tuple(boxes[args[0]])
        if op == "neg":
            a = args[0].interval(boxes)
            return (-a[1], -a[0])
        if op in ("+", "-", "*", "/"):
            a = args[0].interval(boxes)
            b = args[1].interval(boxes)
            return {"+": _ivadd, "-": _ivsub, "*": _ivmul, "/": _ivdiv}[op](a, b)
        if op == "pow":
            return _ivpow(args[0].interval(boxes), args[1])
        if op == "sin":
            return _ivsin(args[0].interval(boxes))
        if op == "cos":
            return _ivcos(args[0].interval(boxes))
        raise AssertionError(op)

    def variables(self):
        op, args = self.op, self.args
        if op == "const":
            return set()
        if op == "var":
            return {args[0]}
        if op == "pow":
            return args[0].variables()
        return set().union(*(a.variables() for a in args if isinstance(a, Node)))

    def __str__(self):
        op, args = self.op, self.args
        if op == "const":
            return repr(args[0])
        if op == "var":
            return f"x{args[0] + 1}"
        if op == "neg":
            return f"(-{args[0]})"
        if op in ("+", "-", "*", "/"):
            return f"({args[0]} {op} {args[1]})"
        if op == "pow":
            return f"({args[0]}^{args[1]})"
        return f"{op}({args[0]})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing token {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.take()
                node = Node(val, (node, self.term()))
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("*", "/"):
                self.take()
                node = Node(val, (node, self.factor()))
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Node("neg", (self.factor(),))
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.take()
            k2, v2, p2 = self.take()
            neg = False
            if k2 == "op" and v2 == "-":
                neg = True
                k2, v2, p2 = self.take()
            if k2 != "num" or v2 != int(v2):
                raise ParseError("exponent must be an integer literal", p2)
            if neg:
                raise ParseError("negative exponents are not supported", p2)
            return Node("pow", (base, int(v2)))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Node("const", (val,))
        if kind == "name":
            if val in ("sin", "cos"):
                self.expect_op("(")
                inner = self.expr()
                self.expect_op(")")
                return Node(val, (inner,))
            m = re.fullmatch(r"x(\d+)", val)
            if not m:
                raise ParseError(f"unknown identifier {val!r}", pos)
            idx = int(m.group(1)) - 1
            if not 0 <= idx < self.dim:
                raise ParseError(f"variable {val} out of range for dimension {self.dim}", pos)
            return Node("var", (idx,))
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(f"unexpected token {val!r}", pos)


def parse_expression(text: str, dim: int) -> Node:
    """Parse one scalar expression over variables x1..x<dim>."""
    return _Parser(text, dim).parse()
