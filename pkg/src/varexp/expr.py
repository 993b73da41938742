"""A small arithmetic expression language for coefficient and exponent functions.

Grammar (``^`` binds tightest and associates to the right, then unary minus,
then ``* /``, then ``+ -``)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?
    exponent := '-' exponent | power
    atom     := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are variables from the slot's scope (``x1``, ``x2``, ``t``), the
constant ``pi``, or one of the functions sin, cos, exp, ln, abs, min, max.
Evaluation is vectorised over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "EvaluationError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "parse_expr",
    "to_source",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "ln": 1, "abs": 1, "min": -2, "max": -2}
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, msg, offset):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name, offset, scope):
        ExprError.__init__(self, f"unknown identifier {name!r} at offset {offset} (allowed: {', '.join(sorted(scope))})")
        self.name = name
        self.offset = offset


class EvaluationError(ExprError):
    """Raised for ln of a nonpositive value, 0 to a negative power and non-real powers."""

    def __init__(self, kind, msg):
        super().__init__(msg)
        self.kind = kind


# ----------------------------------------------------------------------------
# AST


class Node:
    def evaluate(self, env):
        raise NotImplementedError

    def variables(self) -> set[str]:
        return set()

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Num(Node):
    value: float

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True)
class Var(Node):
    name: str

    def evaluate(self, env):
        return env[self.name]

    def variables(self):
        return {self.name}


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def variables(self):
        return self.arg.variables()


def _power(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any((a == 0) & (b < 0)):
        raise EvaluationError("zero-negative-power", "0 raised to a negative power")
    if np.any((a < 0) & (b != np.round(b))):
        raise EvaluationError("non-real-power", "negative base raised to a non-integer power")
    with np.errstate(over="ignore"):
        return a**b


def _ln(a):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise EvaluationError("ln-domain", "ln of a nonpositive value")
    return np.log(a)


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": _power,
}

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": _ln,
    "abs": np.abs,
}


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env):
        a, b = self.left.evaluate(env), self.right.evaluate(env)
        if self.op == "/" and np.any(np.asarray(b) == 0):
            raise EvaluationError("division-by-zero", "division by zero")
        return _BINARY[self.op](a, b)

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple

    def evaluate(self, env):
        vals = [a.evaluate(env) for a in self.args]
        if self.name == "min":
            return np.minimum.reduce(np.broadcast_arrays(*vals))
        if self.name == "max":
            return np.maximum.reduce(np.broadcast_arrays(*vals))
        return _FUNCS[self.name](vals[0])

    def variables(self):
        out = set()
        for a in self.args:
            out |= a.variables()
        return out


# ----------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


class _Parser:
    def __init__(self, src: str, scope):
        self.src = src
        self.scope = frozenset(scope)
        self.toks = self._lex(src)
        self.i = 0

    def _offset(self, char_index):
        return len(self.src[:char_index].encode("utf-8"))

    def _lex(self, src):
        toks, pos = [], 0
        while pos < len(src):
            m = _TOKEN.match(src, pos)
            if m is None:
                raise ExprSyntaxError(f"unexpected character {src[pos]!r}", self._offset(pos))
            kind = m.lastgroup
            if kind != "ws":
                toks.append((kind, m.group(), self._offset(pos)))
            pos = m.end()
        toks.append(("end", "", self._offset(len(src))))
        return toks

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, off = self.take()
        if val != text or kind == "end":
            raise ExprSyntaxError(f"expected {text!r}" + (f", found {val!r}" if val else " before end of input"), off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.exponent())
        return base

    def exponent(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.exponent())
        return self.power()

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            v = float(val)
            if not math.isfinite(v):
                raise ExprSyntaxError(f"number {val!r} out of range", off)
            return Num(v)
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownIdentifierError(val, off, set(FUNCTIONS))
                return self.call(val, off)
            if val in CONSTANTS:
                return Num(CONSTANTS[val])
            if val not in self.scope:
                raise UnknownIdentifierError(val, off, self.scope | set(CONSTANTS))
            return Var(val)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected {val!r}", off)

    def call(self, name, off):
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name]
        if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
            need = str(arity) if arity > 0 else f"at least {-arity}"
            raise ExprSyntaxError(f"{name} takes {need} argument(s), got {len(args)}", off)
        return Call(name, tuple(args))


def parse_expr(src: str, variables=("x1", "x2", "t")) -> Node:
    """Parse ``src``; identifiers outside ``variables`` are rejected."""
    return _Parser(src, variables).parse()


# ----------------------------------------------------------------------------
# printer

def _prec(node) -> int:
    if isinstance(node, BinOp):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def to_source(node: Node) -> str:
    """Canonical text that parses back to an identical AST."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        return "-" + (f"({inner})" if _prec(node.arg) < 3 else inner)
    if isinstance(node, BinOp):
        p = _prec(node)
        left, right = to_source(node.left), to_source(node.right)
        if node.op == "^":
            left_paren = _prec(node.left) <= 4
            right_paren = _prec(node.right) < 3
        else:
            left_paren = _prec(node.left) < p
            right_paren = _prec(node.right) <= p
        if left_paren:
            left = f"({left})"
        if right_paren:
            right = f"({right})"
        sep = "^" if node.op == "^" else f" {node.op} "
        return f"{left}{sep}{right}"
    raise TypeError(f"not an expression node: {node!r}")
