"""Analytic scalar expressions over ``x1..xn, y1..yn`` and their jet evaluation.

Grammar (``^`` and ``**`` are synonyms and bind right-to-left)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"
    VAR    := ("x" | "y") DIGITS          index in 1..n
    FUNC   := "sqrt" | "sin" | "cos" | "exp" | "log"
    NUMBER := decimal literal, optional exponent ("1", "0.5", ".5", "2e-3")
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import jets
from .jets import Jet, JetDomainError


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class IndexOutOfRangeError(ExprError):
    def __init__(self, name: str, n: int, offset: int):
        super().__init__(f"variable {name!r} out of range for dimension {n} at offset {offset}")
        self.name = name
        self.offset = offset


# ----------------------------------------------------------------------
# AST
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Neg, Call, BinOp]


@dataclass(frozen=True)
class ExprAst:
    """A parsed expression together with the dimension it was checked against."""

    root: Node
    n: int
    source: str = field(default="", compare=False)

    def __str__(self) -> str:
        return to_source(self.root)

    def variables(self) -> set[tuple[str, int]]:
        out: set[tuple[str, int]] = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add((node.kind, node.index))
            elif isinstance(node, (Neg, Call)):
                stack.append(node.arg)
            elif isinstance(node, BinOp):
                stack.extend((node.left, node.right))
        return out


def to_source(node: Node) -> str:
    """Fully parenthesised source text; re-parses to an equal tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    return f"({to_source(node.left)}{node.op}{to_source(node.right)})"


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)
_VAR = re.compile(r"([xy])(\d+)$")


def _tokenize(source: str):
    toks = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        text = m.group(kind)
        if kind == "op" and text == "**":
            text = "^"
        toks.append((kind, text, start))
        pos = m.end()
    toks.append(("end", "", len(source)))
    return toks


class _Parser:
    def __init__(self, source: str, n: int):
        self.source = source
        self.n = n
        self.toks = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, t, pos = self.take()
        if t != text or kind != "op":
            what = "end of input" if kind == "end" else repr(t)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, t, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {t!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, t, _ = self.peek()
        if kind == "op" and t in ("-", "+"):
            self.take()
            arg = self.unary()
            return Neg(arg) if t == "-" else arg
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, t, pos = self.take()
        if kind == "num":
            return Const(float(t))
        if kind == "name":
            if t in jets.FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t, arg)
            m = _VAR.match(t)
            if m is None:
                raise UnknownIdentifierError(t, pos)
            idx = int(m.group(2))
            if not 1 <= idx <= self.n:
                raise IndexOutOfRangeError(t, self.n, pos)
            return Var(m.group(1), idx)
        if kind == "op" and t == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(t)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse_expression(source: str, n: int) -> ExprAst:
    """Parse ``source`` as an expression in ``x1..xn, y1..yn``.

    Errors carry the byte offset of the offending token; for input that ends
    early the offset is the length of the source.
    """
    if not isinstance(source, str):
        source = str(source)
    return ExprAst(_Parser(source, n).parse(), n, source)


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class EvalContext:
    """Dimension, jet order and which variables carry seeds.

    ``seeds`` lists variable names (``"x1"``, ``"y2"``, ...) in seed order;
    the default seeds all ``2n`` variables as ``x1..xn, y1..yn``.
    """

    n: int
    order: int = 4
    seeds: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.seeds is None:
            names = tuple(f"x{i}" for i in range(1, self.n + 1)) + tuple(
                f"y{i}" for i in range(1, self.n + 1))
            object.__setattr__(self, "seeds", names)
        if len(set(self.seeds)) != len(self.seeds) or len(self.seeds) > 2 * self.n:
            raise ValueError("seeds must be distinct and at most 2n")

    @property
    def space(self) -> jets.JetSpace:
        return jets.jet_space(len(self.seeds), self.order)

    def variables(self, x: Sequence[float], y: Sequence[float]) -> dict[str, Union[Jet, float]]:
        space = self.space
        values = {f"x{i + 1}": float(v) for i, v in enumerate(x)}
        values.update({f"y{i + 1}": float(v) for i, v in enumerate(y)})
        out: dict[str, Union[Jet, float]] = dict(values)
        for s, name in enumerate(self.seeds):
            out[name] = Jet.variable(s, values[name], space, self.order)
        return out


def _const_jet(v, space, order):
    return Jet.constant(v, space, order)


def evaluate(node: Node, env: dict, space: jets.JetSpace, order: int) -> Jet:
    if isinstance(node, Const):
        return _const_jet(node.value, space, order)
    if isinstance(node, Var):
        v = env[f"{node.kind}{node.index}"]
        return v if isinstance(v, Jet) else _const_jet(v, space, order)
    if isinstance(node, Neg):
        return -evaluate(node.arg, env, space, order)
    if isinstance(node, Call):
        return jets.FUNCTIONS[node.func](evaluate(node.arg, env, space, order))
    left = evaluate(node.left, env, space, order)
    if node.op == "^":
        expo = _constant_value(node.right)
        if expo is None:
            return jets.exp(evaluate(node.right, env, space, order) * jets.log(left))
        if float(expo).is_integer():
            return jets.power(left, expo)
        return jets.exp(expo * jets.log(left))
    right = evaluate(node.right, env, space, order)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    r0 = right.value
    if np.any(np.asarray(r0) == 0):
        raise JetDomainError("division by zero")
    return left / right


def _constant_value(node: Node) -> float | None:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        v = _constant_value(node.arg)
        return None if v is None else -v
    return None


def eval_jet(ast: ExprAst, x: Sequence[float], y: Sequence[float], ctx: EvalContext) -> Jet:
    """Jet of ``ast`` at ``(x, y)`` in the seeds of ``ctx``."""
    if len(x) != ctx.n or len(y) != ctx.n or ast.n != ctx.n:
        raise ValueError("point dimension does not match the evaluation context")
    return evaluate(ast.root, ctx.variables(x, y), ctx.space, ctx.order)


def eval_float(ast: ExprAst, x: Sequence[float], y: Sequence[float]) -> float:
    """Plain real evaluation, independent of the jet machinery."""
    env = {f"x{i + 1}": float(v) for i, v in enumerate(x)}
    env.update({f"y{i + 1}": float(v) for i, v in enumerate(y)})
    return _float(ast.root, env)


_FLOAT_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log}


def _float(node: Node, env: dict) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[f"{node.kind}{node.index}"]
    if isinstance(node, Neg):
        return -_float(node.arg, env)
    if isinstance(node, Call):
        try:
            return _FLOAT_FUNCS[node.func](_float(node.arg, env))
        except ValueError as exc:
            raise JetDomainError(f"{node.func}: {exc}") from None
    a, b = _float(node.left, env), _float(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if b == 0:
            raise JetDomainError("division by zero")
        return a / b
    return a ** b
