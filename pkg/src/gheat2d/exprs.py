"""A minimal expression language for stating payoffs and problem data on the
command line: numbers, the variables x, y, t, arithmetic, integer powers and
the functions sin, cos, exp.

Precedence is ^ over unary minus over * / over + -, binaries associate left,
^ applies once (its exponent must be a possibly signed integer literal, which
keeps evaluation total on negative bases). Parsed trees survive
``parse_expression(to_source(e))`` unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EvaluationError, ExpressionError

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expression",
    "parse_expression",
    "to_source",
    "evaluate",
    "variables",
]

_VARS = ("x", "y", "t")
_FUNCS = ("sin", "cos", "exp")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class _Token:
    kind: str  # NUM, IDENT, OP, END
    text: str
    offset: int


def _tokenize(src: str) -> list[_Token]:
    toks = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in "+-*/^()":
            toks.append(_Token("OP", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == ".":
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            toks.append(_Token("NUM", src[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Token("IDENT", src[i:j], i))
            i = j
            continue
        raise ExpressionError(f"unexpected character {ch!r}", offset=i,
                              expected=("number", "identifier", "operator"))
    toks.append(_Token("END", "", n))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def take(self) -> _Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == op:
            self.pos += 1
            return
        raise ExpressionError(f"expected {op!r}", offset=tok.offset, expected=(op,))

    def expr(self) -> Expression:
        node = self.term()
        while self.peek().kind == "OP" and self.peek().text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.peek().kind == "OP" and self.peek().text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            self.pos += 1
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "^":
            self.pos += 1
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        sign = 1
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "-":
            sign = -1
            self.pos += 1
            tok = self.peek()
        if tok.kind != "NUM" or not tok.text.isdigit():
            raise ExpressionError(
                "power needs an integer literal exponent",
                offset=tok.offset,
                expected=("integer",),
            )
        self.pos += 1
        return sign * int(tok.text)

    def atom(self) -> Expression:
        tok = self.take()
        if tok.kind == "NUM":
            return Num(float(tok.text))
        if tok.kind == "IDENT":
            if tok.text in _VARS:
                return Var(tok.text)
            if tok.text in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(tok.text, arg)
            raise ExpressionError(
                f"unknown identifier {tok.text!r}",
                offset=tok.offset,
                expected=_VARS + _FUNCS,
            )
        if tok.kind == "OP" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(
            f"expected a value, got {tok.text or 'end of input'!r}",
            offset=tok.offset,
            expected=("number", "variable", "function", "("),
        )


def parse_expression(src: str) -> Expression:
    p = _Parser(src)
    node = p.expr()
    tok = p.peek()
    if tok.kind != "END":
        raise ExpressionError(
            f"unexpected trailing input {tok.text!r}",
            offset=tok.offset,
            expected=("+", "-", "*", "/", "end of input"),
        )
    return node


_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node: Expression) -> int:
    if isinstance(node, BinOp):
        return _PREC_ADD if node.op in "+-" else _PREC_MUL
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, Pow):
        return _PREC_POW
    return _PREC_ATOM


def to_source(node: Expression) -> str:
    """Render with the fewest parentheses that reparse to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _PREC_NEG)
    if isinstance(node, Pow):
        return _wrap(node.base, _PREC_ATOM) + "^" + str(node.exponent)
    left = _wrap(node.left, _prec(node))
    right = _wrap(node.right, _prec(node) + 1)
    return f"{left}{node.op}{right}"


def _wrap(node: Expression, min_prec: int) -> str:
    s = to_source(node)
    if _prec(node) < min_prec:
        return f"({s})"
    return s


def evaluate(node: Expression, x, y, t):
    """Evaluate over scalars or broadcastable numpy arrays."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return {"x": x, "y": y, "t": t}[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, x, y, t)
    if isinstance(node, Pow):
        base = evaluate(node.base, x, y, t)
        if node.exponent < 0 and np.any(np.asarray(base) == 0.0):
            raise EvaluationError("zero raised to a negative power")
        return base ** node.exponent
    if isinstance(node, Call):
        arg = evaluate(node.arg, x, y, t)
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp}[node.func](arg)
    a = evaluate(node.left, x, y, t)
    b = evaluate(node.right, x, y, t)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if np.any(np.asarray(b) == 0.0):
        raise EvaluationError("division by zero")
    return a / b


def variables(node: Expression) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return variables(node.arg)
    if isinstance(node, Pow):
        return variables(node.base)
    if isinstance(node, Call):
        return variables(node.arg)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set()
