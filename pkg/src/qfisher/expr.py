"""A tiny arithmetic language for parameter-dependent matrix entries.

Grammar (highest precedence first)::

    primary  := NUMBER | VAR | FUNC '(' sum ')' | '(' sum ')'
    power    := primary ['^' unary]          # right associative
    unary    := '-' unary | power
    product  := unary (('*' | '/') unary)*
    sum      := product (('+' | '-') product)*

Variables are ``x`` (alias of ``x1``) and ``x1 .. xN``. Functions are
``sqrt sin cos exp ln``. Nothing else: no constants, no user functions.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

from .errors import DomainError, ExprSyntaxError, UnknownIdentifierError, ValidationError

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "ln")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_VAR = re.compile(r"x([1-9]\d*)?\Z")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(src: str):
    pos = 0
    toks = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _offset(src, pos), src)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), _offset(src, pos)))
        pos = m.end()
    toks.append(("end", "", _offset(src, len(src))))
    return toks


def _offset(src: str, char_pos: int) -> int:
    # byte offset, so non-ASCII input reports positions editors agree on
    return len(src[:char_pos].encode("utf-8"))


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, off = self.take()
        if val != text or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", off, self.src)

    def parse(self) -> Expr:
        node = self.sum()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off, self.src)
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return Call(val, arg)
            m = _VAR.match(val)
            if m:
                return Var(int(m.group(1) or 1))
            raise UnknownIdentifierError(f"unknown identifier {val!r}", off, self.src)
        if (kind, val) == ("op", "("):
            node = self.sum()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", off, self.src)


def parse(src: str) -> Expr:
    """Parse ``src`` into an immutable expression tree."""
    if not isinstance(src, str):
        raise ValidationError(f"expression must be a string, got {type(src).__name__}")
    return _Parser(src).parse()


def to_string(e: Expr) -> str:
    """Canonical, fully parenthesized rendering; ``parse(to_string(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-{to_string(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def max_var(e: Expr) -> int:
    """Largest variable index referenced (0 for a constant expression)."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Num):
        return 0
    if isinstance(e, (Neg, Call)):
        return max_var(e.operand if isinstance(e, Neg) else e.arg)
    return max(max_var(e.left), max_var(e.right))


def evaluate(e: Expr, xs: Sequence[float]) -> float:
    """Evaluate in IEEE double precision; ``xs[0]`` is ``x1``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.index > len(xs):
            raise ValidationError(f"variable x{e.index} not bound ({len(xs)} values given)")
        return float(xs[e.index - 1])
    if isinstance(e, Neg):
        return -evaluate(e.operand, xs)
    if isinstance(e, Call):
        a = evaluate(e.arg, xs)
        try:
            return _call(e.func, a)
        except (ValueError, OverflowError):
            raise DomainError(f"{to_string(e)} undefined at argument {a!r}") from None
    a = evaluate(e.left, xs)
    b = evaluate(e.right, xs)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0.0:
            raise DomainError(f"division by zero in {to_string(e)}")
        return a / b
    # op == "^"
    if a < 0 and not float(b).is_integer():
        raise DomainError(f"negative base with non-integer exponent in {to_string(e)}")
    if a == 0 and b < 0:
        raise DomainError(f"zero raised to negative power in {to_string(e)}")
    try:
        return math.pow(a, b)
    except OverflowError:
        raise DomainError(f"overflow in {to_string(e)}") from None


def _call(name: str, a: float) -> float:
    if name == "sqrt":
        if a < 0:
            raise ValueError
        return math.sqrt(a)
    if name == "ln":
        if a <= 0:
            raise ValueError
        return math.log(a)
    if name == "exp":
        return math.exp(a)
    if name == "sin":
        return math.sin(a)
    return math.cos(a)


class Expression:
    """Parsed expression that remembers its source text."""

    __slots__ = ("source", "tree", "nvars")

    def __init__(self, source: str):
        self.source = source
        self.tree = parse(source)
        self.nvars = max_var(self.tree)

    def __call__(self, xs) -> float:
        if isinstance(xs, (int, float)):
            xs = (xs,)
        return evaluate(self.tree, xs)

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"
