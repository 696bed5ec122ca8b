"""Small exact-arithmetic expression language for question templates.

Supports integer and rational literals, parameter names, ``+ - * / ^``
(integer exponents), unary minus, comparisons and boolean connectives for
constraints.  All arithmetic is exact over ``fractions.Fraction``; the only
partial operation is division by zero.

Grammar (precedence from loosest to tightest):

    or_expr    := and_expr ("or" and_expr)*
    and_expr   := not_expr ("and" not_expr)*
    not_expr   := "not" not_expr | comparison
    comparison := arith (("=="|"!="|"<="|">="|"<"|">") arith)?
    arith      := term (("+"|"-") term)*
    term       := factor (("*"|"/") factor)*
    factor     := "-" factor | power
    power      := atom ("^" factor)?
    atom       := INT | NAME | "(" or_expr ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from studymap.errors import DocumentParseError, StudymapError


class EvalError(StudymapError):
    """Expression evaluation failed (division by zero, unbound name, bad types)."""


Value = Union[Fraction, bool]


@dataclass(frozen=True)
class Lit:
    value: Fraction


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # == != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


Expr = Union[Lit, Name, BinOp, Neg, Compare, BoolOp, Not]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|<=|>=|[-+*/^()<>]))"
)

_KEYWORDS = {"and", "or", "not"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise DocumentParseError(f"unexpected character {rest[0]!r} in expression", column=pos + 1)
        if match.group("int") is not None:
            tokens.append(("int", match.group("int"), match.start("int")))
        elif match.group("name") is not None:
            name = match.group("name")
            kind = "kw" if name in _KEYWORDS else "name"
            tokens.append((kind, name, match.start("name")))
        else:
            tokens.append(("op", match.group("op"), match.start("op")))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise DocumentParseError(f"unexpected end of expression in {self.text!r}")
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            raise DocumentParseError(f"expected {op!r}, found {tok[1]!r}", column=tok[2] + 1)

    def parse(self) -> Expr:
        expr = self.or_expr()
        tok = self.peek()
        if tok is not None:
            raise DocumentParseError(f"trailing input {tok[1]!r} in expression", column=tok[2] + 1)
        return expr

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while (tok := self.peek()) and tok[0] == "kw" and tok[1] == "or":
            self.take()
            left = BoolOp("or", left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while (tok := self.peek()) and tok[0] == "kw" and tok[1] == "and":
            self.take()
            left = BoolOp("and", left, self.not_expr())
        return left

    def not_expr(self) -> Expr:
        tok = self.peek()
        if tok and tok[0] == "kw" and tok[1] == "not":
            self.take()
            return Not(self.not_expr())
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.arith()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] in ("==", "!=", "<", "<=", ">", ">="):
            self.take()
            return Compare(tok[1], left, self.arith())
        return left

    def arith(self) -> Expr:
        left = self.term()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in ("+", "-"):
            self.take()
            left = BinOp(tok[1], left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while (tok := self.peek()) and tok[0] == "op" and tok[1] in ("*", "/"):
            self.take()
            left = BinOp(tok[1], left, self.factor())
        return left

    def factor(self) -> Expr:
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, text, col = tok
        if kind == "int":
            return Lit(Fraction(int(text)))
        if kind == "name":
            return Name(text)
        if kind == "op" and text == "(":
            inner = self.or_expr()
            self.expect_op(")")
            return inner
        raise DocumentParseError(f"unexpected token {text!r} in expression", column=col + 1)


def parse_expression(text: str) -> Expr:
    """Parse *text* into an AST.  Raises DocumentParseError with the column."""
    if not text.strip():
        raise DocumentParseError("empty expression")
    return _Parser(text).parse()


def free_names(expr: Expr) -> set[str]:
    if isinstance(expr, Lit):
        return set()
    if isinstance(expr, Name):
        return {expr.name}
    if isinstance(expr, (Neg, Not)):
        return free_names(expr.operand)
    return free_names(expr.left) | free_names(expr.right)


def _as_fraction(value: Value, context: str) -> Fraction:
    if isinstance(value, bool):
        raise EvalError(f"{context}: expected a number, got a boolean")
    return value


def _as_bool(value: Value, context: str) -> bool:
    if not isinstance(value, bool):
        raise EvalError(f"{context}: expected a boolean, got {value!r}")
    return value


def eval_expression(expr: Expr, bindings: dict[str, Fraction]) -> Value:
    """Evaluate *expr* exactly.  Raises EvalError on division by zero,
    unbound names, non-integer exponents, and type mismatches."""
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Name):
        try:
            return bindings[expr.name]
        except KeyError:
            raise EvalError(f"unbound name {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -_as_fraction(eval_expression(expr.operand, bindings), "unary minus")
    if isinstance(expr, Not):
        return not _as_bool(eval_expression(expr.operand, bindings), "not")
    if isinstance(expr, BinOp):
        left = _as_fraction(eval_expression(expr.left, bindings), expr.op)
        right = _as_fraction(eval_expression(expr.right, bindings), expr.op)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            if right == 0:
                raise EvalError("division by zero")
            return left / right
        if expr.op == "^":
            if right.denominator != 1:
                raise EvalError(f"non-integer exponent {right}")
            exponent = right.numerator
            if left == 0 and exponent < 0:
                raise EvalError("division by zero (zero base, negative exponent)")
            return left ** exponent
        raise EvalError(f"unknown operator {expr.op!r}")
    if isinstance(expr, Compare):
        left = eval_expression(expr.left, bindings)
        right = eval_expression(expr.right, bindings)
        if expr.op == "==":
            return left == right
        if expr.op == "!=":
            return left != right
        left = _as_fraction(left, expr.op)
        right = _as_fraction(right, expr.op)
        if expr.op == "<":
            return left < right
        if expr.op == "<=":
            return left <= right
        if expr.op == ">":
            return left > right
        if expr.op == ">=":
            return left >= right
    if isinstance(expr, BoolOp):
        left = _as_bool(eval_expression(expr.left, bindings), expr.op)
        # Both sides always evaluate; constraints are total, no short-circuit needed.
        right = _as_bool(eval_expression(expr.right, bindings), expr.op)
        return (left and right) if expr.op == "and" else (left or right)
    raise EvalError(f"unknown expression node {expr!r}")


def render_value(value: Value) -> str:
    """Canonical text: integers bare, other rationals as "p/q", booleans
    as True/False.  Never emits a trailing ".0"."""
    if isinstance(value, bool):
        return "True" if value else "False"
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def expression_to_text(expr: Expr) -> str:
    """Parenthesized text form; parsing it back yields a structurally
    equal AST (parentheses group, they do not create nodes)."""
    if isinstance(expr, Lit):
        if expr.value.denominator == 1:
            return str(expr.value.numerator)
        return f"({expr.value.numerator}/{expr.value.denominator})"
    if isinstance(expr, Name):
        return expr.name
    if isinstance(expr, Neg):
        return f"-({expression_to_text(expr.operand)})"
    if isinstance(expr, Not):
        return f"not ({expression_to_text(expr.operand)})"
    if isinstance(expr, (BinOp, Compare, BoolOp)):
        left = expression_to_text(expr.left)
        right = expression_to_text(expr.right)
        return f"({left}) {expr.op} ({right})"
    raise ValueError(f"unknown expression node {expr!r}")
