"""Arithmetic expression language for coefficient data.

All system data (speeds, couplings, right-hand sides, reflection
coefficients, delays, kernels) are supplied as expression strings in the
variables ``x``, ``t``, ``tau`` and ``V1..Vn``.  Expressions parse to an
immutable tree that can be evaluated on scalars or numpy arrays and
differentiated symbolically, so that every derivative the solvers need is
exact rather than numerical.

Grammar (EBNF):

    expr     = term { ("+" | "-") term } ;
    term     = factor { ("*" | "/") factor } ;
    factor   = "-" factor | power ;
    power    = atom [ "^" exponent ] ;
    exponent = [ "-" ] integer ;
    atom     = number | "pi" | variable | function "(" expr ")"
             | "(" expr ")" ;
    function = "sin" | "cos" | "exp" | "log" | "sqrt" | "abs" | "sign" ;
    variable = "x" | "t" | "tau" | "V" integer ;

Exponents are restricted to integer literals; fractional powers go through
``exp``/``log``.  Derivative trees are left unsimplified.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DivisionByZeroError,
    DomainError,
    ExpressionSyntaxError,
    UnboundVariableError,
    UnknownIdentifierError,
)

__all__ = [
    "ExpressionAst",
    "parse",
    "evaluate",
    "differentiate",
    "render",
    "free_variables",
    "constant",
]


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "ExpressionAst"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "ExpressionAst"
    right: "ExpressionAst"


@dataclass(frozen=True)
class Pow:
    base: "ExpressionAst"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "ExpressionAst"


ExpressionAst = Union[Const, Var, Neg, BinOp, Pow, Call]

_FUNCTIONS = {"sin", "cos", "exp", "log", "sqrt", "abs", "sign"}
_VAR_RE = re.compile(r"^(x|t|tau|V[1-9][0-9]*)$")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionSyntaxError(
                f"unexpected character {stripped[0]!r}", len(text) - len(stripped)
            )
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, symbol):
        kind, value, offset = self.peek()
        if kind != "op" or value != symbol:
            raise ExpressionSyntaxError(f"expected {symbol!r}", offset)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = BinOp(value, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = BinOp(value, node, self.parse_factor())
            else:
                return node

    def parse_factor(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.parse_factor())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return Pow(base, self.parse_exponent())
        return base

    def parse_exponent(self):
        sign = 1
        kind, value, offset = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            sign = -1
            kind, value, offset = self.peek()
        if kind != "num" or not re.fullmatch(r"[0-9]+", value):
            raise ExpressionSyntaxError("exponent must be an integer literal", offset)
        self.advance()
        return sign * int(value)

    def parse_atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value == "pi":
                return Const(np.pi)
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(value, arg)
            if _VAR_RE.match(value):
                return Var(value)
            raise UnknownIdentifierError(value, offset)
        if kind == "op" and value == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(f"unexpected token {value!r}", offset)


def parse(text: str) -> ExpressionAst:
    """Parse expression text into an AST.

    Raises ExpressionSyntaxError (with byte offset) on malformed input and
    UnknownIdentifierError for names outside the vocabulary.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    kind, value, offset = parser.peek()
    if kind != "end":
        raise ExpressionSyntaxError(f"trailing input {value!r}", offset)
    return node


def constant(value: float) -> ExpressionAst:
    return Const(float(value))


def evaluate(ast: ExpressionAst, env: dict):
    """Evaluate at a point or on numpy arrays.

    ``env`` maps variable names to floats or arrays; arrays broadcast
    elementwise.  Domain failures raise rather than propagating nan/inf.
    """
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        try:
            return env[ast.name]
        except KeyError:
            raise UnboundVariableError(f"variable {ast.name!r} is unbound") from None
    if isinstance(ast, Neg):
        return -evaluate(ast.arg, env)
    if isinstance(ast, BinOp):
        left = evaluate(ast.left, env)
        right = evaluate(ast.right, env)
        if ast.op == "+":
            return left + right
        if ast.op == "-":
            return left - right
        if ast.op == "*":
            return left * right
        if np.any(right == 0):
            raise DivisionByZeroError("division by zero")
        return left / right
    if isinstance(ast, Pow):
        base = evaluate(ast.base, env)
        if ast.exponent < 0 and np.any(base == 0):
            raise DivisionByZeroError("zero raised to a negative power")
        return base ** ast.exponent
    if isinstance(ast, Call):
        arg = evaluate(ast.arg, env)
        if ast.fn == "sin":
            return np.sin(arg)
        if ast.fn == "cos":
            return np.cos(arg)
        if ast.fn == "exp":
            return np.exp(arg)
        if ast.fn == "log":
            if np.any(arg <= 0):
                raise DomainError("log of a nonpositive argument")
            return np.log(arg)
        if ast.fn == "sqrt":
            if np.any(arg < 0):
                raise DomainError("sqrt of a negative argument")
            return np.sqrt(arg)
        if ast.fn == "abs":
            return np.abs(arg)
        if ast.fn == "sign":
            return np.sign(arg)
    raise TypeError(f"not an expression node: {ast!r}")


_D_ZERO = Const(0.0)
_D_ONE = Const(1.0)


def differentiate(ast: ExpressionAst, var: str) -> ExpressionAst:
    """Symbolic partial derivative with respect to ``var``.

    Closed over the AST node set: the result is again an ExpressionAst
    (possibly unsimplified).  ``abs`` differentiates to ``sign``, which is
    zero at the kink itself.
    """
    if isinstance(ast, Const):
        return _D_ZERO
    if isinstance(ast, Var):
        return _D_ONE if ast.name == var else _D_ZERO
    if isinstance(ast, Neg):
        return Neg(differentiate(ast.arg, var))
    if isinstance(ast, BinOp):
        du = differentiate(ast.left, var)
        dv = differentiate(ast.right, var)
        if ast.op in "+-":
            return BinOp(ast.op, du, dv)
        if ast.op == "*":
            return BinOp("+", BinOp("*", du, ast.right), BinOp("*", ast.left, dv))
        # quotient rule: (u/v)' = (u'v - uv')/v^2
        num = BinOp("-", BinOp("*", du, ast.right), BinOp("*", ast.left, dv))
        return BinOp("/", num, Pow(ast.right, 2))
    if isinstance(ast, Pow):
        if ast.exponent == 0:
            return _D_ZERO
        du = differentiate(ast.base, var)
        return BinOp(
            "*",
            BinOp("*", Const(float(ast.exponent)), Pow(ast.base, ast.exponent - 1)),
            du,
        )
    if isinstance(ast, Call):
        du = differentiate(ast.arg, var)
        if ast.fn == "sin":
            outer = Call("cos", ast.arg)
        elif ast.fn == "cos":
            outer = Neg(Call("sin", ast.arg))
        elif ast.fn == "exp":
            outer = Call("exp", ast.arg)
        elif ast.fn == "log":
            outer = BinOp("/", _D_ONE, ast.arg)
        elif ast.fn == "sqrt":
            outer = BinOp("/", Const(0.5), Call("sqrt", ast.arg))
        elif ast.fn == "abs":
            outer = Call("sign", ast.arg)
        elif ast.fn == "sign":
            return _D_ZERO
        else:  # pragma: no cover
            raise TypeError(f"unknown function {ast.fn!r}")
        return BinOp("*", outer, du)
    raise TypeError(f"not an expression node: {ast!r}")


def substitute(ast: ExpressionAst, var: str, replacement: ExpressionAst) -> ExpressionAst:
    """Replace every occurrence of ``var`` by another expression."""
    if isinstance(ast, Const):
        return ast
    if isinstance(ast, Var):
        return replacement if ast.name == var else ast
    if isinstance(ast, Neg):
        return Neg(substitute(ast.arg, var, replacement))
    if isinstance(ast, BinOp):
        return BinOp(
            ast.op,
            substitute(ast.left, var, replacement),
            substitute(ast.right, var, replacement),
        )
    if isinstance(ast, Pow):
        return Pow(substitute(ast.base, var, replacement), ast.exponent)
    if isinstance(ast, Call):
        return Call(ast.fn, substitute(ast.arg, var, replacement))
    raise TypeError(f"not an expression node: {ast!r}")


def free_variables(ast: ExpressionAst) -> set:
    if isinstance(ast, Const):
        return set()
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Neg):
        return free_variables(ast.arg)
    if isinstance(ast, BinOp):
        return free_variables(ast.left) | free_variables(ast.right)
    if isinstance(ast, Pow):
        return free_variables(ast.base)
    if isinstance(ast, Call):
        return free_variables(ast.arg)
    raise TypeError(f"not an expression node: {ast!r}")


def render(ast: ExpressionAst) -> str:
    """Serialize back to parseable text; parse(render(a)) evaluates like a."""
    return _render(ast, 1)


# precedence: 1 additive, 2 multiplicative, 4 power, 5 atom; unary minus
# renders at level 1 so it picks up parentheses inside tighter contexts.
def _precedence(ast):
    if isinstance(ast, (Neg,)) or (isinstance(ast, Const) and ast.value < 0):
        return 1
    if isinstance(ast, BinOp):
        return 1 if ast.op in "+-" else 2
    if isinstance(ast, Pow):
        return 4
    return 5


def _render(ast, need):
    if isinstance(ast, Const):
        raw = repr(ast.value)
    elif isinstance(ast, Var):
        raw = ast.name
    elif isinstance(ast, Neg):
        raw = f"-{_render(ast.arg, 3)}"
    elif isinstance(ast, BinOp):
        level = 1 if ast.op in "+-" else 2
        raw = f"{_render(ast.left, level)} {ast.op} {_render(ast.right, level + 1)}"
    elif isinstance(ast, Pow):
        raw = f"{_render(ast.base, 5)}^{ast.exponent}"
    elif isinstance(ast, Call):
        raw = f"{ast.fn}({_render(ast.arg, 1)})"
    else:
        raise TypeError(f"not an expression node: {ast!r}")
    return f"({raw})" if _precedence(ast) < need else raw
