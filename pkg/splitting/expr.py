"""
=============================================================================
EXPRESSIONS - parse, evaluate, differentiate
=============================================================================
Coefficients, free terms, initial data and manufactured solutions are written
as small formulas in the variables t, x1..x9. This module turns them into
immutable trees that evaluate on numpy arrays and differentiate symbolically.

Grammar (loosest binding first):

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := atom ('^' unary)?          # right associative
    atom       := number | 'pi' | variable | func '(' expression ')'
                | '(' expression ')'

The exponent of '^' must fold to an integer constant in [-4, 8].
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import ExprEvalError, ExprSyntaxError, ValidationError

logger = logging.getLogger(__name__)

ALLOWED_VARIABLES = frozenset({"t"} | {f"x{i}" for i in range(1, 10)})
FUNCTIONS = ("sin", "cos", "exp")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("+", "-", "*", "/", "^")

MAX_DEPTH = 64
# Parenthesis / unary nesting accepted by the parser; tree depth is checked separately.
MAX_NESTING = 150
MIN_EXPONENT = -4
MAX_EXPONENT = 8

Value = Union[float, np.ndarray]


class Expr:
    """Base class of all expression nodes."""

    @property
    def depth(self) -> int:
        return self._depth

    @property
    def variables(self) -> frozenset:
        return self._variables

    def depends_on(self, name: str) -> bool:
        return name in self._variables

    @property
    def time_dependent(self) -> bool:
        return "t" in self._variables

    @property
    def space_dependent(self) -> bool:
        return any(v != "t" for v in self._variables)

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Constant(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "_depth", 1)
        object.__setattr__(self, "_variables", frozenset())


@dataclass(frozen=True)
class Variable(Expr):
    name: str

    def __post_init__(self):
        if self.name not in ALLOWED_VARIABLES:
            raise ValidationError(f"unknown variable '{self.name}'")
        object.__setattr__(self, "_depth", 1)
        object.__setattr__(self, "_variables", frozenset({self.name}))


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    child: Expr

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValidationError(f"unknown unary operator '{self.op}'")
        object.__setattr__(self, "_depth", 1 + self.child.depth)
        object.__setattr__(self, "_variables", self.child.variables)


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValidationError(f"unknown binary operator '{self.op}'")
        if self.op == "^":
            exponent = self.right
            if not isinstance(exponent, Constant) or exponent.value != int(exponent.value):
                raise ValidationError("exponent of '^' must be an integer constant")
            if not MIN_EXPONENT <= exponent.value <= MAX_EXPONENT:
                raise ValidationError(f"exponent {int(exponent.value)} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]")
        object.__setattr__(self, "_depth", 1 + max(self.left.depth, self.right.depth))
        object.__setattr__(self, "_variables", self.left.variables | self.right.variables)


ZERO = Constant(0.0)
ONE = Constant(1.0)


# =============================================================================
# Parsing
# =============================================================================

_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)

Token = Tuple[str, str, int]


def _tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(source):
        if source[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), pos))
        pos = match.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.index = 0
        self.nesting = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _expect(self, text: str) -> None:
        kind, value, pos = self.current
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)
        self._advance()

    def _enter(self, pos: int) -> None:
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise ExprSyntaxError("expression nested too deeply", pos)

    def _leave(self) -> None:
        self.nesting -= 1

    @staticmethod
    def _checked(node: Expr, pos: int) -> Expr:
        if node.depth > MAX_DEPTH:
            raise ExprSyntaxError(f"expression deeper than {MAX_DEPTH}", pos)
        return node

    def parse(self) -> Expr:
        node = self._expression()
        kind, value, pos = self.current
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {value!r}", pos)
        return node

    def _expression(self) -> Expr:
        node = self._term()
        while self.current[1] in ("+", "-") and self.current[0] == "op":
            _, op, pos = self._advance()
            node = self._checked(Binary(op, node, self._term()), pos)
        return node

    def _term(self) -> Expr:
        node = self._unary()
        while self.current[1] in ("*", "/") and self.current[0] == "op":
            _, op, pos = self._advance()
            node = self._checked(Binary(op, node, self._unary()), pos)
        return node

    def _unary(self) -> Expr:
        kind, value, pos = self.current
        if kind == "op" and value == "-":
            self._advance()
            self._enter(pos)
            try:
                return self._checked(Unary("neg", self._unary()), pos)
            finally:
                self._leave()
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        kind, value, pos = self.current
        if kind != "op" or value != "^":
            return base
        self._advance()
        self._enter(pos)
        try:
            exponent = self._unary()
        finally:
            self._leave()
        if exponent.variables:
            raise ExprSyntaxError("non-constant exponent", pos)
        try:
            folded = evaluate(exponent, 0.0, ())
        except ExprEvalError as exc:
            raise ExprSyntaxError(f"invalid exponent: {exc}", pos) from exc
        if not math.isfinite(folded) or folded != int(folded):
            raise ExprSyntaxError(f"non-integer exponent {folded!r}", pos)
        n = int(folded)
        if not MIN_EXPONENT <= n <= MAX_EXPONENT:
            raise ExprSyntaxError(f"exponent {n} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]", pos)
        return self._checked(Binary("^", base, Constant(float(n))), pos)

    def _atom(self) -> Expr:
        kind, value, pos = self._advance()
        if kind == "number":
            number = float(value)
            if not math.isfinite(number):
                raise ExprSyntaxError(f"number {value!r} out of range", pos)
            return Constant(number)
        if kind == "name":
            if value in FUNCTIONS:
                self._expect("(")
                self._enter(pos)
                try:
                    inner = self._expression()
                finally:
                    self._leave()
                self._expect(")")
                return self._checked(Unary(value, inner), pos)
            if value == "pi":
                return Constant(math.pi)
            if value in ALLOWED_VARIABLES:
                return Variable(value)
            raise ExprSyntaxError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            self._enter(pos)
            try:
                inner = self._expression()
            finally:
                self._leave()
            self._expect(")")
            return inner
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected token {value!r}", pos)


def parse(source: str) -> Expr:
    """
    Parse an expression string.

    Args:
        source: Formula in t, x1..x9, pi, numbers, + - * / ^, sin, cos, exp

    Returns:
        Immutable expression tree

    Raises:
        ExprSyntaxError: On any malformed input, with the offending position
    """
    if not isinstance(source, str):
        raise ExprSyntaxError(f"expression must be a string, got {type(source).__name__}")
    return _Parser(source).parse()


def as_expr(value: Union[Expr, str, float, int]) -> Expr:
    """Coerce strings and numbers into expressions."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Constant(float(value))
    return parse(value)


# =============================================================================
# Evaluation
# =============================================================================

def _evaluate(e: Expr, t: Value, x: Sequence[Value]) -> Value:
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Variable):
        if e.name == "t":
            return t
        index = int(e.name[1:]) - 1
        if index >= len(x):
            raise ExprEvalError(f"missing coordinate {e.name}")
        return x[index]
    if isinstance(e, Unary):
        value = _evaluate(e.child, t, x)
        if e.op == "neg":
            return -value
        if e.op == "sin":
            return np.sin(value)
        if e.op == "cos":
            return np.cos(value)
        return np.exp(value)

    left = _evaluate(e.left, t, x)
    if e.op == "^":
        n = int(e.right.value)
        if n < 0:
            if np.any(np.asarray(left) == 0):
                raise ExprEvalError("division by zero")
            return 1.0 / left ** (-n)
        return left ** n
    right = _evaluate(e.right, t, x)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if np.any(np.asarray(right) == 0):
        raise ExprEvalError("division by zero")
    return left / right


def evaluate(e: Expr, t: Value, x: Sequence[Value]) -> Value:
    """
    Evaluate an expression at time t and point x.

    Args:
        e: Expression tree
        t: Time (scalar or array broadcastable against x)
        x: Coordinates (x1, x2, ...); components may be numpy arrays

    Returns:
        float for scalar input, numpy array otherwise

    Raises:
        ExprEvalError: Division by zero or a coordinate missing from x
    """
    t = np.float64(t) if np.isscalar(t) else np.asarray(t, dtype=float)
    x = tuple(np.float64(xi) if np.isscalar(xi) else np.asarray(xi, dtype=float) for xi in x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        value = _evaluate(e, t, x)
    if np.ndim(value) == 0:
        return float(value)
    return value


# =============================================================================
# Construction helpers (fold trivial constants)
# =============================================================================

def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Constant) and e.value == value


def negate(a: Expr) -> Expr:
    if isinstance(a, Constant):
        return Constant(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.child
    return Unary("neg", a)


def plus(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value + b.value)
    return Binary("+", a, b)


def minus(a: Expr, b: Expr) -> Expr:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return negate(b)
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value - b.value)
    return Binary("-", a, b)


def times(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Constant) and isinstance(b, Constant):
        return Constant(a.value * b.value)
    return Binary("*", a, b)


def divide(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if n < MIN_EXPONENT:
        return divide(ONE, power(a, -n))
    if n > MAX_EXPONENT:
        return times(power(a, MAX_EXPONENT), power(a, n - MAX_EXPONENT))
    return Binary("^", a, Constant(float(n)))


def total(terms: Sequence[Expr]) -> Expr:
    result: Expr = ZERO
    for term in terms:
        result = plus(result, term)
    return result


# =============================================================================
# Symbolic calculus
# =============================================================================

def differentiate(e: Expr, var: str) -> Expr:
    """
    Exact symbolic derivative of e with respect to var.

    No simplification is attempted beyond folding multiplications by 0 and 1.
    """
    if var not in ALLOWED_VARIABLES:
        raise ValidationError(f"cannot differentiate with respect to '{var}'")
    return _differentiate(e, var)


def _differentiate(e: Expr, var: str) -> Expr:
    if not e.depends_on(var):
        return ZERO
    if isinstance(e, Variable):
        return ONE
    if isinstance(e, Unary):
        du = _differentiate(e.child, var)
        if e.op == "neg":
            return negate(du)
        if e.op == "sin":
            return times(Unary("cos", e.child), du)
        if e.op == "cos":
            return negate(times(Unary("sin", e.child), du))
        return times(Unary("exp", e.child), du)

    if e.op == "^":
        n = int(e.right.value)
        return times(times(Constant(float(n)), power(e.left, n - 1)), _differentiate(e.left, var))
    dl = _differentiate(e.left, var)
    dr = _differentiate(e.right, var)
    if e.op == "+":
        return plus(dl, dr)
    if e.op == "-":
        return minus(dl, dr)
    if e.op == "*":
        return plus(times(dl, e.right), times(e.left, dr))
    # quotient rule
    numerator = minus(times(dl, e.right), times(e.left, dr))
    return divide(numerator, power(e.right, 2))


def substitute(e: Expr, var: str, value: Expr) -> Expr:
    """Replace every occurrence of a variable by another expression."""
    if not e.depends_on(var):
        return e
    if isinstance(e, Variable):
        return value
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.child, var, value))
    if e.op == "^":
        return Binary("^", substitute(e.left, var, value), e.right)
    return Binary(e.op, substitute(e.left, var, value), substitute(e.right, var, value))


# =============================================================================
# Printing
# =============================================================================

def to_source(e: Expr) -> str:
    """Canonical, fully parenthesized source text; parse(to_source(e)) evaluates like e."""
    if isinstance(e, Constant):
        text = repr(float(e.value))
        return f"(-({text[1:]}))" if text.startswith("-") else text
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-({to_source(e.child)}))"
        return f"{e.op}({to_source(e.child)})"
    if e.op == "^":
        return f"(({to_source(e.left)})^({int(e.right.value)}))"
    return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
