"""Small arithmetic expression language used for kernels, eigenvalue
functions and test functions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

So ``-2^2 == -4`` and ``2^3^2 == 512``.  Evaluation accepts scalars or numpy
arrays; any invalid operation raises :class:`DomainError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "exp": 1,
    "log": 1,
    "abs": 1,
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "pow": 2,
}

CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for parse and evaluation errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class DomainError(ExprError):
    """Raised when an expression is evaluated outside its domain."""

    def __init__(self, message: str, node: "Expr | None" = None, where=None):
        self.node = node
        self.where = where
        detail = f" in '{node}'" if node is not None else ""
        super().__init__(message + detail)


@dataclass(frozen=True)
class Expr:
    """Immutable expression tree node.

    ``kind`` is one of ``const``, ``var``, ``neg``, ``binop``, ``call``.
    """

    kind: str
    value: float = 0.0
    name: str = ""
    children: tuple["Expr", ...] = ()

    def __str__(self) -> str:
        return to_string(self)

    def __call__(self, u):
        return evaluate(self, u)

    @property
    def variables(self) -> frozenset[str]:
        if self.kind == "var":
            return frozenset([self.name])
        out: frozenset[str] = frozenset()
        for c in self.children:
            out |= c.variables
        return out


def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def var(name: str = "u") -> Expr:
    return Expr("var", name=name)


def binop(op: str, a: Expr, b: Expr) -> Expr:
    return Expr("binop", name=op, children=(a, b))


def call(name: str, *args: Expr) -> Expr:
    if FUNCTIONS.get(name) != len(args):
        raise ExprError(f"function {name} takes {FUNCTIONS.get(name)} arguments, got {len(args)}")
    return Expr("call", name=name, children=tuple(args))


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.next()
        if tok[1] != op:
            found = tok[1] or "end of input"
            raise ExprSyntaxError(f"expected {op!r}, found {found!r}", tok[2], self.text)
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2], self.text)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.next()[1]
            left = binop(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.next()[1]
            left = binop(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.next()
            return Expr("neg", children=(self.unary(),))
        if tok[0] == "op" and tok[1] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.next()
            return binop("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.next()
        if kind == "num":
            return const(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos, self.text)
                self.next()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"function {text!r} expects {FUNCTIONS[text]} argument(s), got {len(args)}",
                        pos,
                        self.text,
                    )
                return Expr("call", name=text, children=tuple(args))
            if text in self.variables:
                return var(text)
            if text in CONSTANTS:
                return const(CONSTANTS[text])
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos, self.text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", pos, self.text)


def parse_expr(text: str, variables=("u",)) -> Expr:
    """Parse ``text`` into an expression tree over the given variable names."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0, text if isinstance(text, str) else "")
    return _Parser(text, variables).parse()


# --------------------------------------------------------------------------
# evaluation


def _check(ok, message, node, x):
    if not np.all(ok):
        where = None
        if np.ndim(x):
            where = int(np.flatnonzero(~np.asarray(ok, dtype=bool).ravel())[0])
        raise DomainError(message, node, where)


def _pow(node, a, b):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    zero_neg = (a == 0) & (b < 0)
    _check(~zero_neg, "zero raised to a negative power", node, a)
    neg_frac = (a < 0) & (b != np.round(b))
    _check(~neg_frac, "negative base with non-integer exponent", node, a)
    with np.errstate(all="ignore"):
        mag = np.power(np.abs(a), b)
        odd = (a < 0) & (np.mod(np.round(b), 2) == 1)
        return np.where(odd, -mag, mag)


def _eval(e: Expr, env):
    k = e.kind
    if k == "const":
        return e.value
    if k == "var":
        try:
            return env[e.name]
        except KeyError:
            raise DomainError(f"variable {e.name!r} not bound", e) from None
    if k == "neg":
        return -_eval(e.children[0], env)
    if k == "binop":
        a = _eval(e.children[0], env)
        b = _eval(e.children[1], env)
        op = e.name
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            _check(np.asarray(b) != 0, "division by zero", e, b)
            return np.true_divide(a, b)
        return _pow(e, a, b)
    # call
    args = [_eval(c, env) for c in e.children]
    name = e.name
    x = args[0]
    with np.errstate(all="ignore"):
        if name == "log":
            _check(np.asarray(x) > 0, "log of non-positive value", e, x)
            return np.log(x)
        if name == "sqrt":
            _check(np.asarray(x) >= 0, "sqrt of negative value", e, x)
            return np.sqrt(x)
        if name == "exp":
            return np.exp(x)
        if name == "abs":
            return np.abs(x)
        if name == "sin":
            return np.sin(x)
        if name == "cos":
            return np.cos(x)
        return _pow(e, x, args[1])


def evaluate(e: Expr, u=None, **env):
    """Evaluate ``e``.  ``u`` binds the default variable; other variables by
    keyword.  Works elementwise on arrays."""
    if u is not None:
        env["u"] = u
    env = {k: np.asarray(v, dtype=float) if np.ndim(v) else float(v) for k, v in env.items()}
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    out_arr = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out_arr)):
        raise DomainError("non-finite result", e)
    if out_arr.ndim == 0 and not any(np.ndim(v) for v in env.values()):
        return float(out_arr)
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
    return np.broadcast_to(out_arr, shape).copy() if out_arr.shape != shape else out_arr


eval_expr = evaluate


# --------------------------------------------------------------------------
# printing and construction helpers


def to_string(e: Expr) -> str:
    """Fully parenthesised text that parses back to an equivalent tree."""
    k = e.kind
    if k == "const":
        r = repr(e.value)
        return f"({r})" if e.value < 0 else r
    if k == "var":
        return e.name
    if k == "neg":
        return f"(-{to_string(e.children[0])})"
    if k == "binop":
        a, b = e.children
        return f"({to_string(a)}{e.name}{to_string(b)})"
    return f"{e.name}({', '.join(to_string(c) for c in e.children)})"


def substitute(e: Expr, name: str, repl: Expr) -> Expr:
    if e.kind == "var":
        return repl if e.name == name else e
    if not e.children:
        return e
    return Expr(e.kind, e.value, e.name, tuple(substitute(c, name, repl) for c in e.children))
