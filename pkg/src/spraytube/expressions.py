"""Closed-form coefficient expressions and piecewise functions of epsilon.

The grammar is small on purpose: numeric constants, the symbols ``eps``
(also ``ε``), ``g`` (the inradius, bound when the representation is built)
and ``pi`` (also ``π``), the operators ``+ - * /``, powers with a rational
constant exponent (``**`` or ``^``), and the functions ``sqrt`` and
``acos``/``arccos``.  Text is parsed with :mod:`ast` and anything outside
the grammar raises :class:`~spraytube.errors.GrammarError`.

Example::

    >>> e = parse("pi - 4*acos(g/(eps*sqrt(2)))")
    >>> round(float(e.evaluate(0.2357022603955158, g=0.2357022603955158)), 12)
    0.0
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import GrammarError

_NAMES = {"eps": "eps", "ε": "eps", "epsilon": "eps", "g": "g", "pi": "pi", "π": "pi"}
_FUNCS = {"sqrt": "sqrt", "acos": "acos", "arccos": "acos"}


@dataclass(frozen=True)
class Expr:
    """Parsed expression tree.

    ``kind`` is one of ``const, sym, neg, add, sub, mul, div, pow, sqrt,
    acos``.  ``value`` holds the float for constants, the symbol name for
    symbols and the :class:`~fractions.Fraction` exponent for powers.
    """

    kind: str
    args: tuple = ()
    value: object = None

    def evaluate(self, eps, g: float):
        k = self.kind
        if k == "const":
            return self.value
        if k == "sym":
            if self.value == "eps":
                return eps
            if self.value == "g":
                return g
            return math.pi
        if k == "neg":
            return -self.args[0].evaluate(eps, g)
        if k in ("add", "sub", "mul", "div"):
            a = self.args[0].evaluate(eps, g)
            b = self.args[1].evaluate(eps, g)
            if k == "add":
                return a + b
            if k == "sub":
                return a - b
            if k == "mul":
                return a * b
            return a / b
        if k == "pow":
            base = self.args[0].evaluate(eps, g)
            q = self.value
            if q.denominator == 1:
                return base ** int(q)
            return np.power(base, float(q))
        if k == "sqrt":
            return np.sqrt(self.args[0].evaluate(eps, g))
        if k == "acos":
            return np.arccos(self.args[0].evaluate(eps, g))
        raise GrammarError(f"unknown node kind {k!r}")

    def depends_on_eps(self) -> bool:
        if self.kind == "sym":
            return self.value == "eps"
        return any(a.depends_on_eps() for a in self.args)

    def to_text(self) -> str:
        k = self.kind
        if k == "const":
            return repr(float(self.value))
        if k == "sym":
            return str(self.value)
        if k == "neg":
            return f"(-{self.args[0].to_text()})"
        if k in ("add", "sub", "mul", "div"):
            op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[k]
            return f"({self.args[0].to_text()} {op} {self.args[1].to_text()})"
        if k == "pow":
            return f"({self.args[0].to_text()})**({self.value})"
        return f"{k}({self.args[0].to_text()})"


def const(x: float) -> Expr:
    return Expr("const", value=float(x))


def parse(text) -> Expr:
    """Parse ``text`` (a string or a number) into an :class:`Expr`."""
    if isinstance(text, Expr):
        return text
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return const(text)
    if not isinstance(text, str):
        raise GrammarError(f"expression must be a string or number, got {type(text).__name__}")
    src = text.replace("^", "**").strip()
    if not src:
        raise GrammarError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise GrammarError(f"cannot parse {text!r}: {exc.msg}") from None
    return _convert(tree.body, text)


def _rational_exponent(node, text) -> Fraction:
    try:
        val = _convert(node, text)
        if val.depends_on_eps() or _has_symbol(val, "g"):
            raise GrammarError(f"exponent must be a rational constant in {text!r}")
        x = float(val.evaluate(1.0, 1.0)) if not _has_symbol(val, "pi") else None
    except GrammarError:
        raise
    if x is None or not math.isfinite(x):
        raise GrammarError(f"exponent must be a rational constant in {text!r}")
    q = Fraction(x).limit_denominator(1000)
    if abs(float(q) - x) > 1e-12:
        raise GrammarError(f"exponent {x} is not a small rational in {text!r}")
    return q


def _has_symbol(e: Expr, name: str) -> bool:
    if e.kind == "sym":
        return e.value == name
    return any(_has_symbol(a, name) for a in e.args)


def _convert(node, text) -> Expr:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise GrammarError(f"unsupported constant {node.value!r} in {text!r}")
        return const(node.value)
    if isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise GrammarError(f"unknown symbol {node.id!r} in {text!r}")
        return Expr("sym", value=_NAMES[node.id])
    if isinstance(node, ast.UnaryOp):
        inner = _convert(node.operand, text)
        if isinstance(node.op, ast.USub):
            return Expr("neg", (inner,))
        if isinstance(node.op, ast.UAdd):
            return inner
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            return Expr("pow", (_convert(node.left, text),), _rational_exponent(node.right, text))
        ops = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "div"}
        kind = ops.get(type(node.op))
        if kind is not None:
            return Expr(kind, (_convert(node.left, text), _convert(node.right, text)))
    if isinstance(node, ast.Call):
        if isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise GrammarError(f"{node.func.id} takes exactly one argument in {text!r}")
            return Expr(_FUNCS[node.func.id], (_convert(node.args[0], text),))
    raise GrammarError(f"unsupported syntax {ast.dump(node)[:60]} in {text!r}")


@dataclass(frozen=True)
class PiecewiseFunction:
    """A function on ``(0, g]`` given by closed-form pieces.

    Piece ``i`` covers ``(breakpoints[i-1], breakpoints[i]]`` with
    ``breakpoints[-1] == g`` and an implicit left end at 0.  A value exactly
    at a breakpoint is taken from the piece ending there.
    """

    breakpoints: tuple
    pieces: tuple
    g: float
    source: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.breakpoints) != len(self.pieces) or not self.pieces:
            raise GrammarError("need one expression per piece")
        prev = 0.0
        for b in self.breakpoints:
            if not b > prev:
                raise GrammarError(f"breakpoints must increase strictly within (0, g], got {self.breakpoints}")
            prev = b
        if not math.isclose(self.breakpoints[-1], self.g, rel_tol=1e-12, abs_tol=0.0):
            raise GrammarError(f"pieces must cover (0, g]; last breakpoint {self.breakpoints[-1]} != g = {self.g}")

    @property
    def is_constant(self) -> bool:
        if any(p.depends_on_eps() for p in self.pieces):
            return False
        vals = [float(p.evaluate(1.0, self.g)) for p in self.pieces]
        return all(v == vals[0] for v in vals)

    def __call__(self, eps):
        x = np.asarray(eps, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        lo = -np.inf
        for b, expr in zip(self.breakpoints[:-1], self.pieces[:-1]):
            mask = (x > lo) & (x <= b)
            if mask.any():
                out[mask] = expr.evaluate(x[mask], self.g)
            lo = b
        mask = x > lo
        if mask.any():
            out[mask] = self.pieces[-1].evaluate(x[mask], self.g)
        return float(out[0]) if scalar else out

    def to_config(self) -> list:
        return [p.to_text() for p in self.pieces]


def piecewise(breakpoints: Sequence, exprs: Sequence, g: float) -> PiecewiseFunction:
    """Build a :class:`PiecewiseFunction`; breakpoints may be expressions in ``g``."""
    bps = []
    for b in breakpoints:
        e = parse(b)
        if e.depends_on_eps():
            raise GrammarError(f"breakpoint {b!r} may not depend on eps")
        bps.append(float(e.evaluate(0.0, g)))
    parsed = tuple(parse(x) for x in exprs)
    return PiecewiseFunction(tuple(bps), parsed, float(g), source=tuple(str(x) for x in exprs))
