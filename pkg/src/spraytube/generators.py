"""Built-in generator representations, custom reps and the U-shape recurrence."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ConstantFunction, SteinerLikeRep, validate_rep
from .errors import EpsOutOfRange, GrammarError, NoBase, UnknownName, ValidationFailure
from .expressions import Expr, parse, piecewise

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

# Text form of the cross-shaped generator of the Cantor carpet.  Breakpoints
# are written in terms of g and shared by every coefficient.
CANTOR_CARPET_PIECES = [
    {"upto": "g/sqrt(2)", "kappa": ["pi - 8", "12*sqrt(2)*g", "0"]},
    {"upto": "g", "kappa": ["pi - 4*acos(g/(eps*sqrt(2)))",
                            "2*g/eps*sqrt(2*eps**2 - g**2)",
                            "8*g**2"]},
]


def _polygon_like(name: str, d: int, g: float, kappa: Sequence[float], volume: float) -> SteinerLikeRep:
    rep = SteinerLikeRep(d, g, tuple(ConstantFunction(k) for k in kappa),
                         tuple(float(k) for k in kappa), monophase=True, name=name, volume=volume)
    return _validated(rep)


def _validated(rep: SteinerLikeRep, sample_count: int = 200) -> SteinerLikeRep:
    report = validate_rep(rep, sample_count)
    if not report.passed:
        bad = "; ".join(c.name for c in report.failing())
        raise ValidationFailure(f"representation {rep.name!r} failed: {bad}", report)
    return rep


def interval(length: float = 1.0) -> SteinerLikeRep:
    return _polygon_like("interval", 1, length / 2, (2.0, 0.0), length)


def square(side: float = 1.0) -> SteinerLikeRep:
    return _polygon_like("square", 2, side / 2, (-4.0, 4 * side, 0.0), side * side)


def equilateral_triangle(side: float = 1.0) -> SteinerLikeRep:
    return _polygon_like("equilateral_triangle", 2, side / (2 * SQRT3),
                         (-3 * SQRT3, 3 * side, 0.0), SQRT3 / 4 * side * side)


def disk(radius: float = 1.0) -> SteinerLikeRep:
    return _polygon_like("disk", 2, radius, (-math.pi, 2 * math.pi * radius, 0.0),
                         math.pi * radius * radius)


def sierpinski_gasket_gen(size: float = 1.0) -> SteinerLikeRep:
    """Middle (removed) triangle of a side-``size`` gasket: side ``size/2``."""
    rep = equilateral_triangle(size / 2)
    return _renamed(rep, "sierpinski_gasket_gen")


def sierpinski_carpet_gen(size: float = 1.0) -> SteinerLikeRep:
    """Middle square of a side-``size`` carpet: side ``size/3``."""
    return _renamed(square(size / 3), "sierpinski_carpet_gen")


def _renamed(rep: SteinerLikeRep, name: str) -> SteinerLikeRep:
    return SteinerLikeRep(rep.d, rep.g, rep.kappa, rep.kappa_const, rep.monophase, name, rep.volume)


def cantor_carpet_gen(size: float = 1.0) -> SteinerLikeRep:
    """Cross-shaped generator of the Cantor carpet inside a square of side ``size``.

    The cross is the square minus its four corner squares of side ``size/3``;
    its inradius is ``size*sqrt(2)/6``.
    """
    g = size * SQRT2 / 6
    rep = custom_rep(2, g, CANTOR_CARPET_PIECES, name="cantor_carpet_gen",
                     volume=5.0 / 9.0 * size * size)
    return rep


BUILTINS: dict = {
    "interval": interval,
    "square": square,
    "equilateral_triangle": equilateral_triangle,
    "disk": disk,
    "sierpinski_gasket_gen": sierpinski_gasket_gen,
    "sierpinski_carpet_gen": sierpinski_carpet_gen,
    "cantor_carpet_gen": cantor_carpet_gen,
}


def builtin(name: str, size: float = 1.0) -> SteinerLikeRep:
    """Look up a built-in representation by name."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownName(f"unknown builtin generator {name!r}; choose from {sorted(BUILTINS)}") from None
    if not (size > 0 and math.isfinite(size)):
        raise ValidationFailure(f"size must be positive, got {size!r}")
    return factory(float(size))


def custom_rep(d: int, g, pieces: Sequence[dict], name: str = "custom",
               volume: Optional[float] = None, monophase: Optional[bool] = None,
               sample_count: int = 200, validate: bool = True) -> SteinerLikeRep:
    """Build and validate a rep from textual pieces.

    ``pieces`` is a list of ``{"upto": expr, "kappa": [expr_0, ..., expr_d]}``
    in increasing order of ``upto``; the last ``upto`` must equal ``g``.
    """
    gval = float(parse(g).evaluate(0.0, 0.0)) if isinstance(g, str) else float(g)
    if not pieces:
        raise GrammarError("at least one piece is required")
    d = int(d)
    ups = []
    cols: list = [[] for _ in range(d + 1)]
    for p in pieces:
        if not isinstance(p, dict) or "upto" not in p or "kappa" not in p:
            raise GrammarError("each piece needs 'upto' and 'kappa'")
        ks = p["kappa"]
        if len(ks) != d + 1:
            raise GrammarError(f"each piece needs {d + 1} kappa expressions, got {len(ks)}")
        ups.append(p["upto"])
        for k, e in enumerate(ks):
            cols[k].append(e)
    funcs = tuple(piecewise(ups, cols[k], gval) for k in range(d + 1))
    const = all(f.is_constant for f in funcs)
    flag = const if monophase is None else bool(monophase)
    rep = SteinerLikeRep(d, gval, funcs, monophase=flag, name=name, volume=volume)
    if flag and abs(rep.kappa_const[d]) > 0:
        rep = SteinerLikeRep(d, gval, funcs, monophase=False, name=name, volume=volume)
    return _validated(rep, sample_count) if validate else rep


class CallableFunction:
    """Adapter exposing an arbitrary function of eps as a coefficient function."""

    is_constant = False

    def __init__(self, fn: Callable):
        self.fn = fn

    def __call__(self, eps):
        x = np.asarray(eps, dtype=float)
        if x.ndim == 0:
            return float(self.fn(float(x)))
        return np.array([self.fn(float(v)) for v in x.ravel()]).reshape(x.shape)


@dataclass(frozen=True)
class RecurrenceRep:
    """Generator volume defined by ``V(eps) = m V(eps/c) + h(eps)`` on ``[g/c, g)``.

    ``inhom`` is the closed-form ``h`` and ``base`` gives ``V`` on the base
    interval ``[g/c, g)``.  The defaults are the U-shaped carpet generator.
    """

    g: float
    contraction: float = 3.0
    multiplier: float = 9.0
    inhom: Expr = parse("17/9 - eps/9 + (pi - 38/9)*eps**2")
    base: Optional[Callable] = None
    volume: float = 1.0 / 324.0

    def h(self, eps):
        return self.inhom.evaluate(np.asarray(eps, dtype=float), self.g)


def _as_callable(base, g: float):
    if base is None or callable(base):
        return base
    e = parse(base)
    return lambda x, _e=e: _e.evaluate(x, g)


def ushape_tube(rec: RecurrenceRep, eps: float) -> float:
    """``V(G, eps)`` by unrolling the recurrence down from the base interval."""
    base = _as_callable(rec.base, rec.g)
    if base is None:
        raise NoBase("a base-interval function is required to unroll the recurrence")
    g, c, m = rec.g, rec.contraction, rec.multiplier
    if not 0 < eps < g:
        raise EpsOutOfRange(f"eps must lie in (0, g) = (0, {g}), got {eps!r}")
    xs = [float(eps)]
    while xs[-1] < g / c:
        xs.append(xs[-1] * c)
    v = float(base(xs[-1]))
    for x in reversed(xs[:-1]):
        v = (v - float(rec.h(c * x))) / m
    return v


def ushape_forward_residual(rec: RecurrenceRep, eps: float) -> float:
    """``V(c e) - m V(e) - h(c e)``; zero when the recurrence holds at ``e``."""
    c = rec.contraction
    return ushape_tube(rec, c * eps) - rec.multiplier * ushape_tube(rec, eps) - float(rec.h(c * eps))


def ushape_depth(rec: RecurrenceRep, eps: float) -> int:
    """Index ``m`` with ``eps`` in ``[g/c**m, g/c**(m-1))``."""
    m, x = 1, float(eps)
    while x < rec.g / rec.contraction:
        x *= rec.contraction
        m += 1
    return m


def ushape_solid_term(rec: RecurrenceRep, m: int) -> float:
    """Volume of the chambers beyond depth ``m``: ``lambda(G) / multiplier**m``."""
    return rec.volume / rec.multiplier ** m


def recurrence_as_rep(rec: RecurrenceRep, d: int = 2) -> SteinerLikeRep:
    """Wrap a recurrence generator as a rep with ``kappa_d = V`` and the rest zero."""
    base = _as_callable(rec.base, rec.g)
    if base is None:
        raise NoBase("a base-interval function is required")

    def vol(x):
        return ushape_tube(rec, x) if x < rec.g else float(base(rec.g * (1 - 1e-16)))

    kappa = tuple([ConstantFunction(0.0)] * d + [CallableFunction(vol)])
    return SteinerLikeRep(d, rec.g, kappa, monophase=False, name="recurrence", volume=rec.volume)
