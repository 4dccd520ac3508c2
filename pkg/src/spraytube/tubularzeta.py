"""Tubular zeta function of a spray, its head/tail split and its residues.

For a self-similar spray the tail carries the factor ``zeta_L(s)`` in closed
form, so ``zeta_T = head + tail`` is meromorphic in the whole plane.  The
head is a finite sum over the ``J(eps)`` tiles that are not yet full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import FractalSpray, ScaleMultiset, ScalingDim, SteinerLikeRep
from .errors import (
    AtPole,
    EpsOutOfRange,
    IntegerSingularity,
    InvalidSystem,
    NonConvergent,
    ScalingIntegerCollision,
)
from .scalingzeta import residue_at, zeta_at_integer, zeta_eval, zeta_series_eval

INT_GUARD = 1e-10
DEFAULT_FLOOR = 1e-6


def _guard_integers(s, d: int):
    s = np.asarray(s, dtype=complex)
    for k in range(d + 1):
        if np.any(np.abs(s - k) < INT_GUARD):
            raise IntegerSingularity(f"s is within {INT_GUARD} of the integer pole {k}; use a residue")
    return s


def _out(x):
    return complex(x) if np.ndim(x) == 0 else x


@dataclass
class TubularZetaContext:
    """Spray data cached for repeated evaluation of ``zeta_T(eps, s)``.

    Scales are materialized once down to ``eps_floor`` (a scale, so tiles
    with ``l_j > eps_floor`` are known); smaller ``eps`` trigger a fresh
    enumeration rather than a silent truncation.
    """

    spray: FractalSpray
    eps_floor: float = DEFAULT_FLOOR
    _ms: ScaleMultiset = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.spray.generators) != 1:
            raise InvalidSystem("build one context per generator")
        string = self.spray.string
        floor = self.eps_floor
        if string.is_finite:
            floor = max(floor, string.complete_above)
        self._ms = string.multiset(floor)
        self._v, self._c = self._ms.as_arrays()

    @property
    def rep(self) -> SteinerLikeRep:
        return self.spray.generators[0]

    @property
    def d(self) -> int:
        return self.rep.d

    @property
    def g(self) -> float:
        return self.rep.g

    @property
    def lam(self) -> float:
        return self.rep.lam

    @property
    def system(self):
        return self.spray.system

    def active_scales(self, eps: float):
        """Values and counts of the scales with ``l * g > eps``."""
        x = eps / self.g
        if x < self._ms.floor:
            ms = self.spray.string.multiset(x)
            v, c = ms.as_arrays()
        else:
            v, c = self._v, self._c
        keep = v > x
        return v[keep], c[keep]

    def zeta_L(self, s):
        """Scaling zeta function, meromorphic for self-similar strings."""
        string = self.spray.string
        if string.source == "self_similar":
            return zeta_eval(string.system, s)
        if string.source == "explicit":
            v, c = string.full().as_arrays()
            s_arr = np.asarray(s, dtype=complex)
            out = (c * np.exp(np.multiply.outer(s_arr, np.log(v)))).sum(axis=-1)
            return _out(out)
        s_arr = np.asarray(s, dtype=complex)
        vals = [zeta_series_eval(string, complex(x)) for x in s_arr.ravel()]
        return _out(np.array(vals).reshape(s_arr.shape))

    def zeta_L_at_integer(self, k: int) -> float:
        if self.spray.string.source == "self_similar":
            return zeta_at_integer(self.spray.string.system, k)
        return float(np.real(self.zeta_L(float(k))))

    def zeta_L_residue(self, omega: complex) -> complex:
        if self.system is None:
            raise InvalidSystem("scaling residues need a self-similar system")
        return residue_at(self.system, omega)


def M_s(rep: SteinerLikeRep, s):
    """``sum_{k<d} g**(s-k) (d-k) kappa_k(G) / (s-k)``."""
    s = np.asarray(s, dtype=complex)
    d, g = rep.d, rep.g
    out = np.zeros(s.shape, dtype=complex)
    for k in range(d):
        if rep.kappa_const[k] != 0.0:
            out = out + g ** (s - k) * (d - k) * rep.kappa_const[k] / (s - k)
    return out


def zeta_G_head(rep: SteinerLikeRep, eps: float, s):
    s = _guard_integers(s, rep.d)
    if eps >= rep.g:
        return _out(np.zeros(s.shape, dtype=complex))
    d, g = rep.d, rep.g
    f = rep.f_values(eps)
    out = np.zeros(s.shape, dtype=complex)
    for k in range(d + 1):
        if f[k] != 0.0:
            out = out + g ** (s - k) * f[k] / (s - k)
    return _out(eps ** (d - s) * out)


def zeta_G_tail(rep: SteinerLikeRep, eps: float, s):
    s = _guard_integers(s, rep.d)
    d = rep.d
    return _out(eps ** (d - s) * M_s(rep, s) / (d - s))


def zeta_G(rep: SteinerLikeRep, eps: float, s):
    """Tubular zeta function of the generator alone (head plus tail)."""
    if not eps > 0:
        raise EpsOutOfRange("eps must be positive")
    return _out(np.asarray(zeta_G_head(rep, eps, s)) + np.asarray(zeta_G_tail(rep, eps, s)))


def generator_residue_head(rep: SteinerLikeRep, eps: float, k: int) -> float:
    """Residue of the generator head at ``s = k``: ``eps**(d-k) f_k(eps)``."""
    if eps >= rep.g:
        return 0.0
    return float(eps ** (rep.d - k) * rep.f_values(eps)[k])


def generator_residue_tail(rep: SteinerLikeRep, eps: float, k: int) -> float:
    d = rep.d
    if k < d:
        return float(eps ** (d - k) * rep.kappa_const[k])
    return float(rep.kappa_const[d] - rep.lam)


def zeta_head(ctx: TubularZetaContext, eps: float, s):
    """Finite head sum over the ``J(eps)`` unsaturated tiles."""
    if not eps > 0:
        raise EpsOutOfRange("eps must be positive")
    rep = ctx.rep
    d, g = rep.d, rep.g
    s = _guard_integers(s, d)
    v, c = ctx.active_scales(eps)
    if v.size == 0:
        return _out(np.zeros(s.shape, dtype=complex))
    f = rep.f_values(eps / v)  # (d+1, n)
    vs = c * np.exp(np.multiply.outer(s, np.log(v)))  # (..., n)
    out = np.zeros(s.shape, dtype=complex)
    for k in range(d + 1):
        if np.any(f[k] != 0.0):
            out = out + g ** (s - k) / (s - k) * (vs @ f[k])
    return _out(eps ** (d - s) * out)


def zeta_tail(ctx: TubularZetaContext, eps: float, s):
    if not eps > 0:
        raise EpsOutOfRange("eps must be positive")
    rep = ctx.rep
    s = _guard_integers(s, rep.d)
    z = np.asarray(ctx.zeta_L(s))
    return _out(np.asarray(zeta_G_tail(rep, eps, s)) * z)


def zeta_T(ctx: TubularZetaContext, eps: float, s):
    """``zeta_T(eps, s)`` as head plus tail."""
    return _out(np.asarray(zeta_head(ctx, eps, s)) + np.asarray(zeta_tail(ctx, eps, s)))


def _as_omega(pole):
    if isinstance(pole, ScalingDim):
        return pole.omega, pole.residue
    return complex(pole), None


def residue_tail_at(ctx: TubularZetaContext, pole, eps: float):
    """Residue of ``zeta_tail(eps, .)`` at a scaling pole or an integer ``k``.

    Integers are passed as Python ``int``; anything else is taken to be a
    scaling complex dimension.
    """
    rep = ctx.rep
    d = rep.d
    if isinstance(pole, (int, np.integer)):
        k = int(pole)
        if not 0 <= k <= d:
            raise IntegerSingularity(f"{k} is not an integer dimension in 0..{d}")
        try:
            zk = complex(ctx.zeta_L_at_integer(k))
        except AtPole:
            raise ScalingIntegerCollision(f"integer {k} is also a scaling pole") from None
        # zeta_L is real on the real axis
        if k < d:
            return zk.real * eps ** (d - k) * rep.kappa_const[k]
        return zk.real * (rep.kappa_const[d] - rep.lam)
    omega, res = _as_omega(pole)
    for k in range(d + 1):
        if abs(omega - k) < INT_GUARD:
            raise ScalingIntegerCollision(f"scaling pole {omega} coincides with integer {k}")
    if res is None:
        res = ctx.zeta_L_residue(omega)
    return complex(eps ** (d - omega) / (d - omega) * res * complex(M_s(rep, omega)))


def residue_head_at_k(ctx: TubularZetaContext, eps: float, k: int) -> float:
    """``eps**(d-k) sum_{j <= J} l_j**k f_k(eps/l_j)``."""
    rep = ctx.rep
    d = rep.d
    v, c = ctx.active_scales(eps)
    if v.size == 0:
        return 0.0
    f = rep.f_values(eps / v)[k]
    return float(eps ** (d - k) * math.fsum(c * v ** k * f))


def contour_residue(f: Callable, center: complex, radius: float, panels: int = 32,
                    tol: float = 1e-9, max_panels: int = 1 << 15,
                    other_poles: Optional[Sequence[complex]] = None) -> complex:
    """``(1/2 pi i)`` times the integral of ``f`` around a circle, by trapezoids.

    Panels double until the estimate moves by less than ``tol`` relative to
    its size.  ``f`` may be vectorized; scalar functions are mapped.
    """
    if other_poles is not None:
        for p in other_poles:
            if 0 < abs(complex(p) - center) <= radius:
                raise ValueError(f"another pole {p} lies inside the contour")
    prev = None
    n = panels
    while n <= max_panels:
        theta = 2 * math.pi * np.arange(n) / n
        z = center + radius * np.exp(1j * theta)
        try:
            vals = np.asarray(f(z), dtype=complex)
            if vals.shape != z.shape:
                raise ValueError
        except (TypeError, ValueError):
            vals = np.array([complex(f(complex(x))) for x in z])
        est = complex(np.mean(vals * (z - center)))
        if prev is not None:
            scale = max(abs(est), 1e-300)
            if abs(est - prev) <= tol * scale or abs(est - prev) <= 1e-15 * float(np.max(np.abs(vals))) * radius:
                return est
        prev = est
        n *= 2
    raise NonConvergent(f"contour residue at {center} did not settle by {max_panels} panels")


def safe_radius(center: complex, poles: Sequence[complex], cap: float = 0.25) -> float:
    """Radius keeping every other pole well outside the circle."""
    dist = [abs(complex(p) - center) for p in poles if abs(complex(p) - center) > 1e-12]
    if not dist:
        return cap
    return min(cap, 0.4 * min(dist))
