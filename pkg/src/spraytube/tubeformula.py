"""Pointwise tube formulas assembled from residues of the tubular zeta function.

For ``0 < eps < g`` and a self-similar spray::

    V(eps) = sum_w c_w eps**(d-w) + sum_k (c_k + e_k(eps)) eps**(d-k)

with ``c_w = res(zeta_L; w) M_w(G) / (d - w)``, ``c_k = kappa_k(G) zeta_L(k)``
and ``e_k`` the finite head sums.  The scaling sum is truncated
symmetrically in ``Im w`` so partial sums stay real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Screen
from .errors import (
    AtPole,
    EpsOutOfRange,
    InvalidSystem,
    NonConvergent,
    NotMonophase,
    NotSimple,
    ScalingIntegerCollision,
    ScreenPlacement,
    ScreenThroughPole,
)
from .scalingzeta import (
    LatticeStructure,
    Window,
    complex_dimensions,
    lattice_classify,
    lattice_lines,
    pole_strip,
    residue_at,
    zeta_eval,
)
from .tubularzeta import INT_GUARD, M_s, TubularZetaContext, zeta_tail

DROP_TOL = 1e-300
IMAG_TOL = 1e-10
SCREEN_MARGIN = 1e-3


@dataclass(frozen=True)
class TruncationSpec:
    """Lattice: keep poles with ``|Im w| <= (N + 1/2) p``.  Nonlattice: ``|Im w| <= T``."""

    N: int = 10_000
    T: float = 100.0


@dataclass(frozen=True)
class TubeExpansion:
    """Residue data of one single-generator spray.

    ``bound_lines`` holds ``(Re w, C)`` pairs such that the omitted scaling
    terms are at most ``sum C eps**(d - Re w)`` in absolute value.
    """

    omegas: np.ndarray
    c_omega: np.ndarray
    integer_terms: tuple
    constant: float
    d: int
    truncation: TruncationSpec
    bound_lines: tuple
    rigorous_bound: bool
    dropped: int = 0
    provenance: str = ""
    lattice: object = None
    line_of: np.ndarray = field(default=None, repr=False)

    @property
    def scaling_terms(self) -> list:
        return list(zip(self.omegas.tolist(), self.c_omega.tolist()))

    def trunc_bound(self, eps: float) -> float:
        return math.fsum(C * eps ** (self.d - re) for re, C in self.bound_lines)

    def scaling_sum(self, eps: float) -> complex:
        terms = self.c_omega * np.exp((self.d - self.omegas) * math.log(eps))
        return complex(math.fsum(terms.real), math.fsum(terms.imag))


def _check_self_similar(ctx: TubularZetaContext):
    if ctx.system is None:
        raise InvalidSystem("tube formulas need a spray backed by a self-similar system")
    return ctx.system


def coeff_c_omega(ctx: TubularZetaContext, omega, residue: Optional[complex] = None):
    """``res(zeta_L; w) / (d - w) * M_w(G)``; vectorized over ``omega``."""
    sysm = _check_self_similar(ctx)
    w = np.asarray(omega, dtype=complex)
    d = ctx.d
    for k in range(d + 1):
        if np.any(np.abs(w - k) < INT_GUARD):
            raise ScalingIntegerCollision(f"scaling pole coincides with integer {k}")
    if residue is None:
        res = np.vectorize(lambda z: residue_at(sysm, complex(z)), otypes=[complex])(w)
    else:
        res = np.asarray(residue, dtype=complex)
    out = res * M_s(ctx.rep, w) / (d - w)
    return complex(out) if out.ndim == 0 else out


def coeff_c_k(ctx: TubularZetaContext, k: int) -> float:
    """``kappa_k(G) zeta_L(k)``."""
    try:
        z = ctx.zeta_L_at_integer(k)
    except AtPole:
        raise AtPole(f"integer {k} is a scaling pole") from None
    return z * ctx.rep.kappa_const[k]


def coeff_e_k(ctx: TubularZetaContext, k: int, eps: float) -> float:
    """``sum_{j <= J} l_j**k (kappa_k(G, eps/l_j) - kappa_k(G))``."""
    v, c = ctx.active_scales(eps)
    if v.size == 0:
        return 0.0
    f = ctx.rep.f_values(eps / v)[k]
    return math.fsum(c * v ** k * f)


def _envelope_constant(rep, re: float) -> float:
    d, g = rep.d, rep.g
    return math.fsum(g ** (re - k) * (d - k) * abs(rep.kappa_const[k]) for k in range(d))


def expand(ctx: TubularZetaContext, trunc: TruncationSpec = TruncationSpec()) -> TubeExpansion:
    """Collect the residue coefficients of a single-generator spray."""
    cache = ctx.__dict__.setdefault("_expansions", {})
    if trunc in cache:
        return cache[trunc]
    sysm = _check_self_similar(ctx)
    rep = ctx.rep
    d = rep.d
    lat = lattice_classify(sysm)
    omegas = []
    res = []
    line_of = []
    bound_lines = []
    if isinstance(lat, LatticeStructure):
        p = lat.period
        H = (trunc.N + 0.5) * p
        for line in lattice_lines(sysm, lat):
            if not line.simple:
                raise NotSimple(f"poles on the line Re s = {line.base.real} are not simple")
            b = line.base
            n = np.arange(math.ceil((-H - b.imag) / p), math.floor((H - b.imag) / p) + 1)
            w = b.real + 1j * (b.imag + n * p)
            omegas.append(w)
            res.append(np.full(w.shape, line.residue))
            line_of.append(np.full(w.shape, line.index))
            C = abs(line.residue) * _envelope_constant(rep, b.real)
            # omitted |Im w| > (N + 1/2) p: sum over m > N of C / ((m - 1/2) p)**2, both signs
            bound_lines.append((b.real, 2 * C / (p * p * trunc.N)))
        rigorous = True
        prov = f"lattice r={lat.base!r} k={lat.exponents} N={trunc.N}"
    else:
        Dl, D = pole_strip(sysm)
        dims = complex_dimensions(sysm, Window(Dl - 1e-6, D + 1e-6, trunc.T), lattice=lat)
        for sd in dims.scaling:
            if not sd.simple:
                raise NotSimple(f"pole {sd.omega} is not simple")
        w = np.array([sd.omega for sd in dims.scaling], dtype=complex)
        omegas.append(w)
        res.append(np.array([sd.residue for sd in dims.scaling], dtype=complex))
        line_of.append(np.full(w.shape, -1))
        rigorous = False
        prov = f"nonlattice T={trunc.T} roots={len(w)}"
    w = np.concatenate(omegas) if omegas else np.zeros(0, dtype=complex)
    r = np.concatenate(res) if res else np.zeros(0, dtype=complex)
    lo = np.concatenate(line_of) if line_of else np.zeros(0, dtype=int)
    c = coeff_c_omega(ctx, w, r) if w.size else np.zeros(0, dtype=complex)
    c = np.atleast_1d(c)
    keep = np.abs(c) >= DROP_TOL
    dropped = int(np.count_nonzero(~keep))
    w, c, lo = w[keep], c[keep], lo[keep]
    if not isinstance(lat, LatticeStructure):
        bound_lines = _nonlattice_envelope(w, c, trunc.T)
    ints = []
    for k in range(d + 1):
        try:
            ints.append((k, coeff_c_k(ctx, k)))
        except AtPole:
            raise ScalingIntegerCollision(f"integer {k} is also a scaling pole") from None
    exp = TubeExpansion(w, c, tuple(ints), rep.lam * ctx.zeta_L_at_integer(d), d, trunc,
                        tuple(bound_lines), rigorous, dropped, prov, lat, lo)
    cache[trunc] = exp
    return exp


def _nonlattice_envelope(w, c, T):
    """Heuristic bound for omitted poles with ``|Im w| > T``.

    Fits ``C = max |c_w| (Im w)**2`` over the found poles and assumes the
    pole density per unit height observed in the window persists.
    """
    if w.size == 0 or T <= 0:
        return ()
    big = np.abs(w.imag) > 1.0
    if not np.any(big):
        return ()
    C = float(np.max(np.abs(c[big]) * w.imag[big] ** 2))
    density = w.size / (2 * T)
    re = float(np.max(w.real))
    # sum over both signs of density * C / t**2 for t > T
    return ((re, 2 * density * C / T),)


def _assemble(ctx, exp: TubeExpansion, eps: float, with_head: bool) -> float:
    d = exp.d
    s = exp.scaling_sum(eps)
    terms = [s.real]
    for k, ck in exp.integer_terms:
        ek = coeff_e_k(ctx, k, eps) if with_head else 0.0
        terms.append((ck + ek) * eps ** (d - k))
    value = math.fsum(terms)
    if abs(s.imag) > IMAG_TOL * max(abs(value), 1e-300):
        raise NonConvergent(f"scaling sum has imaginary part {s.imag:.3g} at eps={eps}")
    return value


def exact_tube(ctx: TubularZetaContext, eps: float, trunc: TruncationSpec = TruncationSpec()) -> tuple:
    """``(value, trunc_bound)`` of the exact tube formula for ``0 < eps < g``."""
    if not 0 < eps < ctx.g:
        raise EpsOutOfRange(f"exact tube formula needs 0 < eps < g = {ctx.g}, got {eps!r}")
    exp = expand(ctx, trunc)
    return _assemble(ctx, exp, eps, True), exp.trunc_bound(eps)


def monophase_tube(ctx: TubularZetaContext, eps: float, trunc: TruncationSpec = TruncationSpec()) -> tuple:
    """Same as :func:`exact_tube` with the head terms skipped."""
    if not ctx.rep.monophase:
        raise NotMonophase(f"generator {ctx.rep.name!r} is not monophase")
    if not 0 < eps < ctx.g:
        raise EpsOutOfRange(f"tube formula needs 0 < eps < g = {ctx.g}, got {eps!r}")
    exp = expand(ctx, trunc)
    # e_k vanish identically, so adding 0.0 keeps the result bit-identical
    return _assemble(ctx, exp, eps, False), exp.trunc_bound(eps)


def saturated_tube(ctx: TubularZetaContext) -> float:
    """Volume for ``eps >= g``: every tile is full."""
    return ctx.rep.lam * ctx.zeta_L_at_integer(ctx.d)


def tube_value(ctx: TubularZetaContext, eps: float, trunc: TruncationSpec = TruncationSpec()) -> tuple:
    """``(value, bound, provenance)`` over the whole range ``eps > 0``."""
    if eps >= ctx.g:
        return saturated_tube(ctx), 0.0, "saturated: eps >= g, zeta_L(d) lambda_d(G)"
    v, b = exact_tube(ctx, eps, trunc)
    return v, b, "residue sum"


# ------------------------------------------------------------ error term


def _check_screen(ctx, exp: TubeExpansion, screen: Screen):
    sysm = _check_self_similar(ctx)
    sigma = screen.abscissa
    D = sysm.moran
    if not sigma < D:
        raise ScreenPlacement(f"screen abscissa {sigma} must lie left of D = {D}")
    for k in range(ctx.d + 1):
        if abs(sigma - k) < SCREEN_MARGIN:
            raise ScreenThroughPole(f"screen at {sigma} passes through the integer pole {k}")
    lat = exp.lattice
    if isinstance(lat, LatticeStructure):
        reals = [ln.base.real for ln in lattice_lines(sysm, lat)]
    else:
        Dl, _ = pole_strip(sysm)
        if Dl - SCREEN_MARGIN < sigma < D + SCREEN_MARGIN:
            band = Window(sigma - SCREEN_MARGIN, sigma + SCREEN_MARGIN, screen.height)
            reals = [sd.omega.real for sd in complex_dimensions(sysm, band, lattice=lat).scaling]
        else:
            reals = []
    for re in reals:
        if abs(sigma - re) < SCREEN_MARGIN:
            raise ScreenThroughPole(f"screen at {sigma} is within {SCREEN_MARGIN} of poles at Re s = {re}")


def _zeta_sup_on_line(sysm, sigma: float, lat, T: float) -> float:
    """Upper bound for ``|zeta_L(sigma + i t)|`` over all real ``t``."""
    logs = np.log(np.asarray(sysm.ratios))
    lip = float(np.sum(np.exp(sigma * logs) * np.abs(logs)))
    if isinstance(lat, LatticeStructure):
        span = lat.period
    else:
        span = max(10.0 * T, 1e3)
    n = 1 << 14
    while True:
        t = np.linspace(0.0, span, n + 1)
        m = float(np.min(np.abs(1.0 - sysm.phi(sigma + 1j * t))))
        slack = lip * span / n / 2
        if m - slack > 0.5 * m or n >= 1 << 22:
            break
        n *= 4
    low = m - slack
    if low <= 0:
        raise ScreenThroughPole(f"cannot bound zeta_L away from poles on Re s = {sigma}")
    return 1.0 / low


def _simpson_batch(fun, a, b):
    m = 0.5 * (a + b)
    l = 0.5 * (a + m)
    r = 0.5 * (m + b)
    pts = np.stack([a, l, m, r, b])
    vals = fun(pts.ravel()).reshape(pts.shape)
    h = b - a
    s1 = h / 6 * (vals[0] + 4 * vals[2] + vals[4])
    s2 = h / 12 * (vals[0] + 4 * vals[1] + 2 * vals[2] + 4 * vals[3] + vals[4])
    return s1, s2


def adaptive_simpson(fun, a: float, b: float, tol: float, initial: int = 1024,
                     max_intervals: int = 4_000_000) -> tuple:
    """Vectorized adaptive Simpson rule; returns ``(integral, error_estimate)``.

    Each panel is split until ``|S2 - S1| / 15`` is below its share of
    ``tol``; accepted panels contribute the Richardson-extrapolated value.
    """
    edges = np.linspace(a, b, initial + 1)
    lo, hi = edges[:-1], edges[1:]
    total = []
    err = 0.0
    seen = 0
    while lo.size:
        s1, s2 = _simpson_batch(fun, lo, hi)
        e = np.abs(s2 - s1) / 15
        ok = e <= tol * (hi - lo) / (b - a)
        tiny = (hi - lo) <= (b - a) * 1e-12
        done = ok | tiny
        if np.any(tiny & ~ok):
            raise NonConvergent("adaptive Simpson could not reach the tolerance")
        total.append(s2[done] + (s2[done] - s1[done]) / 15)
        err += float(np.sum(e[done]))
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo[~done], mid[~done]]), np.concatenate([mid[~done], hi[~done]])
        seen += lo.size
        if seen > max_intervals:
            raise NonConvergent("adaptive Simpson exceeded its interval budget")
    vals = np.concatenate(total) if total else np.zeros(0)
    return complex(math.fsum(vals.real), math.fsum(vals.imag)), err


@dataclass(frozen=True)
class ScreenIntegral:
    R: float
    quad_err: float
    trunc_err: float

    @property
    def quad_bound(self) -> float:
        return self.quad_err + self.trunc_err


def screen_integral(ctx: TubularZetaContext, eps: float, screen: Screen,
                    quad_tol: float = 1e-12) -> ScreenIntegral:
    """``R(eps) = (1/2 pi i) int_{sigma - iT}^{sigma + iT} zeta_tail(eps, s) ds`` with bounds."""
    exp = expand(ctx, TruncationSpec())
    _check_screen(ctx, exp, screen)
    sigma, T = screen.abscissa, screen.height
    d = ctx.d

    def integrand(t):
        return np.asarray(zeta_tail(ctx, eps, sigma + 1j * t))

    # conjugate symmetry: the integral over [-T, T] is twice the real part over [0, T]
    val, err = adaptive_simpson(integrand, 0.0, T, tol=quad_tol * math.pi)
    R = val.real / math.pi
    zmax = _zeta_sup_on_line(ctx.system, sigma, exp.lattice, T)
    C = _envelope_constant(ctx.rep, sigma)
    trunc = eps ** (d - sigma) * zmax * C / (math.pi * T)
    return ScreenIntegral(R, err / math.pi, trunc)


def screen_error_term(ctx: TubularZetaContext, eps: float, screen: Screen,
                      quad_tol: float = 1e-12) -> tuple:
    """``(R, quad_bound)``; the bound covers quadrature and the cut at height T."""
    si = screen_integral(ctx, eps, screen, quad_tol)
    return si.R, si.quad_bound


def visible_sum(ctx: TubularZetaContext, eps: float, sigma: float,
                trunc: TruncationSpec = TruncationSpec()) -> float:
    """Residues of ``zeta_T`` right of the screen (``lambda_d zeta_L(d)`` included)."""
    exp = expand(ctx, trunc)
    d = exp.d
    right = exp.omegas.real > sigma
    terms = exp.c_omega[right] * np.exp((d - exp.omegas[right]) * math.log(eps))
    parts = [math.fsum(terms.real)]
    for k, ck in exp.integer_terms:
        if k > sigma:
            parts.append((ck + coeff_e_k(ctx, k, eps)) * eps ** (d - k))
    return math.fsum(parts)


def tube_with_error(ctx: TubularZetaContext, eps: float, screen: Screen,
                    trunc: TruncationSpec = TruncationSpec(), quad_tol: float = 1e-12) -> float:
    """Visible residues plus the screen error term."""
    if not ctx.rep.monophase and not screen.abscissa < 0:
        raise ScreenPlacement("non-monophase generators need a screen left of 0")
    if not 0 < eps < ctx.g:
        raise EpsOutOfRange(f"tube formula needs 0 < eps < g = {ctx.g}, got {eps!r}")
    R, _ = screen_error_term(ctx, eps, screen, quad_tol)
    return visible_sum(ctx, eps, screen.abscissa, trunc) + R
