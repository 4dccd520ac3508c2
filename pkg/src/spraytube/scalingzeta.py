"""Scaling zeta functions, the Moran dimension and the poles of ``1/(1 - phi)``.

Here ``phi(s) = sum_n r_n**s``.  Lattice systems (all ratios integer powers
of one base ``r``) have their poles on finitely many vertical lines, found
from the roots of a polynomial in ``z = r**s``.  Nonlattice systems are
searched box by box, counting zeros with the argument principle and
polishing each one with Newton's method.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Optional, Union

import numpy as np

from .core import (
    ComplexDimensionSet,
    FractalString,
    ScalingDim,
    SelfSimilarSystem,
    _compress,
)
from .errors import (
    AbscissaViolation,
    AtPole,
    BoxCountMismatch,
    NonConvergent,
    NotSimple,
    UnmaterializableString,
)

POLE_TOL = 1e-13
SIMPLE_TOL = 1e-8
ROOT_RESIDUAL = 1e-10
LATTICE_TOL = 1e-12
LATTICE_MAX_DEN = 64


def moran_dimension(system: SelfSimilarSystem) -> float:
    """Unique real solution ``D`` of ``sum r_n**D = 1``."""
    return system.moran


def zeta_eval(system: SelfSimilarSystem, s):
    """``1 / (1 - phi(s))``; accepts scalars or arrays."""
    den = 1.0 - system.phi(s)
    if np.any(np.abs(den) < POLE_TOL):
        raise AtPole(f"s={s!r} is a pole of the scaling zeta function; use residue_at")
    out = 1.0 / den
    return complex(out) if np.ndim(out) == 0 else out


def _as_rational(x: float, max_den: int = 10**6) -> Optional[Fraction]:
    q = Fraction(x).limit_denominator(max_den)
    return q if abs(float(q) - x) <= 2 * math.ulp(x) else None


def zeta_at_integer(system: SelfSimilarSystem, k: int) -> float:
    """``zeta_L(k)`` for an integer ``k``, in exact arithmetic when the ratios are rational.

    ``1 - sum r_n**k`` cancels badly in floating point (``1 - 8/9`` loses a
    digit), so ratios that round-trip through a small fraction are treated
    as that fraction.
    """
    qs = [_as_rational(r) for r in system.ratios]
    if all(q is not None for q in qs):
        den = 1 - sum(q ** k for q in qs)
        if den == 0:
            raise AtPole(f"s={k} is a pole of the scaling zeta function")
        return float(1 / den)
    return float(np.real(zeta_eval(system, float(k))))


@dataclass(frozen=True)
class SeriesResult:
    value: complex
    remainder: float
    terms: int


def zeta_series_eval(string: FractalString, s: complex, rel_tol: float = 1e-10,
                     margin: float = 0.05) -> complex:
    """Partial sums of ``sum_j l_j**s`` with a certified remainder."""
    return zeta_series_bound(string, s, rel_tol, margin).value


def zeta_series_bound(string: FractalString, s: complex, rel_tol: float = 1e-10,
                      margin: float = 0.05) -> SeriesResult:
    s = complex(s)
    if string.source == "self_similar":
        sysm = string.system
        D = sysm.moran
        if s.real <= D + margin:
            raise AbscissaViolation(f"Re s = {s.real} must exceed D + {margin} = {D + margin}")
        q = float(np.real(sysm.phi(s.real)))
        ratio_ms = _compress((r, 1) for r in sysm.ratios)
        level = [(1.0, 1)]
        total = 0j
        m = 0
        while True:
            v = np.array([x for x, _ in level])
            c = np.array([float(n) for _, n in level])
            total += complex(np.sum(c * np.exp(s * np.log(v))))
            tail = q ** (m + 1) / (1.0 - q)
            if tail <= rel_tol * abs(total):
                return SeriesResult(total, tail, m + 1)
            if m > 10_000:
                raise NonConvergent("series did not reach the requested tolerance")
            level = _compress((x * r, n * k) for x, n in level for r, k in ratio_ms)
            m += 1
    full = string.full()
    v, c = full.as_arrays()
    value = complex(math.fsum(np.real(c * v ** s)) + 1j * math.fsum(np.imag(c * v ** s)))
    if string.source == "explicit":
        return SeriesResult(value, 0.0, len(v))
    area = string.meta.get("zeta2")
    if area is None:
        raise UnmaterializableString("no closed form for the unseen part of this string")
    if s.real < 2.0:
        raise AbscissaViolation("the remainder bound for packing strings needs Re s >= 2")
    missing = max(area - math.fsum(c * v * v), 0.0)
    lmin = string.complete_above if string.complete_above > 0 else float(v[-1])
    bound = lmin ** (s.real - 2.0) * missing
    if bound > rel_tol * abs(value):
        raise NonConvergent(f"remainder bound {bound:.3g} exceeds requested tolerance")
    return SeriesResult(value, bound, len(v))


@dataclass(frozen=True)
class LatticeStructure:
    base: float
    exponents: tuple
    period: float

    @property
    def kind(self) -> str:
        return "lattice"


@dataclass(frozen=True)
class Nonlattice:
    reason: str = ""

    @property
    def kind(self) -> str:
        return "nonlattice"


def lattice_classify(system: SelfSimilarSystem, tol: float = LATTICE_TOL,
                     max_den: int = LATTICE_MAX_DEN) -> Union[LatticeStructure, Nonlattice]:
    """Decide whether every ``log r_n / log r_1`` is a small-denominator rational."""
    logs = [math.log(r) for r in system.ratios]
    fracs = []
    for lg in logs:
        x = lg / logs[0]
        q = Fraction(x).limit_denominator(max_den)
        if abs(float(q) - x) > tol * max(1.0, abs(x)):
            return Nonlattice(f"log ratio {x!r} has no rational approximation with denominator <= {max_den}")
        fracs.append(q)
    L = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fracs), 1)
    ints = [int(f * L) for f in fracs]
    gg = reduce(math.gcd, ints)
    ks = tuple(k // gg for k in ints)
    log_r = math.fsum(k * lg for k, lg in zip(ks, logs)) / math.fsum(k * k for k in ks)
    r = math.exp(log_r)
    return LatticeStructure(r, ks, 2 * math.pi / -log_r)


def pole_strip(system: SelfSimilarSystem) -> tuple:
    """``(D_l, D)`` bounding the real parts of all poles.

    At a pole ``m r_N**x <= 1 + sum of the other r_n**x`` with ``x = Re s``
    and ``m`` the multiplicity of the smallest ratio; ``D_l`` is where that
    inequality turns into equality.  With a single distinct ratio every pole
    sits on ``Re s = D``.
    """
    rs = system.ratios
    D = system.moran
    rN = rs[-1]
    mult = sum(1 for r in rs if r == rN)
    others = [r for r in rs if r != rN]
    if not others:
        return (D, D)

    def h(x):
        return mult * rN ** x - 1.0 - math.fsum(r ** x for r in others)

    lo = -1.0
    while h(lo) <= 0:
        lo *= 2
        if lo < -1e6:
            return (D, D)
    return (_bisect(h, lo, D), D)


def _bisect(f, lo, hi) -> float:
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def residue_at(system: SelfSimilarSystem, omega: complex) -> complex:
    """Residue of ``1/(1 - phi)`` at a simple pole: ``1 / sum r_n**w log(1/r_n)``."""
    dphi = complex(system.dphi(omega))
    if abs(dphi) <= SIMPLE_TOL:
        raise NotSimple(f"pole at {omega!r} is not simple (|phi'| = {abs(dphi):.3g})")
    return -1.0 / dphi


def residue_lattice(lat: LatticeStructure, omega: complex) -> complex:
    """Lattice form ``1 / (log(1/r) sum_n k_n r**(k_n w))``."""
    lr = math.log(lat.base)
    tot = sum(k * cmath.exp(k * omega * lr) for k in lat.exponents)
    return 1.0 / (-lr * tot)


@dataclass(frozen=True)
class Window:
    re_lo: float
    re_hi: float
    im_max: float

    def contains(self, w: complex, tol: float = 0.0) -> bool:
        return (self.re_lo - tol <= w.real <= self.re_hi + tol) and abs(w.imag) <= self.im_max + tol


@dataclass(frozen=True)
class LatticeLine:
    """Poles ``base + i n p``; the residue is the same at every pole on a line."""

    base: complex
    residue: complex
    simple: bool
    index: int


def lattice_lines(system: SelfSimilarSystem, lat: LatticeStructure) -> list:
    """Vertical pole lines of a lattice system, bases with Im in (-p/2, p/2]."""
    kmax = max(lat.exponents)
    coeffs = np.zeros(kmax + 1)
    for k in lat.exponents:
        coeffs[kmax - k] -= 1.0
    coeffs[kmax] += 1.0
    # coeffs is highest-degree first: -sum z^k + 1
    roots = np.roots(coeffs)
    dcoeffs = np.polyder(coeffs)
    lr = math.log(lat.base)
    p = lat.period
    lines = []
    seen: list = []
    for z in roots:
        z = complex(z)
        for _ in range(50):
            fz = np.polyval(coeffs, z)
            dz = np.polyval(dcoeffs, z)
            if dz == 0:
                break
            step = fz / dz
            z -= step
            if abs(step) <= 1e-16 * max(1.0, abs(z)):
                break
        if any(abs(z - w) <= 1e-9 * max(1.0, abs(w)) for w in seen):
            continue
        seen.append(z)
        s = cmath.log(z) / lr
        # shift into the fundamental band
        n = math.floor(s.imag / p + 0.5)
        im = s.imag - n * p
        if im <= -p / 2:
            im += p
        elif im > p / 2:
            im -= p
        base = complex(s.real, im)
        if abs(base.imag) < 1e-14:
            base = complex(base.real, 0.0)
        dphi = complex(system.dphi(base))
        simple = abs(dphi) > SIMPLE_TOL
        res = -1.0 / dphi if simple else complex("nan")
        lines.append((base, res, simple))
    lines.sort(key=lambda t: (-t[0].real, t[0].imag))
    return [LatticeLine(b, r, sm, i) for i, (b, r, sm) in enumerate(lines)]


def complex_dimensions(system: SelfSimilarSystem, window: Optional[Window] = None,
                       lattice=None, max_depth: int = 12) -> ComplexDimensionSet:
    """Scaling complex dimensions in ``window`` together with their residues.

    The default window is the pole strip with ``|Im| <= 10``.
    """
    if lattice is None:
        lattice = lattice_classify(system)
    Dl, D = pole_strip(system)
    if window is None:
        window = Window(Dl - 1e-6, D + 1e-6, 10.0)
    d = system.ambient_dim
    if isinstance(lattice, LatticeStructure):
        p = lattice.period
        dims = []
        for line in lattice_lines(system, lattice):
            if not window.re_lo - 1e-12 <= line.base.real <= window.re_hi + 1e-12:
                continue
            nmax = math.floor((window.im_max - line.base.imag) / p + 1e-12)
            nmin = math.ceil((-window.im_max - line.base.imag) / p - 1e-12)
            for n in range(nmin, nmax + 1):
                w = complex(line.base.real, line.base.imag + n * p)
                if abs(w.imag) < 1e-14:
                    w = complex(w.real, 0.0)
                dims.append(ScalingDim(w, line.residue, line.simple, n, line.index))
        dims.sort(key=lambda sd: (-sd.omega.real, sd.omega.imag))
        return ComplexDimensionSet(tuple(dims), tuple(range(d + 1)), window, lattice)
    roots = nonlattice_roots(system, window, max_depth=max_depth)
    dims = []
    for w in roots:
        dphi = complex(system.dphi(w))
        simple = abs(dphi) > SIMPLE_TOL
        dims.append(ScalingDim(w, -1.0 / dphi if simple else complex("nan"), simple))
    return ComplexDimensionSet(tuple(dims), tuple(range(d + 1)), window, lattice)


def _winding(system, a, b, c, e, n):
    """(1/2 pi i) of the contour integral of f'/f over the box, n points per edge."""
    # Counterclockwise: bottom, right, top, left; s(t) on each edge.
    t = (np.arange(n) + 0.5) / n
    edges = [
        (a + t * (b - a) + 1j * c, b - a),
        (b + 1j * (c + t * (e - c)), 1j * (e - c)),
        (b - t * (b - a) + 1j * e, -(b - a)),
        (a + 1j * (e - t * (e - c)), -1j * (e - c)),
    ]
    tot = 0j
    mom = 0j
    fmin = np.inf
    for s, ds in edges:
        f = 1.0 - system.phi(s)
        fp = -system.dphi(s)
        fmin = min(fmin, float(np.min(np.abs(f))))
        w = fp / f * ds / n
        tot += np.sum(w)
        mom += np.sum(s * w)
    return tot / (2j * math.pi), mom / (2j * math.pi), fmin


def _count(system, a, b, c, e, n0=64, nmax=1 << 16):
    """Argument-principle zero count with panel doubling until it settles."""
    n = n0
    prev = None
    while n <= nmax:
        val, mom, fmin = _winding(system, a, b, c, e, n)
        if prev is not None:
            k = round(val.real)
            if (abs(val - prev) < 0.25 and abs(val.real - k) < 0.25
                    and abs(val.imag) < 0.25 and abs(prev.real - k) < 0.25):
                return k, mom, fmin
        prev = val
        n *= 2
    raise NonConvergent(f"argument principle did not settle on box [{a},{b}]x[{c},{e}]")


def _newton(system, s, lo_re=-np.inf, hi_re=np.inf, iters=60):
    for _ in range(iters):
        f = 1.0 - complex(system.phi(s))
        fp = -complex(system.dphi(s))
        if fp == 0:
            return None
        step = f / fp
        s = s - step
        if not np.isfinite(s.real) or not np.isfinite(s.imag):
            return None
        if abs(step) <= 1e-15 * max(1.0, abs(s)):
            break
    if abs(1.0 - complex(system.phi(s))) > ROOT_RESIDUAL:
        return None
    return s


def nonlattice_roots(system: SelfSimilarSystem, window: Window, box_height: float = 2.0,
                     max_depth: int = 12) -> list:
    """Zeros of ``1 - phi`` inside ``window``, verified against contour counts."""
    # Contour edges are pushed slightly outward along irrational offsets so
    # that poles sitting exactly on the requested boundary are still enclosed.
    pad = 1e-3 * math.sqrt(2)
    a, b = window.re_lo - pad, window.re_hi + pad * 1.1
    T = window.im_max + pad * 0.7
    nboxes = max(1, math.ceil(2 * T / box_height))
    cuts = np.linspace(-T, T, nboxes + 1)
    found: list = []
    expected = 0
    for c, e in zip(cuts[:-1], cuts[1:]):
        roots, count = _box_roots(system, a, b, float(c), float(e), max_depth)
        expected += count
        found.extend(roots)
    uniq: list = []
    for w in sorted(found, key=lambda z: (z.imag, z.real)):
        if all(abs(w - u) > 1e-8 for u in uniq):
            uniq.append(w)
    if len(uniq) != expected:
        raise BoxCountMismatch(f"Newton found {len(uniq)} roots, argument principle counted {expected}")
    out = [complex(w.real, 0.0) if abs(w.imag) < 1e-12 else w for w in uniq if window.contains(w, 1e-12)]
    out.sort(key=lambda z: (-z.real, z.imag))
    return out


def _box_roots(system, a, b, c, e, depth):
    count, mom, fmin = _count(system, a, b, c, e)
    if count == 0:
        return [], 0
    if count == 1:
        guess = complex(mom)
        for start in (guess, complex((a + b) / 2, (c + e) / 2)):
            w = _newton(system, start)
            if w is not None and a <= w.real <= b and c <= w.imag <= e:
                return [w], 1
    if depth <= 0:
        raise BoxCountMismatch(f"could not isolate {count} roots in [{a},{b}]x[{c},{e}]")
    # split the longer side, offset from the midpoint to dodge symmetric roots
    roots: list = []
    if (b - a) > (e - c):
        m = a + (b - a) * 0.5031
        parts = [(a, m, c, e), (m, b, c, e)]
    else:
        m = c + (e - c) * 0.4987
        parts = [(a, b, c, m), (a, b, m, e)]
    total = 0
    for box in parts:
        r, k = _box_roots(system, *box, depth - 1)
        roots.extend(r)
        total += k
    if total != count:
        raise BoxCountMismatch(f"sub-box counts {total} disagree with parent count {count}")
    return roots, count
