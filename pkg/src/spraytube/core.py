"""Domain types and elementary tube-volume evaluations.

Everything here is immutable.  Strings backed by a self-similar system are
materialized lazily, one level of words at a time, with equal scale values
merged into a single entry carrying a multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    EpsOutOfRange,
    Explosion,
    InvalidString,
    InvalidSystem,
    NonFiniteSample,
    UnmaterializableString,
)

# Relative tolerance used to merge equal scale values.
MERGE_RTOL = 1e-12
# Upper bound on the number of distinct scale values kept in memory.
MAX_DISTINCT_SCALES = 2_000_000


def moran_root(ratios: Sequence[float]) -> float:
    """Unique real root of ``sum(r**s) == 1`` by bisection, then Newton."""
    r = np.asarray(ratios, dtype=float)
    logs = np.log(r)

    def phi(x):
        return math.fsum(np.exp(x * logs)) - 1.0

    lo, hi = 0.0, 1.0
    while phi(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise InvalidSystem("Moran equation has no root below 1e6")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if phi(mid) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        f = phi(x)
        df = math.fsum(np.exp(x * logs) * logs)
        if df == 0:
            break
        step = f / df
        if not lo <= x - step <= hi:
            break
        x -= step
    return x


@dataclass(frozen=True)
class SelfSimilarSystem:
    """Scaling ratios of a self-similar tiling in ``R^d``.

    Ratios are stored in descending order.  Construction fails with
    :class:`InvalidSystem` unless ``N >= 2``, every ratio lies in (0, 1) and
    the Moran dimension lies strictly between 0 and ``d``.
    """

    ratios: tuple
    ambient_dim: int

    def __post_init__(self):
        try:
            rs = tuple(sorted((float(r) for r in self.ratios), reverse=True))
        except (TypeError, ValueError):
            raise InvalidSystem(f"ratios must be numbers, got {self.ratios!r}") from None
        if len(rs) < 2:
            raise InvalidSystem("a self-similar system needs at least two ratios")
        if not all(0.0 < r < 1.0 and math.isfinite(r) for r in rs):
            raise InvalidSystem(f"ratios must lie in (0, 1), got {rs}")
        if not (isinstance(self.ambient_dim, (int, np.integer)) and self.ambient_dim >= 1):
            raise InvalidSystem(f"ambient dimension must be a positive integer, got {self.ambient_dim!r}")
        object.__setattr__(self, "ratios", rs)
        object.__setattr__(self, "ambient_dim", int(self.ambient_dim))
        D = moran_root(rs)
        if not 0.0 < D < self.ambient_dim:
            raise InvalidSystem(
                f"Moran dimension {D!r} must lie strictly between 0 and d = {self.ambient_dim}"
            )
        object.__setattr__(self, "_dim", D)

    @property
    def moran(self) -> float:
        return self._dim  # type: ignore[attr-defined]

    def phi(self, s):
        """``sum_n r_n**s`` for scalar or array ``s`` (complex allowed)."""
        s = np.asarray(s, dtype=complex)
        out = np.zeros(s.shape, dtype=complex)
        for r in self.ratios:
            out = out + np.exp(s * math.log(r))
        return out

    def dphi(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros(s.shape, dtype=complex)
        for r in self.ratios:
            lr = math.log(r)
            out = out + lr * np.exp(s * lr)
        return out


@dataclass(frozen=True)
class ScaleMultiset:
    """Distinct scale values (descending) with exact integer multiplicities.

    ``levels`` keeps, for self-similar sources, the per-level contribution
    as ``((value, count), ...)`` so level totals can be audited.
    """

    values: tuple
    counts: tuple
    floor: float = 0.0
    levels: tuple = ()

    def __post_init__(self):
        if len(self.values) != len(self.counts):
            raise InvalidString("values and counts differ in length")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_arrays(self):
        return np.asarray(self.values, dtype=float), np.asarray(self.counts, dtype=float)

    def as_dict(self) -> dict:
        return dict(zip(self.values, self.counts))

    def count_above(self, x: float) -> int:
        return sum(c for v, c in zip(self.values, self.counts) if v > x)

    def above(self, x: float) -> "ScaleMultiset":
        keep = [(v, c) for v, c in zip(self.values, self.counts) if v > x]
        return ScaleMultiset(tuple(v for v, _ in keep), tuple(c for _, c in keep), max(x, self.floor))

    def power_sum(self, s):
        """``sum count * value**s`` for scalar or array ``s``."""
        v, c = self.as_arrays()
        s = np.asarray(s)
        if v.size == 0:
            return np.zeros(s.shape, dtype=np.result_type(s, float))
        lv = np.log(v)
        terms = c * np.exp(np.multiply.outer(s, lv))
        return terms.sum(axis=-1)


def _compress(pairs: Iterable, rtol: float = MERGE_RTOL) -> list:
    """Merge (value, count) pairs whose values agree to ``rtol``."""
    items = sorted(pairs, key=lambda vc: -vc[0])
    out: list = []
    for v, c in items:
        if out and abs(out[-1][0] - v) <= rtol * out[-1][0]:
            out[-1][1] += c
        else:
            out.append([v, c])
    return [(v, c) for v, c in out]


@lru_cache(maxsize=64)
def _enumerate_cached(ratios: tuple, floor: float, max_distinct: int) -> ScaleMultiset:
    ratio_ms = _compress((r, 1) for r in ratios)
    level = [(1.0, 1)]
    levels = []
    total: list = []
    while level and level[0][0] > floor:
        kept = [(v, c) for v, c in level if v > floor]
        levels.append(tuple(kept))
        total.extend(kept)
        if len(total) > max_distinct:
            raise Explosion(
                f"more than {max_distinct} distinct scales above floor {floor:g}; raise the floor"
            )
        nxt = [(v * r, c * m) for v, c in kept for r, m in ratio_ms]
        level = _compress(nxt)
    merged = _compress(total)
    return ScaleMultiset(
        tuple(v for v, _ in merged),
        tuple(int(c) for _, c in merged),
        float(floor),
        tuple(levels),
    )


def enumerate_scales(system: SelfSimilarSystem, floor: float,
                     max_distinct: int = MAX_DISTINCT_SCALES) -> ScaleMultiset:
    """All word products ``r_w > floor`` with multiplicities, level by level.

    >>> ms = enumerate_scales(SelfSimilarSystem((1/3,) * 4, 2), 0.1)
    >>> ms.counts
    (1, 4, 16)
    """
    if not floor > 0:
        raise UnmaterializableString("scale floor must be positive")
    return _enumerate_cached(tuple(system.ratios), float(floor), int(max_distinct))


@dataclass(frozen=True)
class FractalString:
    """A normalized fractal string.

    ``source`` is ``"explicit"``, ``"self_similar"`` or ``"apollonian"``.
    Explicit and Apollonian strings are finite lists kept in ``scales``;
    self-similar ones are generated on demand from ``system``.
    ``complete_above`` is the scale below which the stored list is known to
    be incomplete (0 for explicit lists and self-similar strings).
    """

    source: str
    scales: tuple = ()
    system: Optional[SelfSimilarSystem] = None
    seed: tuple = ()
    complete_above: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.source == "self_similar":
            if self.system is None:
                raise InvalidString("self-similar string needs a system")
            return
        if self.source not in ("explicit", "apollonian"):
            raise InvalidString(f"unknown string source {self.source!r}")
        sc = tuple(float(x) for x in self.scales)
        if not sc:
            raise InvalidString("scale list is empty")
        if any(not (x > 0 and math.isfinite(x)) for x in sc):
            raise InvalidString("scales must be positive and finite")
        if any(b > a for a, b in zip(sc, sc[1:])):
            raise InvalidString("scales must be nonincreasing")
        if sc[0] != 1.0:
            raise InvalidString(f"scales must be normalized so the first is 1, got {sc[0]!r}")
        object.__setattr__(self, "scales", sc)

    @classmethod
    def explicit(cls, scales: Sequence[float]) -> "FractalString":
        return cls("explicit", tuple(scales))

    @classmethod
    def self_similar(cls, system: SelfSimilarSystem) -> "FractalString":
        return cls("self_similar", system=system)

    @property
    def is_finite(self) -> bool:
        return self.source != "self_similar"

    def multiset(self, floor: float) -> ScaleMultiset:
        """Scales strictly greater than ``floor``."""
        if self.source == "self_similar":
            return enumerate_scales(self.system, floor)
        if floor < self.complete_above:
            raise UnmaterializableString(
                f"string is only known down to scale {self.complete_above:g}, asked for {floor:g}"
            )
        merged = _compress((v, 1) for v in self.scales if v > floor)
        return ScaleMultiset(tuple(v for v, _ in merged), tuple(c for _, c in merged), float(floor))

    def full(self) -> ScaleMultiset:
        if self.source == "self_similar":
            raise UnmaterializableString("a self-similar string has infinitely many scales")
        return self.multiset(0.0 if self.complete_above == 0 else self.complete_above)


class ConstantFunction:
    """Coefficient function with a single constant value on (0, g]."""

    is_constant = True

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, eps):
        x = np.asarray(eps, dtype=float)
        if x.ndim == 0:
            return self.value
        return np.full(x.shape, self.value)

    def __repr__(self):
        return f"ConstantFunction({self.value!r})"


@dataclass(frozen=True)
class SteinerLikeRep:
    """Steiner-like representation ``V(G, eps) = sum_k kappa_k(eps) eps**(d-k)``.

    ``kappa`` holds ``d + 1`` coefficient functions valid on ``(0, g]``; each
    is callable on arrays and exposes ``is_constant``.  ``kappa_const`` are
    the values at ``g``, used for every ``eps >= g``.  ``volume`` is an
    independently known Lebesgue measure of the generator, when available.
    """

    ambient_dim: int
    inradius: float
    kappa: tuple
    kappa_const: tuple = ()
    monophase: bool = False
    name: str = "custom"
    volume: Optional[float] = None

    def __post_init__(self):
        d = int(self.ambient_dim)
        if d < 1:
            raise InvalidSystem("ambient dimension must be at least 1")
        if not (self.inradius > 0 and math.isfinite(self.inradius)):
            raise InvalidSystem(f"inradius must be positive, got {self.inradius!r}")
        if len(self.kappa) != d + 1:
            raise InvalidSystem(f"need {d + 1} coefficient functions, got {len(self.kappa)}")
        object.__setattr__(self, "ambient_dim", d)
        object.__setattr__(self, "inradius", float(self.inradius))
        if not self.kappa_const:
            vals = tuple(float(f(self.inradius)) for f in self.kappa)
            object.__setattr__(self, "kappa_const", vals)
        elif len(self.kappa_const) != d + 1:
            raise InvalidSystem("kappa_const must have d + 1 entries")

    @property
    def d(self) -> int:
        return self.ambient_dim

    @property
    def g(self) -> float:
        return self.inradius

    @property
    def lam(self) -> float:
        """Volume from the coefficient identity ``sum kappa_k(G) g**(d-k)``."""
        d, g = self.d, self.g
        return math.fsum(self.kappa_const[k] * g ** (d - k) for k in range(d + 1))

    @property
    def all_constant(self) -> bool:
        return all(getattr(f, "is_constant", False) for f in self.kappa)

    def kappa_values(self, eps) -> np.ndarray:
        """Array of shape ``(d+1,) + eps.shape`` with the extension rule applied."""
        x = np.asarray(eps, dtype=float)
        out = np.empty((self.d + 1,) + x.shape)
        inside = x < self.g
        for k, f in enumerate(self.kappa):
            col = np.full(x.shape, self.kappa_const[k])
            if np.any(inside):
                col[inside] = f(x[inside]) if x.ndim else f(float(x))
            out[k] = col
        return out

    def f_values(self, eps) -> np.ndarray:
        """``kappa_k(G, eps) - kappa_k(G)``; zero for ``eps >= g``."""
        kv = self.kappa_values(eps)
        return kv - np.asarray(self.kappa_const).reshape((-1,) + (1,) * (kv.ndim - 1))


@dataclass(frozen=True)
class FractalSpray:
    """Scaled copies of one or more generators, one copy per string entry."""

    string: FractalString
    generators: tuple
    system: Optional[SelfSimilarSystem] = None

    def __post_init__(self):
        gens = self.generators
        if isinstance(gens, SteinerLikeRep):
            gens = (gens,)
        gens = tuple(gens)
        if not gens:
            raise InvalidSystem("a spray needs at least one generator")
        d = gens[0].d
        if any(g.d != d for g in gens):
            raise InvalidSystem("all generators must share the ambient dimension")
        sysm = self.system if self.system is not None else self.string.system
        if sysm is not None and sysm.ambient_dim != d:
            raise InvalidSystem(
                f"string lives in dimension {sysm.ambient_dim} but generator in {d}"
            )
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "system", sysm)

    @property
    def d(self) -> int:
        return self.generators[0].d

    @property
    def generator(self) -> SteinerLikeRep:
        if len(self.generators) != 1:
            raise InvalidSystem("spray has several generators; iterate over .generators")
        return self.generators[0]

    def single(self) -> list:
        """Per-generator single-generator sprays."""
        return [FractalSpray(self.string, (g,), self.system) for g in self.generators]


@dataclass(frozen=True)
class ScalingDim:
    omega: complex
    residue: complex
    simple: bool = True
    line_index: Optional[int] = None
    line: Optional[int] = None


@dataclass(frozen=True)
class ComplexDimensionSet:
    scaling: tuple
    integer_dims: tuple
    window: object = "whole-plane"
    lattice: object = None

    def __len__(self):
        return len(self.scaling)


@dataclass(frozen=True)
class Screen:
    abscissa: float
    height: float = 1e3

    def __post_init__(self):
        if not math.isfinite(self.abscissa):
            raise InvalidSystem("screen abscissa must be finite")
        if not self.height > 0:
            raise InvalidSystem("screen height must be positive")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    rep_name: str
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self) -> list:
        return [c for c in self.checks if not c.passed]

    def lines(self) -> list:
        return [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name}: worst={c.worst:.6g} {c.detail}".rstrip()
            for c in self.checks
        ]


def _sample_grid(g: float, n: int) -> np.ndarray:
    half = max(n // 2, 1)
    a = g * np.logspace(-9, 0, half)
    b = np.linspace(g / n, g, n - half + 1)
    return np.unique(np.concatenate([a, b]))


def validate_rep(rep: SteinerLikeRep, sample_count: int = 200) -> ValidationReport:
    """Check the invariants of a Steiner-like representation by sampling."""
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    d, g = rep.d, rep.g
    eps = _sample_grid(g, sample_count)
    kv = np.empty((d + 1, eps.size))
    for k, f in enumerate(rep.kappa):
        kv[k] = f(eps)
    bad = ~np.isfinite(kv)
    if bad.any():
        k, i = np.argwhere(bad)[0]
        raise NonFiniteSample(f"kappa_{k} is not finite at eps={eps[i]!r} in {rep.name}")
    checks = []
    at_g = np.array([float(f(g)) for f in rep.kappa])
    ext_err = float(np.max(np.abs(at_g - np.asarray(rep.kappa_const))))
    checks.append(Check("extension rule kappa_k(G) = kappa_k(G, g)",
                        ext_err <= 1e-12 * max(1.0, float(np.max(np.abs(at_g)))), ext_err))
    checks.append(Check("bounded on sampled (0, g]", True, float(np.max(np.abs(kv)))))
    lam_ident = rep.lam
    lam_ref = rep.volume if rep.volume is not None else math.fsum(at_g[k] * g ** (d - k) for k in range(d + 1))
    rel = abs(lam_ident - lam_ref) / max(abs(lam_ref), 1e-300)
    checks.append(Check("volume identity sum kappa_k(G) g^(d-k) = lambda_d(G)", rel <= 1e-9, rel,
                        f"lambda={lam_ref:.17g}"))
    powers = np.stack([eps ** (d - k) for k in range(d + 1)])
    V = np.sum(kv * powers, axis=0)
    scale = max(abs(lam_ref), 1e-300)
    neg = float(max(0.0, -np.min(V)))
    checks.append(Check("V(G, eps) >= 0", neg <= 1e-12 * scale, neg))
    drop = float(max(0.0, -np.min(np.diff(V)))) if V.size > 1 else 0.0
    checks.append(Check("V(G, eps) nondecreasing", drop <= 1e-9 * scale, drop))
    small = float(abs(V[0]) / scale)
    checks.append(Check("V(G, eps) -> 0 as eps -> 0", small <= 1e-6, small, f"at eps={eps[0]:.3g}"))
    if rep.monophase:
        spread = float(np.max(np.ptp(kv, axis=1)))
        const_ok = spread <= 1e-12 * max(1.0, float(np.max(np.abs(kv)))) and abs(rep.kappa_const[d]) <= 1e-15
        checks.append(Check("monophase: constant kappa and kappa_d(G) = 0", const_ok,
                            max(spread, abs(rep.kappa_const[d]))))
    return ValidationReport(rep.name, tuple(checks))


def generator_volume(rep: SteinerLikeRep) -> float:
    """``lambda_d(G) = sum_k kappa_k(G) g**(d-k)``."""
    return rep.lam


def _check_eps(eps):
    x = np.asarray(eps, dtype=float)
    if np.any(~(x > 0)):
        raise EpsOutOfRange("eps must be positive")
    return x


def tube_of_generator(rep: SteinerLikeRep, eps):
    """Inner tube volume of the generator; saturates at ``lambda_d(G)`` past ``g``."""
    x = _check_eps(eps)
    d = rep.d
    kv = rep.kappa_values(x)
    val = sum(kv[k] * x ** (d - k) for k in range(d + 1))
    val = np.where(x >= rep.g, rep.lam, val)
    if not np.all(np.isfinite(val)):
        raise NonFiniteSample(f"non-finite tube volume for {rep.name}")
    return float(val) if val.ndim == 0 else val


def tube_of_scaled_copy(rep: SteinerLikeRep, scale: float, eps):
    """Inner tube volume of ``scale * G`` via the same coefficients."""
    if not 0 < scale <= 1:
        raise InvalidString(f"scale must lie in (0, 1], got {scale!r}")
    x = _check_eps(eps)
    d = rep.d
    y = x / scale
    kv = rep.kappa_values(y)
    val = sum(scale ** k * kv[k] * x ** (d - k) for k in range(d + 1))
    val = np.where(y >= rep.g, scale ** d * rep.lam, val)
    return float(val) if val.ndim == 0 else val


def cutoff_index(string: FractalString, g: float, eps: float) -> int:
    """``J(eps)``: the number of scales with ``l_j * g > eps``."""
    if not eps > 0:
        raise EpsOutOfRange("eps must be positive")
    if eps >= g:
        return 0
    return string.multiset(eps / g).total
