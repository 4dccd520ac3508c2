"""Ground-truth volumes: direct tile summation, a polygon grid sampler and
Apollonian packing generation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    FractalSpray,
    FractalString,
    ScaleMultiset,
    SteinerLikeRep,
    enumerate_scales,
)
from .errors import (
    DegeneratePolygon,
    EpsOutOfRange,
    Explosion,
    InvalidSeed,
    TailUnavailable,
)
from .scalingzeta import zeta_at_integer

__all__ = [
    "enumerate_scales",
    "direct_tube",
    "direct_tube_bounded",
    "volume_split",
    "Polygon",
    "polygon_inner_volume",
    "apollonian_string",
    "apollonian_packing",
    "descartes_form",
    "square_polygon",
    "triangle_polygon",
    "cantor_carpet_polygon",
]


def _zeta_d(string: FractalString, d: int) -> float:
    """``sum_j l_j**d`` in closed form."""
    if string.source == "self_similar":
        sysm = string.system
        if not float(np.real(sysm.phi(float(d)))) < 1.0:
            raise TailUnavailable("sum of r_n**d must be below 1 for a finite total volume")
        return zeta_at_integer(sysm, d)
    if string.source == "explicit":
        v, c = string.full().as_arrays()
        return math.fsum(c * v ** d)
    z = string.meta.get("zeta2")
    if z is None or d != 2:
        raise TailUnavailable("no closed form for the total volume of this string")
    return float(z)


def _tiles(string: FractalString, floor: float) -> ScaleMultiset:
    if string.source == "apollonian" and floor < string.complete_above:
        raise TailUnavailable(
            f"packing only enumerated down to scale {string.complete_above:g}; "
            f"eps needs {floor:g}. Use direct_tube_bounded or a smaller min_radius"
        )
    return string.multiset(floor)


def _one_generator(string: FractalString, rep: SteinerLikeRep, eps: float) -> float:
    d, g = rep.d, rep.g
    total = _zeta_d(string, d)
    if eps >= g:
        return rep.lam * total
    ms = _tiles(string, eps / g)
    v, c = ms.as_arrays()
    active = math.fsum(c * _scaled(rep, v, eps)) if v.size else 0.0
    full = math.fsum(c * v ** d)
    return active + rep.lam * (total - full)


def _scaled(rep: SteinerLikeRep, v: np.ndarray, eps: float) -> np.ndarray:
    d = rep.d
    kv = rep.kappa_values(eps / v)
    return sum(v ** k * kv[k] * eps ** (d - k) for k in range(d + 1))


def direct_tube(spray: FractalSpray, eps: float) -> float:
    """Inner tube volume by summing tile volumes.

    Tiles with ``l_j g > eps`` are evaluated through the generator's
    representation; all remaining tiles are full, and their total volume is
    ``lambda_d(G) (zeta_L(d) - sum of the active l_j**d)``.
    """
    if not eps > 0:
        raise EpsOutOfRange("eps must be positive")
    return math.fsum(_one_generator(spray.string, rep, eps) for rep in spray.generators)


def direct_tube_bounded(spray: FractalSpray, eps: float) -> tuple:
    """``(value, bound)``; exact when every relevant tile is known.

    For a packing truncated at ``min_radius`` the unseen tiles hold volume
    between 0 and their total area, reported as midpoint and half-width.
    """
    try:
        return direct_tube(spray, eps), 0.0
    except TailUnavailable:
        if spray.string.source != "apollonian":
            raise
    string = spray.string
    val = 0.0
    bound = 0.0
    for rep in spray.generators:
        d, g = rep.d, rep.g
        ms = string.multiset(string.complete_above)
        v, c = ms.as_arrays()
        active = v > eps / g
        known = math.fsum(c[active] * _scaled(rep, v[active], eps)) + rep.lam * math.fsum(
            c[~active] * v[~active] ** d)
        missing = rep.lam * max(_zeta_d(string, d) - math.fsum(c * v ** d), 0.0)
        val += known + 0.5 * missing
        bound += 0.5 * missing
    return val, bound


def volume_split(spray: FractalSpray, eps: float) -> tuple:
    """Head and tail volumes summed tile by tile (single generator)."""
    rep = spray.generator
    d, g = rep.d, rep.g
    total = _zeta_d(spray.string, d)
    if eps >= g:
        v = np.zeros(0)
        c = np.zeros(0)
    else:
        v, c = _tiles(spray.string, eps / g).as_arrays()
    head = 0.0
    if v.size:
        f = rep.f_values(eps / v)
        head = math.fsum(math.fsum(c * eps ** (d - k) * v ** k * f[k]) for k in range(d + 1))
    rest = total - math.fsum(c * v ** d)
    tail = math.fsum(
        rep.kappa_const[k] * (math.fsum(c * eps ** (d - k) * v ** k) + g ** (d - k) * rest)
        for k in range(d + 1)
    )
    return head, tail


# ---------------------------------------------------------------- polygons


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Polygon:
    """Simple planar polygon, stored counterclockwise, with optional holes."""

    vertices: tuple
    holes: tuple = ()

    def __post_init__(self):
        outer = self._ring(self.vertices, ccw=True)
        holes = tuple(self._ring(h, ccw=False) for h in self.holes)
        object.__setattr__(self, "vertices", outer)
        object.__setattr__(self, "holes", holes)
        if self.area <= 0:
            raise DegeneratePolygon("polygon has no area")

    @staticmethod
    def _ring(pts, ccw: bool) -> tuple:
        v = np.asarray(pts, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DegeneratePolygon("need at least three planar vertices")
        if not np.all(np.isfinite(v)):
            raise DegeneratePolygon("vertices must be finite")
        a = _signed_area(v)
        if abs(a) <= 1e-15:
            raise DegeneratePolygon("ring has zero area")
        if (a > 0) != ccw:
            v = v[::-1]
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise DegeneratePolygon("polygon is not simple")
        return tuple(map(tuple, v))

    @property
    def area(self) -> float:
        a = _signed_area(np.asarray(self.vertices))
        return a + sum(_signed_area(np.asarray(h)) for h in self.holes)

    @property
    def perimeter(self) -> float:
        return sum(_ring_length(np.asarray(r)) for r in (self.vertices,) + self.holes)

    def edges(self) -> np.ndarray:
        out = []
        for r in (self.vertices,) + self.holes:
            v = np.asarray(r)
            out.append(np.concatenate([v, np.roll(v, -1, axis=0)], axis=1))
        return np.concatenate(out)

    def reflex_count(self) -> int:
        n = 0
        for r in (self.vertices,) + self.holes:
            v = np.asarray(r)
            a = v - np.roll(v, 1, axis=0)
            b = np.roll(v, -1, axis=0) - v
            cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
            n += int(np.sum(cross < 0))
        return n

    def bbox(self):
        v = np.asarray(self.vertices)
        return v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()


def _ring_length(v: np.ndarray) -> float:
    return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))


def _inside_ring(px, py, ring) -> np.ndarray:
    v = np.asarray(ring)
    inside = np.zeros(px.shape, dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a, b, c, e in zip(x0, y0, x1, y1):
        crosses = (b > py) != (e > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a + (py - b) * (c - a) / (e - b)
        inside ^= crosses & (px < xint)
    return inside


def _boundary_distance(px, py, edges: np.ndarray) -> np.ndarray:
    dist = np.full(px.shape, np.inf)
    for ax, ay, bx, by in edges:
        dx, dy = bx - ax, by - ay
        L2 = dx * dx + dy * dy
        t = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
        dist = np.minimum(dist, np.hypot(px - ax - t * dx, py - ay - t * dy))
    return dist


def polygon_inner_volume(poly: Polygon, eps: float, grid_h: float = 1e-3,
                         max_points: int = 50_000_000, chunk: int = 400_000,
                         mc_samples: int = 2_000_000, seed: int = 0) -> tuple:
    """Area of ``{x in poly : dist(x, complement) <= eps}`` with an error bound.

    Cell centres of a square grid of spacing ``grid_h`` are classified
    exactly.  Only cells meeting the outer boundary or the level set
    ``dist = eps`` can be misclassified, so the error is at most the area of
    the one-diagonal tubes around those two curves.  Past ``max_points`` cells a Monte Carlo
    estimate with a 99.9% Wilson interval is used instead.
    """
    if not eps > 0:
        raise EpsOutOfRange("eps must be positive")
    if not grid_h > 0:
        raise DegeneratePolygon("grid spacing must be positive")
    x0, x1, y0, y1 = poly.bbox()
    edges = poly.edges()
    nx = max(1, int(math.ceil((x1 - x0) / grid_h)))
    ny = max(1, int(math.ceil((y1 - y0) / grid_h)))
    if nx * ny > max_points:
        return _mc_inner_volume(poly, eps, edges, mc_samples, seed)
    xs = x0 + (np.arange(nx) + 0.5) * grid_h
    ys = y0 + (np.arange(ny) + 0.5) * grid_h
    rows = max(1, chunk // nx)
    hits = 0
    dmax = 0.0
    for start in range(0, ny, rows):
        py, px = np.meshgrid(ys[start:start + rows], xs, indexing="ij")
        inside = _inside_ring(px, py, poly.vertices)
        for h in poly.holes:
            inside &= ~_inside_ring(px, py, h)
        if not inside.any():
            continue
        dist = _boundary_distance(px[inside], py[inside], edges)
        hits += int(np.count_nonzero(dist <= eps))
        dmax = max(dmax, float(dist.max()))
    if eps >= dmax + grid_h / math.sqrt(2):
        return poly.area, 0.0
    value = hits * grid_h * grid_h
    # only cells meeting a level set can be misclassified, and those lie in
    # the tube of radius one cell diagonal around that curve
    rho = math.sqrt(2) * grid_h
    p_outer = poly.perimeter
    p_inner = p_outer + 2 * math.pi * eps * poly.reflex_count()
    bound = 2 * rho * (p_outer + p_inner) + math.pi * rho * rho * (2 + poly.reflex_count())
    return value, bound


def _mc_inner_volume(poly, eps, edges, n, seed):
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = poly.bbox()
    box = (x1 - x0) * (y1 - y0)
    px = rng.uniform(x0, x1, n)
    py = rng.uniform(y0, y1, n)
    inside = _inside_ring(px, py, poly.vertices)
    for h in poly.holes:
        inside &= ~_inside_ring(px, py, h)
    dist = _boundary_distance(px[inside], py[inside], edges)
    k = int(np.count_nonzero(dist <= eps))
    z = 3.2905  # two-sided 99.9%
    phat = k / n
    den = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / den
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / den
    return phat * box, max(abs(centre + half - phat), abs(phat - centre + half)) * box


def square_polygon(side: float = 1.0) -> Polygon:
    return Polygon(((0, 0), (side, 0), (side, side), (0, side)))


def triangle_polygon(side: float = 1.0) -> Polygon:
    return Polygon(((0, 0), (side, 0), (side / 2, side * math.sqrt(3) / 2)))


def cantor_carpet_polygon(size: float = 1.0) -> Polygon:
    """Square of side ``size`` with its four corner squares of side ``size/3`` removed."""
    a, b = size / 3, 2 * size / 3
    pts = [(a, 0), (b, 0), (b, a), (size, a), (size, b), (b, b), (b, size), (a, size),
           (a, b), (0, b), (0, a), (a, a)]
    return Polygon(tuple(pts))


# ---------------------------------------------------------------- Apollonian


def descartes_form(a: Sequence[float]) -> float:
    """``2 sum a_i**2 - (sum a_i)**2``; zero for four mutually tangent circles."""
    return 2 * math.fsum(x * x for x in a) - math.fsum(a) ** 2


@dataclass(frozen=True)
class ApollonianPacking:
    seed: tuple
    min_radius: float
    radii: tuple
    quadruples: tuple
    enclosing_radius: float
    forms: tuple = field(repr=False, default=())
    # generation order: (curvature, index into quadruples) per circle
    circles: tuple = field(repr=False, default=())

    @property
    def max_form(self) -> float:
        return max(abs(f) for f in self.forms) if self.forms else 0.0


def _check_seed(seed):
    if len(seed) != 4:
        raise InvalidSeed("seed needs four curvatures")
    a = tuple(float(x) for x in seed)
    if not all(math.isfinite(x) for x in a):
        raise InvalidSeed("curvatures must be finite")
    F = descartes_form(a)
    if abs(F) > 1e-9 * max(1.0, math.fsum(x * x for x in a)):
        raise InvalidSeed(f"seed violates Descartes' relation: F = {F:.3g}")
    neg = [i for i, x in enumerate(a) if x <= 0]
    if len(neg) != 1:
        raise InvalidSeed("exactly one curvature must be nonpositive (the enclosing circle)")
    if a[neg[0]] == 0:
        raise InvalidSeed("a straight line cannot enclose a bounded packing")
    return a, neg[0]


def apollonian_packing(seed: Sequence[float], min_radius: float,
                       max_circles: int = 5_000_000) -> ApollonianPacking:
    """Circles of radius ``>= min_radius`` reached from ``seed`` by Descartes swaps.

    Swapping ``a_i`` for ``2 sum_{j != i} a_j - a_i`` replaces one circle by
    the other circle tangent to the remaining three.  From the seed all four
    swaps are taken; afterwards the index just replaced is never swapped
    back, so every circle of the packing is produced exactly once.
    """
    a, enc = _check_seed(seed)
    if not min_radius > 0:
        raise InvalidSeed("min_radius must be positive")
    circles = [(x, 0) for i, x in enumerate(a) if i != enc and 1.0 / x >= min_radius]
    quads = [a]
    forms = [descartes_form(a)]
    queue = deque([(a, -1)])
    while queue:
        q, last = queue.popleft()
        total = math.fsum(q)
        for i in range(4):
            if i == last:
                continue
            new = 2 * (total - q[i]) - q[i]
            if new <= 0 or 1.0 / new < min_radius:
                continue
            nq = q[:i] + (new,) + q[i + 1:]
            circles.append((new, len(quads)))
            quads.append(nq)
            forms.append(descartes_form(nq))
            if len(circles) > max_circles:
                raise Explosion(f"more than {max_circles} circles; raise min_radius")
            queue.append((nq, i))
    radii = sorted((1.0 / x for x, _ in circles), reverse=True)
    if not radii:
        radii = [max(1.0 / x for i, x in enumerate(a) if i != enc)]
    return ApollonianPacking(a, float(min_radius), tuple(radii), tuple(quads),
                             1.0 / abs(a[enc]), tuple(forms), tuple(circles))


def apollonian_string(seed: Sequence[float], min_radius: float,
                      packing: Optional[ApollonianPacking] = None) -> FractalString:
    """Normalized radii of the packing as a fractal string.

    The disks fill the enclosing disk up to a null set, so
    ``sum l_j**2 = (R / r_max)**2``; this is kept in ``meta['zeta2']``.
    """
    pk = packing if packing is not None else apollonian_packing(seed, min_radius)
    rmax = pk.radii[0]
    scales = tuple(r / rmax for r in pk.radii)
    meta = {
        "zeta2": (pk.enclosing_radius / rmax) ** 2,
        "r_max": rmax,
        "enclosing_radius": pk.enclosing_radius,
        "assumption": "disks fill the enclosing disk up to a null set",
        "max_descartes_form": pk.max_form,
    }
    return FractalString("apollonian", scales, seed=pk.seed,
                         complete_above=min(1.0, pk.min_radius / rmax), meta=meta)
