import math

import numpy as np
import pytest
from shapely.geometry import Polygon as ShapelyPolygon

from conftest import make_spray
from spraytube.core import FractalSpray
from spraytube.errors import DegeneratePolygon, InvalidSeed, TailUnavailable
from spraytube.generators import builtin
from spraytube.oracle import (
    Polygon,
    apollonian_packing,
    apollonian_string,
    cantor_carpet_polygon,
    descartes_form,
    direct_tube,
    direct_tube_bounded,
    polygon_inner_volume,
    square_polygon,
    triangle_polygon,
)


def _cantor_string_brute(eps, levels=120):
    """Gaps of the middle-third Cantor set: 2^n intervals of length 3^-(n+1)."""
    return math.fsum(2 ** n * min(2 * eps, 3.0 ** -(n + 1)) for n in range(levels))


@pytest.mark.parametrize("eps", [1e-5, 3e-4, 0.01, 0.1, 0.16, 0.5])
def test_cantor_string_direct_vs_brute(eps):
    assert direct_tube(make_spray("cantor_string"), eps) == pytest.approx(_cantor_string_brute(eps), rel=1e-12)


def _gasket_brute(eps, levels=160):
    """Removed triangles of the unit gasket: 3^n triangles of side 2^-(n+1)."""
    tot = []
    for n in range(levels):
        s = 2.0 ** -(n + 1)
        r = s / (2 * math.sqrt(3))
        a = math.sqrt(3) / 4 * s * s
        tot.append(3 ** n * (a if eps >= r else a * (1 - (1 - eps / r) ** 2)))
    return math.fsum(tot)


@pytest.mark.parametrize("eps", [1e-5, 1e-3, 0.02, 0.1, 0.2])
def test_gasket_direct_vs_brute(eps):
    assert direct_tube(make_spray("sierpinski_gasket"), eps) == pytest.approx(_gasket_brute(eps), rel=1e-12)


def test_direct_tube_monotone():
    spray = make_spray("cantor_carpet")
    xs = np.geomspace(1e-5, 0.3, 60)
    vals = [direct_tube(spray, float(x)) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


# ------------------------------------------------------------ polygons


@pytest.mark.parametrize("poly,pts", [
    (square_polygon(1.0), [(0, 0), (1, 0), (1, 1), (0, 1)]),
    (triangle_polygon(1.0), [(0, 0), (1, 0), (0.5, math.sqrt(3) / 2)]),
    (cantor_carpet_polygon(1.0), None),
])
def test_polygon_grid_vs_shapely(poly, pts):
    pts = pts or poly.vertices
    sp = ShapelyPolygon(pts)
    for eps in (0.02, 0.07, 0.12):
        ref = sp.area - sp.buffer(-eps, quad_segs=1024).area
        val, bound = polygon_inner_volume(poly, eps, grid_h=2e-3)
        assert abs(val - ref) <= bound + 1e-6


def test_polygon_saturated_returns_area():
    val, bound = polygon_inner_volume(square_polygon(1.0), 0.6, grid_h=1e-2)
    assert (val, bound) == (1.0, 0.0)


def test_polygon_properties():
    p = cantor_carpet_polygon(1.0)
    assert p.area == pytest.approx(5 / 9, rel=1e-15)
    assert p.perimeter == pytest.approx(4.0, rel=1e-15)
    assert p.reflex_count() == 4
    cw = Polygon(((0, 0), (0, 1), (1, 1), (1, 0)))
    assert cw.area == pytest.approx(1.0)


def test_polygon_rejects_bad_input():
    with pytest.raises(DegeneratePolygon):
        Polygon(((0, 0), (1, 1), (1, 0), (0, 1)))  # bow tie
    with pytest.raises(DegeneratePolygon):
        Polygon(((0, 0), (1, 0), (2, 0)))


def test_polygon_with_hole():
    outer = ((0, 0), (3, 0), (3, 3), (0, 3))
    hole = ((1, 1), (2, 1), (2, 2), (1, 2))
    p = Polygon(outer, (hole,))
    assert p.area == pytest.approx(8.0)
    ref = ShapelyPolygon(outer, [hole])
    eps = 0.2
    val, bound = polygon_inner_volume(p, eps, grid_h=5e-3)
    assert abs(val - (ref.area - ref.buffer(-eps, quad_segs=512).area)) <= bound


# ------------------------------------------------------------ Apollonian


def test_descartes_form_zero_on_known_quadruple():
    assert descartes_form((-1, 2, 2, 3)) == 0


def test_integral_packing_residue_classes():
    # curvatures of the (-1, 2, 2, 3) packing lie in {2,3,6,11,14,15,18,23} mod 24
    pk = apollonian_packing((-1, 2, 2, 3), 1 / 500)
    allowed = {2, 3, 6, 11, 14, 15, 18, 23}
    curv = [c for c, _ in pk.circles]
    assert all(float(c).is_integer() for c in curv)
    assert {int(c) % 24 for c in curv} <= allowed
    assert sorted(set(int(c) for c in curv if c <= 39)) == [2, 3, 6, 11, 14, 15, 18, 23, 26, 27, 30, 35, 38, 39]
    assert pk.max_form == 0.0


def test_packing_area_deficit_shrinks():
    seed = (1, 1, 1, 3 - 2 * math.sqrt(3))
    deficits = []
    for rmin in (1e-1, 1e-2, 1e-3):
        pk = apollonian_packing(seed, rmin)
        covered = math.fsum(math.pi * r * r for r in pk.radii)
        deficits.append(math.pi * pk.enclosing_radius ** 2 - covered)
    assert deficits[0] > deficits[1] > deficits[2] > 0


def test_apollonian_string_meta():
    seed = (1, 1, 1, 3 - 2 * math.sqrt(3))
    s = apollonian_string(seed, 1e-2)
    assert s.scales[0] == 1.0
    assert s.meta["r_max"] == pytest.approx(1.0)
    assert s.meta["zeta2"] == pytest.approx((1 + 2 / math.sqrt(3)) ** 2, rel=1e-14)


def test_apollonian_tail_unavailable_and_bounded():
    seed = (1, 1, 1, 3 - 2 * math.sqrt(3))
    s = apollonian_string(seed, 1e-2)
    spray = FractalSpray(s, (builtin("disk", 1.0),))
    with pytest.raises(TailUnavailable):
        direct_tube(spray, 1e-3)
    v, b = direct_tube_bounded(spray, 1e-3)
    fine = FractalSpray(apollonian_string(seed, 5e-4), (builtin("disk", 1.0),))
    assert abs(direct_tube(fine, 1e-3) - v) <= b


@pytest.mark.parametrize("seed", [(1, 1, 1), (1, 1, 1, 1), (-1, -1, 2, 3), (1, 2, 2, 3)])
def test_invalid_seeds(seed):
    with pytest.raises(InvalidSeed):
        apollonian_packing(seed, 0.01)
