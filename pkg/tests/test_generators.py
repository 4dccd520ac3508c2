import math

import numpy as np
import pytest
import shapely
from shapely.geometry import Polygon as ShapelyPolygon

from spraytube.core import tube_of_generator
from spraytube.errors import GrammarError, NoBase, UnknownName, ValidationFailure
from spraytube.expressions import parse, piecewise
from spraytube.generators import (
    BUILTINS,
    CANTOR_CARPET_PIECES,
    RecurrenceRep,
    builtin,
    custom_rep,
    recurrence_as_rep,
    ushape_depth,
    ushape_forward_residual,
    ushape_solid_term,
    ushape_tube,
)
from spraytube.oracle import cantor_carpet_polygon

SQ3 = math.sqrt(3)


# ------------------------------------------------------------ expressions


@pytest.mark.parametrize("text,eps,g,expected", [
    ("pi - 8", 0.3, 1.0, math.pi - 8),
    ("12*sqrt(2)*g", 0.0, 0.5, 6 * math.sqrt(2)),
    ("2*g/eps*sqrt(2*eps**2 - g**2)", 1.0, 1.0, 2.0),
    ("pi - 4*acos(g/(eps*sqrt(2)))", 1.0, 1.0, math.pi - 4 * math.pi / 4),
    ("eps^2 + 1/3", 2.0, 0.0, 4 + 1 / 3),
    ("-ε + π", 1.0, 0.0, math.pi - 1),
    ("arccos(0)", 0.0, 0.0, math.pi / 2),
    ("eps**(3/2)", 4.0, 0.0, 8.0),
])
def test_parse_evaluate(text, eps, g, expected):
    assert float(parse(text).evaluate(eps, g)) == pytest.approx(expected, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("text", ["eps**eps", "foo(1)", "__import__('os')", "x + 1", "eps if g else 1",
                                  "[1, 2]", "", "1 +"])
def test_parse_rejects(text):
    with pytest.raises(GrammarError):
        parse(text)


@pytest.mark.parametrize("text", [p for piece in CANTOR_CARPET_PIECES for p in piece["kappa"]]
                         + ["17/9 - eps/9 + (pi - 38/9)*eps**2", "sqrt(eps)^(1/3)"])
def test_to_text_round_trip(text):
    e = parse(text)
    again = parse(e.to_text())
    for eps in (0.2, 0.23, 0.7):
        assert float(again.evaluate(eps, 0.2)) == pytest.approx(float(e.evaluate(eps, 0.2)), rel=1e-15, nan_ok=True)


def test_depends_on_eps():
    assert parse("eps*g").depends_on_eps()
    assert not parse("sqrt(2)*g").depends_on_eps()


def test_piecewise_intervals_are_left_open():
    f = piecewise(["g/2", "g"], ["1", "2"], 1.0)
    assert f(0.5) == 1.0
    assert f(0.5000001) == 2.0
    assert f(1.0) == 2.0
    assert list(f(np.array([0.1, 0.9]))) == [1.0, 2.0]
    with pytest.raises(GrammarError):
        piecewise(["g/2"], ["1"], 1.0)


# ------------------------------------------------------------ builtins


def _shapely_inner(poly_pts, eps):
    p = ShapelyPolygon(poly_pts)
    return p.area - p.buffer(-eps, quad_segs=2048).area


@pytest.mark.parametrize("name,closed", [
    ("interval", lambda e: 2 * e),
    ("square", lambda e: 1 - (1 - 2 * e) ** 2),
    ("disk", lambda e: math.pi * (1 - (1 - e) ** 2)),
    ("equilateral_triangle", lambda e: SQ3 / 4 * (1 - (1 - e / (1 / (2 * SQ3))) ** 2)),
])
def test_builtin_convex_closed_forms(name, closed):
    rep = builtin(name, 1.0)
    for eps in np.linspace(rep.g / 50, rep.g, 11):
        assert float(tube_of_generator(rep, eps)) == pytest.approx(closed(eps), rel=1e-13)


def test_cantor_carpet_gen_matches_polygon_offset():
    rep = builtin("cantor_carpet_gen", 1.0)
    pts = cantor_carpet_polygon(1.0).vertices
    for eps in np.linspace(rep.g / 20, rep.g * 0.999, 15):
        ref = _shapely_inner(pts, eps)
        assert float(tube_of_generator(rep, eps)) == pytest.approx(ref, rel=2e-6)


def test_cantor_carpet_gen_constants():
    rep = builtin("cantor_carpet_gen", 1.0)
    g = math.sqrt(2) / 6
    assert rep.g == pytest.approx(g, rel=1e-15)
    assert rep.kappa_const == pytest.approx((0.0, 2 * g, 8 * g * g), abs=1e-15)
    assert rep.lam == pytest.approx(5 / 9, rel=1e-14)
    assert not rep.monophase
    # first regime: kappa = (pi - 8, 12 sqrt2 g, 0)
    k = rep.kappa_values(g / 2)
    assert list(k) == pytest.approx([math.pi - 8, 12 * math.sqrt(2) * g, 0.0], rel=1e-15)


def test_builtin_sizes_scale():
    for name in BUILTINS:
        a, b = builtin(name, 1.0), builtin(name, 2.0)
        assert b.g == pytest.approx(2 * a.g, rel=1e-15)
        assert b.lam == pytest.approx(2 ** a.d * a.lam, rel=1e-13)


def test_builtin_errors():
    with pytest.raises(UnknownName):
        builtin("koch", 1.0)
    with pytest.raises(ValidationFailure):
        builtin("square", -1.0)


def test_custom_rep_matches_builtin():
    rep = custom_rep(2, "sqrt(2)/6", CANTOR_CARPET_PIECES, volume=5 / 9)
    ref = builtin("cantor_carpet_gen", 1.0)
    xs = np.linspace(1e-4, ref.g, 101)
    assert np.allclose(tube_of_generator(rep, xs), tube_of_generator(ref, xs), rtol=1e-15, atol=0)


def test_custom_rep_monophase_detection():
    sq = custom_rep(2, 0.5, [{"upto": "g", "kappa": ["-4", "4", "0"]}])
    assert sq.monophase


def test_custom_rep_rejects_bad_volume():
    with pytest.raises(ValidationFailure) as info:
        custom_rep(2, 0.5, [{"upto": "g", "kappa": ["-4", "4", "0"]}], volume=3.0)
    assert not info.value.report.passed


def test_custom_rep_grammar_errors():
    with pytest.raises(GrammarError):
        custom_rep(2, 0.5, [{"upto": "g", "kappa": ["-4", "4"]}])
    with pytest.raises(GrammarError):
        custom_rep(2, 0.5, [])


# ------------------------------------------------------------ recurrence


def _rec_with_consistent_base():
    # any base on [g/3, g) works for the recurrence identities; pick a smooth one
    return RecurrenceRep(g=1.0, base="eps**2")


def test_recurrence_needs_base():
    with pytest.raises(NoBase):
        ushape_tube(RecurrenceRep(g=1.0), 0.1)


def test_recurrence_identity_holds():
    rec = _rec_with_consistent_base()
    for eps in (0.01, 0.05, 0.1, 0.2, 0.3):
        assert abs(ushape_forward_residual(rec, eps)) < 1e-13


def test_recurrence_depth_and_solid_term():
    rec = _rec_with_consistent_base()
    assert ushape_depth(rec, 0.5) == 1
    assert ushape_depth(rec, 0.2) == 2
    assert ushape_depth(rec, 0.05) == 3
    for m in range(5):
        assert ushape_solid_term(rec, m) == pytest.approx(9.0 ** -(m + 2) / 4, rel=1e-15)


def test_recurrence_as_rep():
    rec = _rec_with_consistent_base()
    rep = recurrence_as_rep(rec)
    assert float(rep.kappa_values(0.1)[2]) == pytest.approx(ushape_tube(rec, 0.1), rel=1e-15)
