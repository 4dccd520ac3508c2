import math

import numpy as np
import pytest

from conftest import log_grid, make_spray
from spraytube.core import FractalSpray, FractalString, Screen, SelfSimilarSystem
from spraytube.errors import EpsOutOfRange, NotMonophase, ScreenPlacement, ScreenThroughPole
from spraytube.generators import builtin
from spraytube.oracle import direct_tube, volume_split
from spraytube.tubeformula import (
    TruncationSpec,
    coeff_c_k,
    coeff_c_omega,
    coeff_e_k,
    exact_tube,
    expand,
    monophase_tube,
    saturated_tube,
    screen_error_term,
    screen_integral,
    tube_value,
    tube_with_error,
    visible_sum,
)
from spraytube.tubularzeta import TubularZetaContext

SQ3 = math.sqrt(3)


@pytest.fixture(scope="module")
def gasket():
    return TubularZetaContext(make_spray("sierpinski_gasket"))


@pytest.fixture(scope="module")
def carpet():
    return TubularZetaContext(make_spray("cantor_carpet"))


def test_gasket_integer_coefficients(gasket):
    # kappa(G) = (-3 sqrt3, 3/2, 0), zeta_L(k) = 1/(1 - 3 2^-k)
    assert coeff_c_k(gasket, 0) == pytest.approx(-3 * SQ3 * (1 / (1 - 3)), rel=1e-15)
    assert coeff_c_k(gasket, 1) == pytest.approx(1.5 * (1 / (1 - 1.5)), rel=1e-15)
    assert coeff_c_k(gasket, 2) == 0.0
    exp = expand(gasket)
    assert exp.constant == pytest.approx(SQ3 / 4, rel=1e-15)


def test_expansion_size(gasket):
    exp = expand(gasket, TruncationSpec(N=50))
    assert exp.omegas.size == 101
    assert exp.rigorous_bound
    c = coeff_c_omega(gasket, exp.omegas)
    assert np.allclose(c, exp.c_omega, rtol=1e-14)


def test_exact_equals_monophase_bitwise(gasket):
    for eps in log_grid(gasket.g, 1e-4, 1.0, 7):
        assert exact_tube(gasket, eps) == monophase_tube(gasket, eps)


def test_monophase_rejects_pluriphase(carpet):
    with pytest.raises(NotMonophase):
        monophase_tube(carpet, 0.01)


def test_eps_range(carpet):
    with pytest.raises(EpsOutOfRange):
        exact_tube(carpet, carpet.g)
    v, b, prov = tube_value(carpet, 2 * carpet.g)
    assert v == saturated_tube(carpet) and b == 0.0 and prov.startswith("saturated")
    assert v == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("N", [3, 30, 300])
def test_truncation_bound_is_honest_at_small_N(carpet, N):
    spray = carpet.spray
    trunc = TruncationSpec(N=N)
    for eps in log_grid(carpet.g, 3.0 ** -6, 1.0, 15):
        v, b = exact_tube(carpet, eps, trunc)
        assert abs(v - direct_tube(spray, eps)) <= b + 1e-12


def test_bound_shrinks_with_N(carpet):
    eps = 0.01
    b = [exact_tube(carpet, eps, TruncationSpec(N=n))[1] for n in (10, 100, 1000)]
    assert b[0] > b[1] > b[2]


def test_e_k_vanishes_only_for_monophase(gasket, carpet):
    assert all(coeff_e_k(gasket, k, 0.01) == 0.0 for k in range(3))
    assert any(coeff_e_k(carpet, k, 0.01) != 0.0 for k in range(3))


def test_volume_split_sums_to_direct(carpet):
    spray = carpet.spray
    for eps in (1e-3, 0.03, 0.2):
        h, t = volume_split(spray, eps)
        assert h + t == pytest.approx(direct_tube(spray, eps), rel=1e-13)


def test_nonlattice_tube_within_heuristic_bound():
    sysm = SelfSimilarSystem((1 / 2, 1 / 3), 1)
    spray = FractalSpray(FractalString.self_similar(sysm), (builtin("interval", 1.0),), sysm)
    ctx = TubularZetaContext(spray)
    exp = expand(ctx, TruncationSpec(T=100.0))
    assert not exp.rigorous_bound
    for eps in log_grid(ctx.g, 1e-3, 1.0, 10):
        v, b = monophase_tube(ctx, eps, TruncationSpec(T=100.0))
        assert abs(v - direct_tube(spray, eps)) <= b


# ------------------------------------------------------------ screen


def test_gasket_error_term_is_left_residues(gasket):
    """R(eps) equals the residues left of the screen: c_1 eps + c_0 eps^2 here."""
    D = gasket.system.moran
    for eps in (1e-3, 0.01, 0.05):
        R, qb = screen_error_term(gasket, eps, Screen(D - 0.05))
        expected = -3 * eps + 1.5 * SQ3 * eps ** 2
        assert abs(R - expected) <= qb
        R2, qb2 = screen_error_term(gasket, eps, Screen(0.5))
        assert abs(R2 - 1.5 * SQ3 * eps ** 2) <= qb2
        R3, qb3 = screen_error_term(gasket, eps, Screen(-0.5))
        assert abs(R3) <= qb3


def test_tube_with_error_reconstructs(gasket):
    for sigma in (0.5, -0.5):
        for eps in (1e-3, 0.02):
            si = screen_integral(gasket, eps, Screen(sigma))
            ex, tb = exact_tube(gasket, eps)
            assert abs(tube_with_error(gasket, eps, Screen(sigma)) - ex) <= si.quad_bound + tb
            assert visible_sum(gasket, eps, sigma) + si.R == pytest.approx(ex, abs=si.quad_bound + tb)


def test_screen_placement_errors(gasket, carpet):
    with pytest.raises(ScreenThroughPole):
        screen_integral(gasket, 0.01, Screen(1.0))
    with pytest.raises(ScreenPlacement):
        screen_integral(gasket, 0.01, Screen(gasket.system.moran + 0.1))
    with pytest.raises(ScreenPlacement):
        tube_with_error(carpet, 0.01, Screen(0.5))
