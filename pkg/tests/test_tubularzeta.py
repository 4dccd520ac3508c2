import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_spray
from spraytube.errors import IntegerSingularity, InvalidSystem, ScalingIntegerCollision
from spraytube.core import FractalSpray, FractalString, SelfSimilarSystem
from spraytube.generators import builtin
from spraytube.tubularzeta import (
    M_s,
    TubularZetaContext,
    contour_residue,
    residue_head_at_k,
    residue_tail_at,
    zeta_G,
    zeta_T,
    zeta_head,
    zeta_tail,
)

CC = TubularZetaContext(make_spray("cantor_carpet"))


def test_cantor_carpet_integer_residues_frozen():
    g = CC.g
    # zeta_L(2) (kappa_2(G) - lambda) = 9/5 (4/9 - 5/9)
    assert residue_tail_at(CC, 2, 0.1) == pytest.approx(-0.2, rel=1e-14)
    # zeta_L(1) kappa_1(G) eps = (1/(1 - 4/3)) (2g) eps
    assert residue_tail_at(CC, 1, 0.1) == pytest.approx(-3 * 2 * g * 0.1, rel=1e-14)
    assert residue_tail_at(CC, 0, 0.1) == 0.0
    # only the unit tile is unsaturated for g/3 < eps <= g/sqrt2; f_2 = -8 g^2 = -4/9 there
    assert residue_head_at_k(CC, 0.1, 2) == pytest.approx(-4 / 9, rel=1e-14)
    assert residue_head_at_k(CC, 0.2, 2) == 0.0  # second regime, f_2 = 0


def test_scaling_residue_matches_contour():
    sysm = CC.system
    D = sysm.moran
    eps = 0.05
    an = residue_tail_at(CC, complex(D, 0), eps)
    nu = contour_residue(lambda s: zeta_tail(CC, eps, s), complex(D, 0), 0.1)
    assert an == pytest.approx(nu, rel=1e-10)


def test_integer_guard():
    with pytest.raises(IntegerSingularity):
        zeta_T(CC, 0.1, 1.0 + 1e-12)
    with pytest.raises(IntegerSingularity):
        residue_tail_at(CC, 5, 0.1)


def test_scaling_integer_collision():
    # ratios {1/2, 1/2} in d = 2 have D = 1, an integer
    sysm = SelfSimilarSystem((0.5, 0.5), 2)
    ctx = TubularZetaContext(FractalSpray(FractalString.self_similar(sysm), (builtin("square", 1.0),), sysm))
    with pytest.raises(ScalingIntegerCollision):
        residue_tail_at(ctx, 1, 0.1)
    with pytest.raises(ScalingIntegerCollision):
        residue_tail_at(ctx, complex(1.0, 0.0), 0.1)


def test_contour_residue_rejects_enclosed_pole():
    with pytest.raises(ValueError):
        contour_residue(lambda s: 1 / s, 0j, 1.0, other_poles=[0.5])


def test_contour_residue_simple_function():
    assert contour_residue(lambda s: np.exp(s) / (s - 1), 1 + 0j, 0.5) == pytest.approx(math.e, rel=1e-12)


def test_multi_generator_context_rejected():
    sp = make_spray("sierpinski_gasket")
    two = FractalSpray(sp.string, (sp.generator, builtin("square", 0.5)), sp.system)
    with pytest.raises(InvalidSystem):
        TubularZetaContext(two)


def test_M_s_square():
    sq = builtin("square", 1.0)
    s = 2.5
    ref = 0.5 ** s * 2 * (-4) / s + 0.5 ** (s - 1) * 1 * 4 / (s - 1)
    assert complex(M_s(sq, s)).real == pytest.approx(ref, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(1.5, 4.0), st.floats(-25, 25))
def test_zeta_T_conjugate_symmetry(eps_rel, re, im):
    s = complex(re, im)
    if min(abs(s - k) for k in range(3)) < 1e-3:
        return
    eps = eps_rel * CC.g
    a = complex(zeta_T(CC, eps, s))
    b = complex(zeta_T(CC, eps, s.conjugate()))
    assert b == pytest.approx(a.conjugate(), rel=1e-12, abs=1e-300)


def test_vectorized_head_and_tail():
    s = np.array([2.3 + 1j, 3.1 - 2j, 1.7 + 0.5j])
    eps = 0.02
    H = zeta_head(CC, eps, s)
    L = zeta_tail(CC, eps, s)
    for i, x in enumerate(s):
        assert H[i] == pytest.approx(complex(zeta_head(CC, eps, complex(x))), rel=1e-14)
        assert L[i] == pytest.approx(complex(zeta_tail(CC, eps, complex(x))), rel=1e-14)


def test_zeta_G_beyond_inradius_is_pure_tail():
    rep = CC.rep
    s = 2.7 + 0.3j
    eps = 2 * rep.g
    assert complex(zeta_G(rep, eps, s)) == pytest.approx(
        complex(eps ** (2 - s) * M_s(rep, s) / (2 - s)), rel=1e-14)
