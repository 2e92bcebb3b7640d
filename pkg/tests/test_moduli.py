import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from moclab.fields import ScalarField1D, ScalarField2D
from moclab.moduli import (
    ModulusConstructionError,
    ModulusSearchError,
    build_modulus,
    check_obeys,
    eval_modulus,
    find_B_for_data,
    modulus_from_dict,
    validate_modulus,
)
from moclab.symbols import make_symbol

CRITICAL = make_symbol("power", a=1.0)


def base_member():
    return build_modulus(CRITICAL, 0.1, 0.01, 1.0)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_base_member_closed_forms():
    mem = base_member()
    assert_allclose(mem.delta, 0.1, rtol=1e-12)
    assert mem.C_alpha == 4.0
    assert_allclose(mem.slope_at_delta_left, 0.5, rtol=1e-10)
    # omega(delta) = B delta - pref*(delta M0 - M1) with M0 = 4 delta,
    # M1 = 7 delta^2 / 4 for the critical symbol
    assert_allclose(mem.omega_at_delta, 0.071875, rtol=1e-9)
    assert_allclose(mem.omega(0.2),
                    0.071875 + 0.005 * math.log(2.0), rtol=1e-9)


def test_slope_formula_past_crossover():
    mem = base_member()
    xi = 2.0 * mem.delta
    _, d1, _ = eval_modulus(mem, xi)
    assert_allclose(d1, 0.01 * CRITICAL.m(4.0 * mem.delta), rtol=1e-12)


def test_initial_slope_and_linear_bound():
    mem = base_member()
    xi = np.geomspace(1e-8 * mem.delta, mem.delta, 100)
    om = mem.omega(xi)
    assert np.all(om <= 1.0 * xi * (1.0 + 1e-12))
    assert_allclose(om[0] / xi[0], 1.0, rtol=1e-3)


def test_second_derivative_blows_up_at_zero():
    # critical-family curvature steepens like log(delta/xi): unbounded,
    # but slowly
    mem = base_member()
    _, _, d2_mid = eval_modulus(mem, 1e-2 * mem.delta)
    _, _, d2_small = eval_modulus(mem, 1e-4 * mem.delta)
    assert d2_small < d2_mid < 0.0
    assert_allclose(d2_mid, -1.25 * (3.0 + math.log(1e2)), rtol=1e-9)


def test_construction_rejections_name_inequalities():
    with pytest.raises(ModulusConstructionError, match="B >= 1"):
        build_modulus(CRITICAL, 0.1, 0.01, 0.5)
    with pytest.raises(ModulusConstructionError, match="gamma > 0"):
        build_modulus(CRITICAL, 0.1, 0.0, 2.0)
    with pytest.raises(ModulusConstructionError, match="2\\*gamma <= kappa"):
        build_modulus(CRITICAL, 0.1, 0.06, 2.0)
    with pytest.raises(ModulusConstructionError, match="r0/\\(4\\*C0\\)"):
        build_modulus(CRITICAL, 0.3, 0.01, 2.0)


def test_critical_scaling_degeneracy():
    # for the critical symbol the family is one modulus rescaled:
    # omega_B(xi) = omega_1(B xi), delta(B) = kappa / B
    mem1 = base_member()
    for b in (10.0, 100.0):
        memb = build_modulus(CRITICAL, 0.1, 0.01, b)
        assert_allclose(memb.delta, 0.1 / b, rtol=1e-12)
        xi = np.geomspace(1e-3 * memb.delta, 5.0, 60)
        assert_allclose(memb.omega(xi), mem1.omega(b * xi), rtol=1e-9)


def test_astronomic_B_stays_representable():
    # certificates for order-one data live at B ~ 2^500; the rescaled
    # moment formulas must stay exact there
    mem = build_modulus(CRITICAL, 0.1, 0.01, 2.0 ** 556)
    assert_allclose(mem.slope_at_delta_left / 2.0 ** 556, 0.5, rtol=1e-10)
    assert_allclose(mem.omega(0.56),
                    0.071875 + 0.005 * math.log(0.56 * 2.0 ** 556 / 0.1),
                    rtol=1e-6)


# ---------------------------------------------------------------------------
# validation battery
# ---------------------------------------------------------------------------

def test_validate_members_across_families():
    for sym, kappa in ((CRITICAL, 0.1),
                       (make_symbol("log", a=1.0, alpha=0.5), 0.05)):
        for b in (1.0, 100.0):
            rep = validate_modulus(build_modulus(sym, kappa, 0.01, b))
            assert rep.passed, rep.lines()
            assert rep.check("doubling").margin >= 0.0


def test_validate_rejects_linear_adversary():
    rep = validate_modulus(lambda xi: np.asarray(xi, dtype=float),
                           xi_grid=np.geomspace(1e-8, 10.0, 300))
    assert not rep.passed
    failed = [c.name for c in rep.checks if not c.passed]
    assert failed == ["curvature_blows_up"]


MEMBER_FOR_PROPERTY = build_modulus(CRITICAL, 0.1, 0.01, 3.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1e-6, max_value=5.0),
       st.floats(min_value=1e-6, max_value=5.0))
def test_concave_and_monotone_across_the_joint(x, y):
    mem = MEMBER_FOR_PROPERTY
    lo, hi = sorted((x, y))
    mid = 0.5 * (lo + hi)
    w_lo, w_mid, w_hi = (float(mem.omega(v)) for v in (lo, mid, hi))
    assert w_mid >= w_lo - 1e-12
    assert w_hi >= w_mid - 1e-12
    assert w_mid >= 0.5 * (w_lo + w_hi) - 1e-10 * max(w_hi, 1.0)


# ---------------------------------------------------------------------------
# obedience
# ---------------------------------------------------------------------------

def test_sin_obeys_generous_modulus():
    f = ScalarField1D.from_function(1024, np.sin)
    rep = check_obeys(f, lambda xi: np.minimum(2.0 * np.asarray(xi), 4.0))
    assert rep.obeys
    assert rep.margin > 0.0


def test_sin_breaks_tight_modulus_at_known_pair():
    f = ScalarField1D.from_function(1024, np.sin)
    rep = check_obeys(f, lambda xi: 0.5 * np.asarray(xi))
    assert not rep.obeys
    # continuous minimum of xi/2 - 2 sin(xi/2) sits at xi = 2 pi / 3;
    # the lattice search lands within the h^2 quantization of that minimum
    assert_allclose(rep.margin, math.pi / 3.0 - math.sqrt(3.0), atol=1e-5)
    assert_allclose(rep.worst_separation, 2.0 * math.pi / 3.0, atol=1e-2)
    (x,), (y,) = rep.worst_pair
    dx = ((y - x) + math.pi) % (2.0 * math.pi) - math.pi
    mid = (x + 0.5 * dx) % (2.0 * math.pi)
    # worst increments straddle an extremum of cos (x = 0 or pi)
    assert min(abs(mid), abs(mid - math.pi),
               abs(mid - 2.0 * math.pi)) < 1e-2


def test_obedience_csv_round_trip():
    f = ScalarField1D.random_band_limited(256, kmax=20, amplitude=0.2, seed=5)
    rep = check_obeys(f, build_modulus(CRITICAL, 0.1, 0.01, 2.0 ** 35))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "xi,omega,worst_increment,margin"
    parsed = np.array([[float(c) for c in ln.split(",")]
                       for ln in lines[1:]])
    assert parsed.shape[1] == 4
    assert_allclose(parsed[:, 3], parsed[:, 1] - parsed[:, 2], atol=1e-12)


# ---------------------------------------------------------------------------
# fitting B to data
# ---------------------------------------------------------------------------

def test_find_B_zero_and_tiny_fields():
    zero = ScalarField1D(values=np.zeros(64))
    assert find_B_for_data(zero, CRITICAL) == 1.0
    eps_sin = ScalarField1D.from_function(256, lambda x: 1e-3 * np.sin(x))
    assert find_B_for_data(eps_sin, CRITICAL) == 1.0


def test_find_B_ladder_monotone_in_amplitude():
    f = ScalarField1D.random_band_limited(256, kmax=20, amplitude=1.0, seed=5)
    frozen = (6, 35, 93, 208)
    got = []
    for lam, expect in zip((0.05, 0.1, 0.2, 0.4), frozen):
        b = find_B_for_data(ScalarField1D(values=lam * f.values), CRITICAL)
        got.append(b)
        assert abs(math.log2(b) - expect) <= 1.0
        mem = build_modulus(CRITICAL, 0.1, 0.01, b)
        assert check_obeys(ScalarField1D(values=lam * f.values), mem).margin > 0.0
    assert all(x < y for x, y in zip(got, got[1:]))


def test_find_B_larger_gamma_certifies_larger_data():
    f = ScalarField1D.random_band_limited(256, kmax=20, amplitude=1.0, seed=5)
    b = find_B_for_data(f, CRITICAL, gamma=0.05)
    assert abs(math.log2(b) - 109) <= 1.0
    rep = check_obeys(f, build_modulus(CRITICAL, 0.1, 0.05, b))
    assert rep.margin > 0.0


def test_find_B_refusals_are_explicit():
    f = ScalarField1D.random_band_limited(256, kmax=20, amplitude=3.0, seed=5)
    with pytest.raises(ModulusSearchError, match="gamma up to kappa/2"):
        find_B_for_data(f, CRITICAL, max_doublings=150)
    with pytest.raises(ModulusSearchError, match="not sqg_admissible"):
        find_B_for_data(f, make_symbol("power", a=0.5), max_doublings=120)


def test_ladder_survives_crossover_underflow():
    # a full-depth ladder on a saturating symbol pushes delta below the
    # float range; that must surface as a search error, not an overflow
    # inside the envelope tables
    f = ScalarField1D.from_function(256, lambda x: 0.05 * np.sin(x))
    with pytest.raises(ModulusSearchError, match="ladder stopped"):
        find_B_for_data(f, make_symbol("power", a=0.5))


def test_build_modulus_names_the_underflow():
    with pytest.raises(ModulusConstructionError, match="underflowed"):
        build_modulus(CRITICAL, 0.1, 0.01, 1e302)


def test_find_B_certifies_2d_field():
    f = ScalarField2D.random_band_limited(64, kmax=16, amplitude=0.2, seed=9)
    b = find_B_for_data(f, CRITICAL)
    assert abs(math.log2(b) - 93) <= 1.0
    mem = build_modulus(CRITICAL, 0.1, 0.01, b)
    assert check_obeys(f, mem).margin > 0.0
    assert not check_obeys(f, build_modulus(CRITICAL, 0.1, 0.01, 1.0)).obeys


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_member_dict_round_trip():
    mem = build_modulus(make_symbol("log", a=1.0, alpha=0.5), 0.05, 0.01, 32.0)
    back = modulus_from_dict(mem.to_dict())
    assert_allclose(back.delta, mem.delta, rtol=1e-12)
    xi = np.geomspace(1e-2 * mem.delta, 3.0, 40)
    assert_allclose(back.omega(xi), mem.omega(xi), rtol=1e-10)


def test_member_dict_rejects_tampered_crossover():
    doc = build_modulus(CRITICAL, 0.1, 0.01, 4.0).to_dict()
    doc["deltaB"] *= 1.01
    with pytest.raises(ModulusConstructionError, match="crossover"):
        modulus_from_dict(doc)
