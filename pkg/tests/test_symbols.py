import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from moclab.fields import ScalarField1D
from moclab.symbols import (
    apply_dissipation_spectral,
    check_conditions,
    crossover_scale,
    make_multiplier,
    make_symbol,
    symbol_from_json,
    symbol_from_multiplier,
    symbol_from_table,
)


# ---------------------------------------------------------------------------
# symbol families
# ---------------------------------------------------------------------------

def test_power_family_values():
    s = make_symbol("power", a=1.0)
    assert s.m(0.1) == 10.0
    assert s.m(2.0) == 0.5
    assert s.alpha == 1.0 and s.r0 == 1.0 and s.C0 == 1.0
    assert s.sqg_admissible
    # integral of m(r)/r over (1, inf) for m = 1/r
    assert_allclose(s.tail_integral_over_r(1.0), 1.0, rtol=1e-14)


def test_power_family_admissibility_flag():
    # integral of m near 0 converges exactly when a < 1
    assert not make_symbol("power", a=0.5).sqg_admissible
    assert not make_symbol("power", a=0.3).sqg_admissible
    assert make_symbol("power", a=1.0).sqg_admissible


def test_power_family_rejects_bad_exponent():
    with pytest.raises(ValueError, match="a in \\(0, 1\\]"):
        make_symbol("power", a=1.5)
    with pytest.raises(ValueError, match="scale"):
        make_symbol("power", a=1.0, scale=-2.0)
    with pytest.raises(ValueError, match="family"):
        make_symbol("cauchy", a=1.0)


def test_log_family_values():
    s = make_symbol("log", a=1.0, alpha=0.5)
    assert_allclose(s.m(0.1), 1.0 / (0.1 * math.log(20.0)), rtol=1e-14)
    assert_allclose(s.r0, 2.0 * math.exp(-1.0), rtol=1e-14)
    assert s.sqg_admissible
    # envelope: tight non-increasing minorant of m (m rises locally where the
    # core cap meets the tail; understating it is the conservative side)
    r = np.geomspace(1e-6, 50.0, 400)
    env = s.envelope(r)
    assert np.all(np.diff(env) <= 1e-12 * env[:-1])
    assert np.all(env <= s.m(r) * (1.0 + 1e-12))
    below = r < 0.5
    assert_allclose(env[below], s.m(r[below]), rtol=1e-12)
    assert_allclose(s.envelope(0.5), 1.0 / (0.5 * math.log(4.0)), rtol=1e-12)


def test_symbol_rejects_nonpositive_radius():
    s = make_symbol("power", a=0.5)
    with pytest.raises(ValueError, match="non-positive radius"):
        s.m(0.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_symbol_json_round_trip():
    for s in (make_symbol("power", a=0.5, scale=3.0),
              make_symbol("log", a=1.0, alpha=0.5, scale=2.0)):
        doc = json.loads(s.to_json())
        back = symbol_from_json(doc)
        r = np.geomspace(1e-4, 10.0, 40)
        assert_allclose(back.m(r), s.m(r), rtol=1e-12)
        assert back.sqg_admissible == s.sqg_admissible
        assert back.alpha == s.alpha


def test_symbol_from_table_interpolates_knots():
    r = np.geomspace(1e-3, 10.0, 25)
    vals = 1.0 / r
    s = symbol_from_table(r, vals)
    assert_allclose(s.m(r[3:20]), vals[3:20], rtol=1e-12)
    # log-log interpolation of a pure power is exact between knots
    mid = math.sqrt(r[5] * r[6])
    assert_allclose(s.m(mid), 1.0 / mid, rtol=1e-9)


def test_symbol_from_table_rejections():
    r = np.geomspace(0.1, 1.0, 8)
    with pytest.raises(ValueError, match="strictly decreasing"):
        symbol_from_table(r, np.ones_like(r))
    with pytest.raises(ValueError, match="at least 4"):
        symbol_from_table(r[:3], 1.0 / r[:3])


# ---------------------------------------------------------------------------
# structure condition checks
# ---------------------------------------------------------------------------

def test_check_conditions_critical():
    rep = check_conditions(make_symbol("power", a=1.0))
    assert rep.ok
    assert rep.rm_bounded
    assert rep.m_monotone_violations == 0
    assert rep.integral_divergent_analytic
    assert rep.integral_divergent_trend is True
    # per-decade increments of a critical symbol are constant
    inc = rep.partial_integrals
    assert_allclose(inc[-1], inc[0], rtol=1e-8)


def test_check_conditions_subcritical_trend():
    rep = check_conditions(make_symbol("power", a=0.5))
    assert rep.ok
    assert rep.integral_divergent_trend is False
    assert rep.trend_consistent
    assert not rep.warnings


# ---------------------------------------------------------------------------
# crossover scale
# ---------------------------------------------------------------------------

def test_crossover_scale_critical_closed_form():
    s = make_symbol("power", a=1.0)
    assert_allclose(crossover_scale(s, 0.1, 1.0), 0.1, rtol=1e-12)
    assert_allclose(crossover_scale(s, 0.1, 10.0), 0.01, rtol=1e-12)


def test_crossover_scale_log_family_frozen():
    s = make_symbol("log", a=1.0, alpha=0.5)
    assert_allclose(crossover_scale(s, 0.05, 2.0),
                    4.0271659238694055e-3, rtol=1e-9)


def test_crossover_scale_monotone_in_B():
    s = make_symbol("log", a=1.0, alpha=0.5)
    deltas = [crossover_scale(s, 0.05, b) for b in (1.0, 2.0, 8.0, 64.0)]
    assert all(x > y for x, y in zip(deltas, deltas[1:]))


def test_crossover_scale_rejections():
    s = make_symbol("power", a=1.0)
    with pytest.raises(ValueError, match="kappa must lie in"):
        crossover_scale(s, 0.5, 2.0)
    with pytest.raises(ValueError, match="B >= 1"):
        crossover_scale(s, 0.1, 0.5)


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

def test_multiplier_forms():
    p_log = make_multiplier("log-damped", a=1.0)
    assert_allclose(p_log(1.0), 1.0 / math.log(3.0), rtol=1e-14)
    assert_allclose(p_log(10.0), 10.0 / math.log(12.0), rtol=1e-14)
    assert make_multiplier("power", s=0.5)(4.0) == 2.0
    assert make_multiplier("constant", c=2.5)(3.0) == 2.5
    assert make_multiplier("zero")(3.0) == 0.0
    assert_allclose(make_multiplier("loglog", g=1.0)(math.e),
                    1.14005105647836, rtol=1e-10)
    with pytest.raises(ValueError, match="multiplier kind"):
        make_multiplier("tanh")


def test_multiplier_sampled_growth_exponent():
    assert_allclose(make_multiplier("power", s=0.5).alpha, 0.5, atol=1e-6)
    # averaged sampled exponent of z/ln(2+z) sits strictly inside (1/2, 1)
    a = make_multiplier("log-damped", a=1.0).alpha
    assert 0.5 < a < 1.0


def test_symbol_from_multiplier_admissibility():
    s = symbol_from_multiplier(make_multiplier("log-damped", a=1.0))
    # P(z)/z^2 = 1/(z ln(2+z)) has a divergent integral at infinity
    assert s.sqg_admissible
    r = np.geomspace(1e-6, 0.5, 50)
    assert np.all(np.diff(s.m(r)) < 0.0)


def test_apply_dissipation_spectral_pure_mode():
    f = ScalarField1D.from_function(64, lambda x: np.sin(5.0 * x))
    P = make_multiplier("log-damped", a=1.0)
    g = apply_dissipation_spectral(P, f)
    assert_allclose(g.values, P(5.0) * f.values, atol=1e-12)
