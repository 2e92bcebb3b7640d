import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from moclab.burgers import (
    BlowupInstrumentation,
    KernelDivergenceError,
    KernelUndecidedError,
    blowup_condition,
    check_lyapunov_inequality,
    comparison_lyapunov,
    compute_Lw,
    design_blowup_data,
    detect_blowup,
    kernel_mass,
    lyapunov,
    simulate_burgers,
    wedge,
    wedge_dissipation,
)
from moclab.fields import ScalarField1D
from moclab.moduli import find_B_for_data
from moclab.records import BLOWUP, REGULAR, UNRESOLVED, RunRecord
from moclab.symbols import make_symbol, symbol_from_callable

HALF = make_symbol("power", a=0.5)
CRIT = make_symbol("power", a=1.0)
INST = compute_Lw(HALF)

# hat-weighted means of the reference profiles, by hand
L_SIN = 1.0 - math.sin(1.0)
L_WEDGE = 1.0 / 3.0


def designed_run(N, factor=50.0, record_every=5):
    rep = design_blowup_data(HALF, N=N, instrumentation=INST)
    rec = simulate_burgers(rep.field, 0.5, sym=HALF,
                           grad_stop=factor * rep.field.grad_linf(),
                           record_every=record_every)
    return rep, rec


def small_smooth_field(N=256, amp=0.05):
    return ScalarField1D.from_function(N, lambda x: amp * np.sin(x))


# ---------------------------------------------------------------------------
# hat profile
# ---------------------------------------------------------------------------

def test_wedge_profile_values():
    x = np.array([0.0, 0.5, -0.5, 1.0, 2.0, np.pi])
    assert_array_equal(wedge(x), [0.0, 0.5, -0.5, 0.0, 0.0, 0.0])


def test_wedge_periodicity():
    x = np.linspace(-3.0, 3.0, 41)
    assert_allclose(wedge(x + 2.0 * np.pi), wedge(x), atol=1e-14)


# ---------------------------------------------------------------------------
# kernel mass classifier
# ---------------------------------------------------------------------------

def test_kernel_mass_integrable_power():
    mass, err = kernel_mass(HALF)
    assert_allclose(mass, 2.0, rtol=1e-10)
    assert err < 1e-8


def test_kernel_mass_near_critical_power():
    mass, err = kernel_mass(lambda r: r ** -0.9)
    assert_allclose(mass, 10.0, rtol=1e-6)
    assert err < 1e-2


def test_kernel_mass_divergent_power():
    with pytest.raises(KernelDivergenceError):
        kernel_mass(CRIT)


@pytest.mark.parametrize("a", [0.5, 1.0])
def test_kernel_mass_undecided_log(a):
    # divergent, but so slowly that the decade ratios approach 1 from
    # below; the classifier must refuse rather than certify either way
    with pytest.raises(KernelUndecidedError):
        kernel_mass(make_symbol("log", a=a))


def test_kernel_mass_refuses_iterated_log():
    # integral converges (to 1/ln 2), yet the per-decade ratios drift
    # upward through the acceptance window; refusal is the only verdict
    # the desk-depth classifier can defend
    sym = symbol_from_callable(
        lambda r: 1.0 / (r * np.log(2.0 / r) ** 2), core_radius=1.0,
        alpha=1.0, r0=1.0, C0=1.0 / math.log(2.0) ** 2,
        sqg_admissible=False, label="iterated-log")
    with pytest.raises(KernelUndecidedError):
        kernel_mass(sym)


# ---------------------------------------------------------------------------
# dissipation of the hat profile
# ---------------------------------------------------------------------------

def test_dissipation_inside_support():
    # exact window integrals for m = r^{-1/2} at x = 1/4
    assert_allclose(wedge_dissipation(HALF, 0.25), 6.991965660138175,
                    rtol=1e-12)


def test_dissipation_outside_support():
    assert_allclose(wedge_dissipation(HALF, 2.0), -0.0997761055293191,
                    rtol=1e-12)


def test_dissipation_is_odd():
    x = np.array([0.1, 0.7, 1.3, 4.0])
    assert_array_equal(wedge_dissipation(HALF, -x),
                       -wedge_dissipation(HALF, x))


def test_dissipation_continuous_at_kink():
    left = wedge_dissipation(HALF, 1.0 - 1e-10)
    right = wedge_dissipation(HALF, 1.0 + 1e-10)
    assert abs(left - right) < 1e-6


def test_dissipation_negative_beyond_support():
    vals = wedge_dissipation(HALF, np.array([1.2, 2.0, 4.0, 8.0]))
    assert np.all(vals < 0.0)


def test_dissipation_far_field_decay():
    # |Lw|(x) ~ (C0/2) x^{-5/2} for the square-root kernel
    assert_allclose(wedge_dissipation(HALF, 128.0) * 128.0 ** 2.5, -0.5,
                    rtol=1e-3)


def test_dissipation_tail_dominated_by_kernel():
    x = np.linspace(2.0, 100.0, 25)
    ratio = np.abs(wedge_dissipation(HALF, x)) * (x - 1.0) ** 2 / HALF(x - 1.0)
    assert 0.05 < ratio.max() < 0.55


# ---------------------------------------------------------------------------
# instrumentation
# ---------------------------------------------------------------------------

def test_instrumentation_integral():
    assert_allclose(INST.kernel_functional, 6.375878875613632, rtol=1e-9)
    assert_allclose(INST.i_inside + INST.i_outside, INST.kernel_functional,
                    rtol=1e-14)
    assert INST.integral_error < 1e-8
    assert INST.far_remainder < 1e-8


def test_instrumentation_closed_form_bounds():
    assert_allclose(INST.kernel_mass, 2.0, rtol=1e-10)
    assert INST.C0 == 1.0
    assert INST.alpha == 0.5
    assert_allclose(INST.c1_bound, 2.0 * 2.0 + INST.C_ratio * 1.0, rtol=1e-12)
    assert_allclose(INST.c2_bound, 6.0 * 2.0 + 3.0 + 2.0, rtol=1e-12)
    assert INST.i_outside <= INST.c1_bound
    assert INST.i_inside <= INST.c2_bound
    assert INST.bounds_hold
    assert INST.warnings == []


def test_instrumentation_table_matches_pointwise():
    assert_allclose(INST.Lw_table, wedge_dissipation(HALF, INST.x_table),
                    rtol=1e-13)


def test_instrumentation_json():
    doc = json.loads(INST.to_json())
    assert doc["bounds_hold"] is True
    assert_allclose(doc["kernel_functional"], INST.kernel_functional)


def test_compute_Lw_rejects_bare_callable():
    with pytest.raises(TypeError):
        compute_Lw(lambda r: r ** -0.5)


def test_compute_Lw_refuses_uncertified_mass():
    with pytest.raises(KernelDivergenceError):
        compute_Lw(CRIT)
    with pytest.raises(KernelUndecidedError):
        compute_Lw(make_symbol("log", a=1.0))


# ---------------------------------------------------------------------------
# blow-up data design
# ---------------------------------------------------------------------------

def test_design_hits_algebraic_threshold():
    rep = design_blowup_data(HALF, N=512, instrumentation=INST)
    lam_exact = rep.margin * INST.kernel_functional / L_SIN ** 2
    assert_allclose(rep.lam, lam_exact, rtol=1e-10)
    assert rep.condition_value >= 0.0
    assert rep.passes
    assert rep.field.is_odd()
    assert_allclose(rep.field.linf(), rep.lam, rtol=1e-12)


def test_design_threshold_is_sharp():
    rep = design_blowup_data(HALF, N=512, instrumentation=INST)
    halved = ScalarField1D(0.5 * rep.field.values)
    assert blowup_condition(halved, INST.kernel_functional) < 0.0


def test_design_margin_scales_amplitude():
    lo = design_blowup_data(HALF, N=512, margin=1.1, instrumentation=INST)
    hi = design_blowup_data(HALF, N=512, margin=2.2, instrumentation=INST)
    assert_allclose(hi.lam / lo.lam, 2.0, rtol=1e-10)


def test_design_rejects_useless_profile():
    with pytest.raises(ValueError, match="positive"):
        design_blowup_data(HALF, N=512, instrumentation=INST,
                           profile=lambda x: -np.sin(x))


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def test_linear_mode_matches_semigroup():
    fld = ScalarField1D.from_function(128, np.cos)
    rec = simulate_burgers(fld, 1.0, P=lambda k: k.astype(float),
                           nonlinear=False)
    exact = math.exp(-1.0) * np.cos(ScalarField1D.grid_of(128))
    assert np.max(np.abs(rec.final_state.values - exact)) < 1e-12


def test_inviscid_run_follows_characteristics():
    N, T, amp = 1024, 1.0, 0.1
    fld = ScalarField1D.from_function(N, lambda x: amp * np.sin(x))
    rec = simulate_burgers(fld, T, dissipate=False, cfl=0.2, dt_max=2e-3)
    x = ScalarField1D.grid_of(N)
    x0 = x.copy()
    for _ in range(100):
        x0 = x + amp * np.sin(x0) * T
    assert np.max(np.abs(rec.final_state.values - amp * np.sin(x0))) < 1e-10


def test_mean_is_conserved():
    fld = ScalarField1D.from_function(64, lambda x: 0.3 + 0.2 * np.sin(x))
    rec = simulate_burgers(fld, 1.0, sym=HALF)
    assert abs(rec.final_state.values.mean() - 0.3) < 1e-13


def test_oddness_is_preserved():
    fld = ScalarField1D.random_band_limited(256, 8, 1.0, seed=3, odd=True)
    rec = simulate_burgers(fld, 0.5, sym=HALF)
    v = rec.final_state.values
    assert np.max(np.abs(v + np.roll(v[::-1], 1))) < 1e-9 * rec["linf"][0]


def test_max_principle_and_lyapunov_dominated():
    fld = ScalarField1D.random_band_limited(256, 8, 1.0, seed=11)
    rec = simulate_burgers(fld, 1.0, sym=HALF)
    linf = rec["linf"]
    assert np.all(np.diff(linf) <= 1e-12 * linf[0])
    assert np.all(np.diff(rec["l2"]) <= 1e-12 * rec["l2"][0])
    assert np.all(rec["lyapunov"] <= linf[0] * (1.0 + 1e-12))


def test_gradient_threshold_terminates_run():
    rep, rec = designed_run(512)
    assert rec.termination == "gradient-threshold"
    assert rec.meta["max_grad"] >= 50.0 * rep.field.grad_linf()
    assert rec.meta["max_grad_t"] <= rec.t[-1]


def test_dt_floor_terminates_run():
    fld = small_smooth_field()
    rec = simulate_burgers(fld, 0.5, sym=HALF, dt_floor=0.1)
    assert rec.termination == "dt-floor"


def test_final_step_shorter_than_floor_is_allowed():
    fld = small_smooth_field(N=64)
    rec = simulate_burgers(fld, 1.0, sym=HALF, dt_max=0.3, dt_floor=0.15)
    assert rec.termination == "completed"
    assert_allclose(rec.t[-1], 1.0, rtol=1e-12)


def test_record_thinning():
    fld = small_smooth_field(N=64)
    rec = simulate_burgers(fld, 1.0, sym=HALF, record_every=5)
    assert len(rec) < rec.meta["steps"]
    assert rec.meta["record_every"] == 5
    assert np.all(np.diff(rec.t) > 0.0)
    assert_allclose(rec.t[-1], 1.0, rtol=1e-12)


def test_multiplier_validation():
    fld = small_smooth_field(N=64)
    with pytest.raises(ValueError):
        simulate_burgers(fld, 1.0, sym=HALF, P=lambda k: k.astype(float))
    with pytest.raises(ValueError):
        simulate_burgers(fld, 1.0, P=lambda k: -np.ones_like(k, dtype=float))


def test_record_columns():
    fld = small_smooth_field(N=64)
    rec = simulate_burgers(fld, 0.1, sym=HALF)
    assert rec.columns == ("t", "linf", "grad_linf", "l2", "lyapunov", "dt")
    assert rec.to_csv().splitlines()[0] == "t,linf,grad_linf,l2,lyapunov,dt"


# ---------------------------------------------------------------------------
# Lyapunov functional
# ---------------------------------------------------------------------------

def test_lyapunov_sine():
    fld = ScalarField1D.from_function(256, np.sin)
    assert_allclose(lyapunov(fld), L_SIN, atol=1e-14)


def test_lyapunov_constant():
    fld = ScalarField1D.from_function(64, lambda x: 0.7 + 0.0 * x)
    assert_allclose(lyapunov(fld), 0.35, atol=1e-15)


def test_lyapunov_wedge_second_order():
    # the sampled kink limits the spectral sum to second order
    coarse = abs(lyapunov(ScalarField1D.from_function(1024, wedge)) - L_WEDGE)
    fine = abs(lyapunov(ScalarField1D.from_function(4096, wedge)) - L_WEDGE)
    assert coarse < 3e-3
    assert fine < coarse / 3.5


# ---------------------------------------------------------------------------
# comparison dynamics
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("y0,c", [(2.0, 0.0), (5.0, 4.0), (1.0, 4.0),
                                  (-5.0, 4.0)])
def test_comparison_solves_the_ode(y0, c):
    t = np.array([0.1 - 5e-7, 0.1 + 5e-7])
    y, _ = comparison_lyapunov(t, y0, c)
    dydt = (y[1] - y[0]) / 1e-6
    mid = 0.5 * (y[0] + y[1])
    assert_allclose(dydt, mid ** 2 - c, rtol=1e-4)


def test_comparison_blowup_time():
    _, tstar = comparison_lyapunov(np.array([0.0]), 2.0, 0.0)
    assert_allclose(tstar, 0.5, rtol=1e-12)
    _, tstar = comparison_lyapunov(np.array([0.0]), 5.0, 4.0)
    assert_allclose(tstar, 0.25 * math.log(7.0 / 3.0), rtol=1e-12)
    y, _ = comparison_lyapunov(np.array([tstar - 1e-9, tstar + 1e-9]), 5.0, 4.0)
    assert y[0] > 1e6
    assert np.isinf(y[1])


def test_comparison_stable_branches():
    y, tstar = comparison_lyapunov(np.array([10.0]), 1.0, 4.0)
    assert tstar is None
    assert_allclose(y[0], -2.0, atol=1e-6)
    y, _ = comparison_lyapunov(np.array([0.0, 10.0]), 2.0, 4.0)
    assert_array_equal(y, [2.0, 2.0])


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

def test_detect_blowup_on_designed_data():
    rep, rec = designed_run(512)
    v = detect_blowup(rec, INST, grad_factor=50.0)
    assert v.verdict == BLOWUP
    assert rec.verdict == BLOWUP
    lo, hi = v.blowup_bracket
    assert 0.0 <= lo < hi <= rec.t[-1]
    assert v.grad_ratio >= 50.0
    assert v.superlinear_ok and v.ode_ok
    assert v.checks["ode_worst_ratio"] >= 0.95


def test_detect_verdict_stable_under_refinement():
    verdicts = []
    for N in (512, 1024):
        rep, rec = designed_run(N)
        verdicts.append(detect_blowup(rec, INST, grad_factor=50.0).verdict)
    assert verdicts[0] == verdicts[1] == BLOWUP


def test_detect_certified_regular():
    fld = small_smooth_field()
    B = find_B_for_data(fld, CRIT)
    rec = simulate_burgers(fld, 1.0, sym=CRIT, record_every=5)
    v = detect_blowup(rec, certified_B=B)
    assert v.verdict == REGULAR
    assert v.certified
    assert rec.meta["max_grad"] <= B * (1.0 + 1e-2)


def test_detect_regular_without_certificate():
    fld = small_smooth_field()
    rec = simulate_burgers(fld, 1.0, sym=CRIT, record_every=5)
    v = detect_blowup(rec)
    assert v.verdict == REGULAR
    assert not v.certified
    assert "certificate" in v.reason


def test_detect_gradient_above_certificate():
    fld = small_smooth_field()
    rec = simulate_burgers(fld, 1.0, sym=CRIT, record_every=5)
    v = detect_blowup(rec, certified_B=0.01)
    assert v.verdict == UNRESOLVED
    assert "exceeded" in v.reason


def test_detect_crossing_without_instrumentation():
    rep, rec = designed_run(512)
    v = detect_blowup(rec, grad_factor=50.0)
    assert v.verdict == UNRESOLVED


def test_detect_dt_floor_is_unresolved():
    fld = small_smooth_field()
    rec = simulate_burgers(fld, 0.5, sym=HALF, dt_floor=0.1)
    v = detect_blowup(rec)
    assert v.verdict == UNRESOLVED
    assert "suspected" in v.reason


def test_detect_zero_data():
    fld = ScalarField1D.from_function(64, lambda x: 0.0 * x)
    rec = simulate_burgers(fld, 1.0, sym=HALF)
    v = detect_blowup(rec)
    assert v.verdict == REGULAR
    assert v.certified


def test_verdict_report_json():
    rep, rec = designed_run(512)
    v = detect_blowup(rec, INST, grad_factor=50.0)
    doc = json.loads(v.to_json())
    assert doc["verdict"] == BLOWUP
    assert doc["blowup_bracket"][1] > doc["blowup_bracket"][0]


# ---------------------------------------------------------------------------
# discrete differential inequality
# ---------------------------------------------------------------------------

def test_lyapunov_inequality_on_resolved_steps():
    rep, rec = designed_run(1024, record_every=2)
    worst, _ = check_lyapunov_inequality(rec, INST.kernel_functional)
    assert worst >= 0.0


def test_lyapunov_inequality_needs_two_rows():
    cols = ("t", "linf", "grad_linf", "l2", "lyapunov", "dt")
    rec = RunRecord(equation="burgers", columns=cols,
                    series={c: np.array([1.0]) for c in cols},
                    meta={"N": 64})
    with pytest.raises(ValueError, match="too short"):
        check_lyapunov_inequality(rec, 1.0)
