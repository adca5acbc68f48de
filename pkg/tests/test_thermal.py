import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrfbml.datasets import Mode
from vrfbml.errors import CalibrationError, ParameterError, SimulationError
from vrfbml.thermal import (LITRE, OperatingProfile, ThermalState, VrfbParams,
                            calibrate_resistance, closed_form_temp, nernst_ocv, ode_rhs,
                            simulate_cycle)


def profile(**kw):
    base = dict(mode=Mode.CHARGING, current=40.0, flow_rate=10.0, duration=600.0,
                soc_initial=0.5, t_initial=30.0)
    base.update(kw)
    return OperatingProfile(**base)


def weighted_heat(p, state):
    return p.cp * p.rho * (p.v_stack * state.t_stack + p.v_pos * state.t_pos + p.v_neg * state.t_neg)


# --- parameters --------------------------------------------------------------

def test_litre_inputs_are_stored_in_si():
    p = VrfbParams.from_dict({"v_stack_l": 7.0, "v_pos_l": 150.0})
    assert p.v_stack == pytest.approx(7e-3)
    assert p.v_pos == pytest.approx(0.15)
    assert VrfbParams.from_dict(p.to_dict()) == p


@pytest.mark.parametrize("field,value", [
    ("cp", 0.0), ("rho", -1.0), ("v_stack", 0.0), ("capacity_ah", 0.0),
    ("u_pos", -0.1), ("r_charge", -1e-3), ("n_cells", 0), ("n_cells", 2.5), ("cp", math.nan),
])
def test_invalid_parameters_rejected(field, value):
    with pytest.raises(ParameterError):
        VrfbParams(**{field: value})


def test_unknown_parameter_key_rejected():
    with pytest.raises(ParameterError):
        VrfbParams.from_dict({"heat": 1.0})


@pytest.mark.parametrize("kw", [dict(current=-1.0), dict(flow_rate=-1.0), dict(duration=0.0),
                                dict(soc_initial=0.0), dict(soc_initial=1.0)])
def test_invalid_profile_rejected(kw):
    with pytest.raises(ParameterError):
        profile(**kw)


def test_profile_above_rating_warns_but_is_accepted():
    with pytest.warns(UserWarning, match="rating"):
        profile(current=75.0)
    with pytest.warns(UserWarning, match="flow"):
        profile(flow_rate=25.0)


# --- OCV ---------------------------------------------------------------------

def test_ocv_at_half_charge_is_cell_count_times_e0():
    p = VrfbParams(n_cells=20, e0=1.40, i_diff=0.0)
    assert nernst_ocv(p, 0.5, 303.15) == pytest.approx(28.0, abs=1e-12)


def test_ocv_reference_value():
    # 20 * (1.40 + 2RT/F ln 4) at 303.15 K, evaluated with mpmath at 40 digits
    p = VrfbParams(n_cells=20, e0=1.40)
    assert nernst_ocv(p, 0.8, 303.15) == pytest.approx(29.448580513716437, rel=1e-12)


def test_ocv_self_discharge_drop():
    p = VrfbParams(n_cells=10, e0=1.4, i_diff=2e-6, r_sd=5e4)
    assert nernst_ocv(p, 0.5, 300.0) == pytest.approx(10 * (1.4 - 0.1))


@given(st.floats(0.001, 0.999), st.floats(250.0, 350.0))
def test_ocv_symmetry(soc, temp):
    p = VrfbParams(i_diff=1e-6, r_sd=2e4)
    total = nernst_ocv(p, soc, temp) + nernst_ocv(p, 1 - soc, temp)
    assert total == pytest.approx(2 * p.n_cells * (p.e0 - p.i_diff * p.r_sd), rel=1e-12)


@pytest.mark.parametrize("soc", [0.0, 1.0, -0.2, 1.5])
def test_ocv_domain(soc):
    with pytest.raises(ValueError):
        nernst_ocv(VrfbParams(), soc, 300.0)


# --- right-hand side ----------------------------------------------------------

def test_rhs_fixed_point():
    p = VrfbParams(t_ambient=25.0)
    prof = profile(current=0.0, flow_rate=0.0)
    d = ode_rhs(ThermalState(0, 25.0, 25.0, 25.0, 0.5), p, prof)
    assert d == (0.0, 0.0, 0.0, 0.0)


def test_rhs_joule_only():
    p = VrfbParams(cp=3.2, rho=1.35e6, v_stack=7e-3, r_charge=0.05, de_dt=0.0)
    d = ode_rhs(ThermalState(0, 30, 30, 30, 0.5), p, profile(current=40.0, flow_rate=0.0))
    # 40^2 * 0.05 / (3.2 * 1.35e6 * 0.007) = 1/378 exactly
    assert d.d_stack == pytest.approx(1 / 378, rel=1e-14)
    assert d.d_pos == 0.0 and d.d_neg == 0.0


def test_rhs_entropic_term_uses_kelvin():
    p = VrfbParams(r_charge=0.0, de_dt=1e-3)
    d = ode_rhs(ThermalState(0, 0.0, 0.0, 0.0, 0.5), p, profile(current=10.0, flow_rate=0.0))
    assert d.d_stack == pytest.approx(10 * 273.15 * 1e-3 / (p.cp * p.rho * p.v_stack))


def test_rhs_soc_sign_follows_mode():
    p = VrfbParams(capacity_ah=100.0)
    state = ThermalState(0, 30, 30, 30, 0.5)
    up = ode_rhs(state, p, profile(current=36.0)).d_soc
    down = ode_rhs(state, p, profile(current=36.0, mode=Mode.DISCHARGING)).d_soc
    assert up == pytest.approx(1e-4) and down == pytest.approx(-1e-4)


@given(st.floats(10, 50), st.floats(10, 50), st.floats(10, 50), st.floats(1.0, 18))
def test_rhs_flow_only_redistributes_heat(ts, tp, tn, flow):
    p = VrfbParams(u_pos=0.0, u_neg=0.0)
    d = ode_rhs(ThermalState(0, ts, tp, tn, 0.5), p, profile(current=0.0, flow_rate=flow))
    net = p.v_stack * d.d_stack + p.v_pos * d.d_pos + p.v_neg * d.d_neg
    scale = p.v_stack * abs(d.d_stack) + p.v_pos * abs(d.d_pos) + p.v_neg * abs(d.d_neg)
    assert abs(net) <= 1e-12 * max(scale, 1e-300)


# --- integrator ----------------------------------------------------------------

def test_simulate_fixed_point():
    p = VrfbParams(t_ambient=30.0)
    res = simulate_cycle(p, profile(current=0.0, flow_rate=0.0, duration=3600.0), 1.0)
    assert np.all(res.dataset.temperature == 30.0)
    assert res.final_state.t_pos == 30.0 and res.final_state.t_neg == 30.0


def test_simulate_emits_every_step_plus_origin():
    res = simulate_cycle(VrfbParams(), profile(duration=100.0), 1.0)
    assert len(res.dataset) == 101
    assert res.dataset.time[0] == 0.0 and res.dataset.time[-1] == 100.0
    assert np.all(np.diff(res.dataset.time) > 0)
    assert res.dataset.meta.current_a == 40.0 and res.dataset.meta.mode is Mode.CHARGING


def test_simulate_partial_last_step_and_subsampling():
    res = simulate_cycle(VrfbParams(), profile(duration=10.5), 1.0, sample_every=4)
    assert res.dataset.time.tolist() == [0.0, 4.0, 8.0, 10.5]
    assert res.final_state.t == 10.5


def test_subsampled_run_shares_trajectory():
    p, prof = VrfbParams(), profile(duration=300.0)
    full = simulate_cycle(p, prof, 1.0)
    sub = simulate_cycle(p, prof, 1.0, sample_every=15)
    assert np.array_equal(full.dataset.temperature[::15], sub.dataset.temperature)


def test_simulate_rejects_bad_step():
    with pytest.raises(SimulationError):
        simulate_cycle(VrfbParams(), profile(duration=10.0), 20.0)
    with pytest.raises(SimulationError):
        simulate_cycle(VrfbParams(), profile(), 0.0)


def test_simulate_validates_parameters():
    p = VrfbParams()
    object.__setattr__(p, "cp", -1.0)  # bypass frozen construction checks
    with pytest.raises(ParameterError):
        simulate_cycle(p, profile(), 1.0)


def test_conservation_without_losses():
    p = VrfbParams(u_pos=0.0, u_neg=0.0)
    prof = profile(current=0.0, flow_rate=10.0, duration=3600.0)
    start = ThermalState(0.0, 45.0, 20.0, 25.0, 0.5)
    res = simulate_cycle(p, prof, 1.0, initial_state=start)
    drift = abs(weighted_heat(p, res.final_state) - weighted_heat(p, start)) / weighted_heat(p, start)
    assert drift <= 1e-6
    # and the temperatures actually moved
    assert abs(res.final_state.t_stack - 45.0) > 1.0


def test_relaxation_towards_ambient():
    p = VrfbParams(t_ambient=30.0, u_pos=50.0, u_neg=50.0)
    prof = profile(current=0.0, flow_rate=10.0, duration=7200.0)
    start = ThermalState(0.0, 40.0, 22.0, 35.0, 0.5)
    res = simulate_cycle(p, prof, 1.0, initial_state=start)
    dev = np.maximum.reduce([np.abs(res.dataset.temperature - 30.0),
                             np.abs(np.array(res.tank_pos) - 30.0),
                             np.abs(np.array(res.tank_neg) - 30.0)])
    assert np.all(np.diff(dev) <= 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 55.0), st.floats(0.0, 55.0))
def test_final_temperature_monotone_in_current(i1, i2):
    lo, hi = sorted((i1, i2))
    p = VrfbParams(de_dt=0.0)
    finals = [simulate_cycle(p, profile(current=i, duration=1800.0), 5.0).final_state.t_stack
              for i in (lo, hi)]
    assert finals[0] <= finals[1] + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(list(Mode)), st.floats(0.02, 0.98), st.floats(1.0, 60.0))
def test_soc_stays_clamped(mode, soc0, current):
    p = VrfbParams(capacity_ah=1.0)
    res = simulate_cycle(p, profile(mode=mode, soc_initial=soc0, current=current, duration=7200.0), 60.0)
    assert 0.01 <= res.final_state.soc <= 0.99


def test_rk4_global_order():
    # the stack relaxes onto the tanks within ~20 s; measure inside that transient,
    # later the error sits at roundoff level
    p = VrfbParams()
    prof = profile(current=50.0, duration=60.0)
    start = ThermalState(0.0, 40.0, 20.0, 24.0, 0.5)

    def end(dt):
        s = simulate_cycle(p, prof, dt, initial_state=start).final_state
        return np.array([s.t_stack, s.t_pos, s.t_neg])

    ref = end(1.0 / 16)
    ratio = np.linalg.norm(end(1.0) - ref) / np.linalg.norm(end(0.5) - ref)
    assert 12.0 <= ratio <= 20.0


# --- closed form ---------------------------------------------------------------

def test_closed_form_zero_at_origin():
    for mode in Mode:
        assert closed_form_temp(VrfbParams(), profile(mode=mode), 28.0, 0.0) == 0.0


def test_closed_form_modes_agree_when_symmetric():
    p = VrfbParams(r_charge=0.4, r_discharge=0.4, de_dt=2e-4)
    a = closed_form_temp(p, profile(mode=Mode.CHARGING, current=45.0), 28.0, 3600.0)
    b = closed_form_temp(p, profile(mode=Mode.DISCHARGING, current=45.0), 28.0, 3600.0)
    assert a == b


def test_closed_form_reference_value():
    # exact rational evaluation with fractions.Fraction of the printed expression
    p = VrfbParams(cp=3.2, rho=1.35e6, v_stack=7 * LITRE, r_charge=0.4, de_dt=1e-3)
    value = closed_form_temp(p, profile(current=45.0, flow_rate=10.0), 28.0, 3600.0)
    assert value == pytest.approx(0.5596980624571198, rel=1e-12)


def test_closed_form_zero_denominator():
    # V_s + 0 - I dE/dT / (cp rho) = 0 at t = 0
    p = VrfbParams(cp=1.0, rho=1.0, v_stack=1.0, de_dt=0.1)
    with pytest.raises(ZeroDivisionError):
        closed_form_temp(p, profile(current=10.0, flow_rate=0.0), 28.0, 5.0)


# --- calibration ---------------------------------------------------------------

def test_calibration_round_trip():
    p = VrfbParams(r_charge=0.05)
    prof = profile(current=40.0, duration=3600.0, t_initial=25.0)
    target = simulate_cycle(p, prof, 1.0).mean_stack_temp
    r = calibrate_resistance(replace(p, r_charge=1.0), prof, target, 1.0)
    assert r == pytest.approx(0.05, abs=1e-4)


def test_calibration_at_initial_temperature_gives_zero_resistance():
    p = VrfbParams(t_ambient=25.0)
    prof = profile(current=40.0, duration=1800.0, t_initial=25.0)
    assert calibrate_resistance(p, prof, 25.0, 1.0) == pytest.approx(0.0, abs=1e-6)


def test_calibration_below_reachable_raises():
    p = VrfbParams(t_ambient=30.0)
    prof = profile(current=40.0, duration=1800.0, t_initial=25.0)
    with pytest.raises(CalibrationError) as info:
        calibrate_resistance(p, prof, 24.0, 1.0)
    assert info.value.achieved_mean > 24.0


def test_calibration_unreachable_target_reports_achieved_mean():
    prof = profile(current=40.0, duration=600.0, t_initial=25.0)
    with pytest.raises(CalibrationError) as info:
        calibrate_resistance(VrfbParams(), prof, 90.0, 1.0, r_max=1.0)
    assert info.value.achieved_mean < 90.0


def test_calibration_to_measured_40a_charging_mean():
    p = VrfbParams(t_ambient=30.0)
    prof = profile(current=40.0, flow_rate=10.0, duration=16615.0, soc_initial=0.1, t_initial=23.61)
    r = calibrate_resistance(p, prof, 27.743, 1.0)
    mean = simulate_cycle(replace(p, r_charge=r), prof, 1.0).mean_stack_temp
    assert abs(mean - 27.743) <= 1e-3


def test_calibration_sets_the_mode_resistance_only():
    p = VrfbParams(r_charge=0.3, r_discharge=0.3)
    prof = profile(mode=Mode.DISCHARGING, duration=1200.0, t_initial=25.0)
    r = calibrate_resistance(p, prof, 26.0, 2.0)
    tuned = p.with_resistance(Mode.DISCHARGING, r)
    assert tuned.r_charge == 0.3 and tuned.r_discharge == r


def test_closed_form_positive_after_start():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert closed_form_temp(VrfbParams(de_dt=0.0), profile(), 28.0, 10.0) > 0
