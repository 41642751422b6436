import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bldc_regen.motor import MotorParams
from bldc_regen.mras import (AdaptiveGainState, PIController, SecondOrderModel, coefficients_from_motor,
                             control_output, mit_update, normalized_gamma, reference_model_step,
                             simulate_matched, tracking_error)


def second_order_step(gain, zeta, wn, t):
    """Closed-form unit-step response of gain / (s^2 + 2 zeta wn s + wn^2), underdamped."""
    wd = wn * math.sqrt(1 - zeta ** 2)
    env = math.exp(-zeta * wn * t)
    return gain / wn ** 2 * (1 - env * (math.cos(wd * t) + zeta / math.sqrt(1 - zeta ** 2) * math.sin(wd * t)))


def test_reference_model_step_matches_closed_form():
    zeta, wn = 0.4, 10.0
    m = SecondOrderModel(50.0, 2 * zeta * wn, wn ** 2)
    final = m.dc_gain
    dt = 1e-3
    for n in range(1, 2001):
        m = reference_model_step(m, 1.0, dt)
        if n % 50 == 0:
            assert m.output == pytest.approx(second_order_step(50.0, zeta, wn, n * dt),
                                             abs=1e-3 * final)


def test_models_must_be_hurwitz():
    with pytest.raises(ValueError):
        SecondOrderModel(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        SecondOrderModel(1.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        reference_model_step(SecondOrderModel(1.0, 1.0, 1.0), 1.0, 0.0)


def test_mit_update_direction_and_clamp():
    s = AdaptiveGainState(kp=1.0, gamma=2.0, kp_min=0.5, kp_max=1.2)
    assert mit_update(s, e=0.1, ym=1.0, dt=0.1).kp == pytest.approx(1.0 - 2.0 * 0.1 * 1.0 * 0.1)
    assert mit_update(s, e=-10.0, ym=1.0, dt=0.1).kp == 1.2
    assert mit_update(s, e=10.0, ym=1.0, dt=0.1).kp == 0.5


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-100, 100))
def test_mit_update_edge_cases_leave_kp_bit_unchanged(kp, e, ym):
    s = AdaptiveGainState(kp=kp, gamma=0.0)
    assert mit_update(s, e, ym, 1e-3).kp == kp
    s = AdaptiveGainState(kp=kp, gamma=3.0)
    assert mit_update(s, 0.0, ym, 1e-3).kp == kp
    assert mit_update(s, e, ym, 1e-3, frozen=True).kp == kp


def test_adaptive_state_validation():
    with pytest.raises(ValueError):
        AdaptiveGainState(gamma=-1.0)
    with pytest.raises(ValueError):
        AdaptiveGainState(kp=math.inf)
    with pytest.raises(ValueError):
        mit_update(AdaptiveGainState(), 1.0, 1.0, 0.0)


def test_control_output_saturates():
    assert control_output(AdaptiveGainState(kp=2.0), 3.0) == 6.0
    assert control_output(AdaptiveGainState(kp=2.0), 3.0, limit=5.0) == 5.0
    assert control_output(AdaptiveGainState(kp=2.0), -3.0, limit=5.0) == -5.0
    assert tracking_error(2.0, 1.5) == 0.5


def test_matched_loop_converges_to_ideal_gain():
    plant = SecondOrderModel(2.0, 2.0, 4.0)
    model = SecondOrderModel(3.0, 2.0, 4.0)
    t = np.arange(0.0, 60.0, 1e-3)
    out = simulate_matched(plant, model, AdaptiveGainState(kp=1.0, gamma=2.0), np.sin(t), 1e-3)
    assert out["kp"][-1] == pytest.approx(1.5, rel=1e-3)
    with pytest.raises(ValueError):
        simulate_matched(plant, SecondOrderModel(3.0, 1.0, 4.0), AdaptiveGainState(), np.sin(t), 1e-3)


def test_pi_anti_windup_stops_integrating_when_clamped():
    pi = PIController(kp=1.0, ki=10.0, limit=2.0)
    for _ in range(100):
        u, pi = pi.step(5.0, 0.01)
    assert u == 2.0
    assert pi.integral == 0.0  # clamped from the first step: nothing accumulates
    u, pi = pi.step(-1.0, 0.01)
    assert u == pytest.approx(-1.0 + 10.0 * -0.01)


def test_pi_integrates_below_limit():
    pi = PIController(kp=2.0, ki=3.0)
    u, pi = pi.step(1.0, 0.5)
    assert pi.integral == 0.5
    assert u == pytest.approx(2.0 + 1.5)


def test_coefficients_from_motor():
    p = MotorParams()
    r_l, b_j = p.resistance / p.inductance, p.friction / p.inertia
    assert coefficients_from_motor(p) == pytest.approx((r_l + b_j, r_l * b_j))
    assert coefficients_from_motor(p, "as_printed") == pytest.approx((r_l * b_j, r_l + b_j))
    with pytest.raises(ValueError):
        coefficients_from_motor(p, "other")


def test_normalized_gamma():
    assert normalized_gamma(0.1, 2.0) == pytest.approx(0.025)
    with pytest.raises(ValueError):
        normalized_gamma(0.1, 0.0)
