import pytest
from hypothesis import given, strategies as st

from bldc_regen.battery import BatteryState, coulomb_step, soc_step, terminal_voltage


def test_open_circuit_voltage_is_affine_in_soc():
    b = BatteryState(soc=0.5, v_min=100.0, v_max=126.0)
    assert b.open_circuit_voltage == pytest.approx(113.0)
    assert terminal_voltage(b, 20.0) == pytest.approx(113.0 - 20.0 * b.internal_resistance)


def test_discharge_and_charge_directions():
    b = BatteryState(soc=0.5, capacity=3600.0)
    assert soc_step(b, 10.0, 1.0).soc == pytest.approx(0.5 - 10.0 / 3600.0)
    assert soc_step(b, -10.0, 1.0).soc == pytest.approx(0.5 + 10.0 / 3600.0)


def test_soc_is_clamped():
    assert coulomb_step(0.001, 100.0, 3600.0) == 0.0
    assert coulomb_step(0.999, -100.0, 3600.0) == 1.0


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=50))
def test_coulomb_counting_conserves_charge(currents):
    b = BatteryState(soc=0.5, capacity=1e6)
    for i in currents:
        b = soc_step(b, i, 0.1)
    assert b.soc == pytest.approx(0.5 - 0.1 * sum(currents) / 1e6, abs=1e-12)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=20))
def test_soc_never_rises_while_discharging(currents):
    b = BatteryState(soc=0.3)
    for i in currents:
        nxt = soc_step(b, i, 0.01)
        assert nxt.soc <= b.soc
        b = nxt


@pytest.mark.parametrize("kwargs", [
    {"soc": 1.2}, {"capacity": 0.0}, {"v_min": 130.0}, {"internal_resistance": -0.1},
])
def test_battery_validation(kwargs):
    with pytest.raises(ValueError):
        BatteryState(**kwargs)


def test_soc_step_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        soc_step(BatteryState(), 1.0, 0.0)
