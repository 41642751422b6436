import io
import math

import pytest
from hypothesis import given, strategies as st

from bldc_regen.dtc import (CONVENTIONAL_TABLE, CONVENTIONAL_TABLE_PATCHED, MODIFIED_TABLE,
                            MODIFIED_TABLE_PATCHED, DtcConfig, DtcState, FluxCmd, FluxEstimate,
                            HysteresisState, Measurements, Mode, References, TorqueCmd,
                            control_step, estimate_flux, flux_hysteresis, flux_sector,
                            lookup_conventional, lookup_modified, read_table_csv, sector_of,
                            table_rows, torque_hysteresis_2level, torque_hysteresis_3level,
                            write_table_csv)
from bldc_regen.inverter import SwitchState
from bldc_regen.motor import MotorParams


@pytest.mark.parametrize("deg, sector", [
    (0, 1), (29.9, 1), (30, 2), (-30, 1), (-30.1, 6), (90, 3), (150, 4), (210, 5), (270, 6),
    (330, 1), (359.9, 1), (720, 1),
])
def test_sector_of_boundaries(deg, sector):
    assert sector_of(math.radians(deg)) == sector


@given(st.integers(1, 6), st.floats(-29.0, 29.0))
def test_modified_sectors_are_centred_on_their_vector(k, off):
    ang = math.radians(30 + 60 * (k - 1) + off)
    f = FluxEstimate(math.cos(ang), math.sin(ang))
    assert flux_sector(f, Mode.MODIFIED) == k


@given(st.integers(1, 6), st.floats(1.0, 59.0))
def test_conventional_sector_lies_between_neighbouring_vectors(k, off):
    # V_{k-1} at 30 + 60 (k - 2) degrees and V_k 60 degrees later bound sector k
    ang = math.radians(-30 + 60 * (k - 1) + off)
    f = FluxEstimate(math.cos(ang), math.sin(ang))
    assert flux_sector(f, "conventional") == k


def test_flux_comparator_holds_inside_band():
    h = HysteresisState(0.01, 1.0)
    assert flux_hysteresis(0.02, h) == FluxCmd.FI
    assert flux_hysteresis(-0.02, h) == FluxCmd.FD
    assert flux_hysteresis(0.005, HysteresisState(0.01, 1.0, last_flux=FluxCmd.FD)) == FluxCmd.FD


def test_two_level_torque_comparator():
    h = HysteresisState(0.01, 1.0, last_torque=TorqueCmd.TD)
    assert torque_hysteresis_2level(0.5, h) == TorqueCmd.TD
    assert torque_hysteresis_2level(1.5, h) == TorqueCmd.TI
    assert torque_hysteresis_2level(0.5, HysteresisState(0.01, 1.0)) == TorqueCmd.TI


@pytest.mark.parametrize("err, last, expected", [
    (2.0, TorqueCmd.T0, TorqueCmd.TI), (-2.0, TorqueCmd.T0, TorqueCmd.TD),
    (0.8, TorqueCmd.TI, TorqueCmd.TI), (0.3, TorqueCmd.TI, TorqueCmd.T0),
    (-0.8, TorqueCmd.TD, TorqueCmd.TD), (-0.3, TorqueCmd.TD, TorqueCmd.T0),
    (0.8, TorqueCmd.T0, TorqueCmd.T0), (0.8, TorqueCmd.TD, TorqueCmd.T0),
])
def test_three_level_torque_comparator(err, last, expected):
    h = HysteresisState(0.01, 1.0, 0.5, last_torque=last)
    assert torque_hysteresis_3level(err, h) == expected


def test_hysteresis_validation():
    with pytest.raises(ValueError):
        HysteresisState(0.0, 1.0)
    with pytest.raises(ValueError):
        HysteresisState(0.01, 1.0, 2.0)


def test_rotating_voltage_traces_a_flux_circle():
    # v = V (cos wt, sin wt) with R = 0 integrates to a circle of radius V / w
    v_amp, w, dt = 50.0, 2 * math.pi * 50, 1e-6
    f = FluxEstimate(0.0, -v_amp / w)
    radii = []
    for n in range(20000):
        t = (n + 0.5) * dt
        f = estimate_flux(f, (v_amp * math.cos(w * t), v_amp * math.sin(w * t)), (0.0, 0.0), 0.0, dt)
        radii.append(f.magnitude)
    assert max(abs(r - v_amp / w) for r in radii) < 1e-6 * v_amp / w + 1e-9


def test_estimator_subtracts_resistive_drop_and_leaks():
    f = estimate_flux(FluxEstimate(1.0, 0.0), (2.0, 0.0), (4.0, 0.0), 0.5, 0.1, leakage=1.0)
    assert f.psi_alpha == pytest.approx(1.0 + (2.0 - 2.0 - 1.0) * 0.1)
    with pytest.raises(ValueError):
        estimate_flux(f, (0, 0), (0, 0), 0.5, 0.0)


def test_lookup_argument_checks():
    with pytest.raises(ValueError):
        lookup_conventional(FluxCmd.FI, TorqueCmd.T0, 1)
    with pytest.raises(ValueError):
        lookup_modified(TorqueCmd.TI, FluxCmd.FI, 7)


def test_patched_modified_table_differs_in_one_cell():
    diff = (MODIFIED_TABLE != MODIFIED_TABLE_PATCHED).nonzero()
    assert len(diff[0]) == 1
    assert lookup_modified(TorqueCmd.TD, FluxCmd.FD, 5) == 6
    assert lookup_modified(TorqueCmd.TD, FluxCmd.FD, 5, patched=True) == 3


def test_patched_conventional_table_swaps_the_fd_rows():
    assert (CONVENTIONAL_TABLE[0] == CONVENTIONAL_TABLE_PATCHED[0]).all()
    for k in range(1, 7):
        assert lookup_conventional(FluxCmd.FD, TorqueCmd.TI, k, patched=True) == \
            lookup_conventional(FluxCmd.FD, TorqueCmd.TD, k)
        assert lookup_conventional(FluxCmd.FD, TorqueCmd.TD, k, patched=True) == 0


@given(st.integers(1, 6))
def test_modified_table_follows_rotation_rule(k):
    def v(n):
        return (n - 1) % 6 + 1
    assert lookup_modified(TorqueCmd.TI, FluxCmd.FI, k) == v(k + 1)
    assert lookup_modified(TorqueCmd.TI, FluxCmd.FD, k) == v(k + 2)
    assert lookup_modified(TorqueCmd.TD, FluxCmd.FI, k) == v(k - 1)
    assert lookup_modified(TorqueCmd.TD, FluxCmd.FD, k, patched=True) == v(k - 2)


@pytest.mark.parametrize("mode", ["conventional", "modified"])
@pytest.mark.parametrize("patched", [False, True])
def test_table_csv_round_trip(mode, patched):
    rows = table_rows(mode, patched)
    assert len(rows) == 36
    buf = io.StringIO()
    write_table_csv(rows, buf)
    assert read_table_csv(buf.getvalue()) == rows


def test_table_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        read_table_csv("a,b,c,d,e\n")


def test_mode_parse():
    assert Mode.parse("Modified") is Mode.MODIFIED
    assert Mode.parse(0) is Mode.CONVENTIONAL
    with pytest.raises(ValueError):
        Mode.parse("sideways")


def test_control_step_decodes_a_vector_and_updates_memory():
    motor = MotorParams()
    cfg = DtcConfig()
    state = DtcState.initial(motor, cfg)
    meas = Measurements((0.0, 0.0), (0.0, 0.0), (0.0, 0.0, 0.0), 0.0)
    sw, nxt = control_step(References(torque=10.0, flux=cfg.flux_ref), meas, cfg, state, motor, 5e-5)
    assert isinstance(sw, SwitchState)
    assert nxt.hysteresis.last_torque == TorqueCmd.TI
    assert nxt.hysteresis.last_flux == FluxCmd.FI  # magnet flux alone is below the reference
    assert sw.vector_id == lookup_modified(TorqueCmd.TI, FluxCmd.FI, nxt.sector)


def test_dtc_config_validation():
    with pytest.raises(ValueError):
        DtcConfig(flux_ref=0.0)
    with pytest.raises(ValueError):
        DtcConfig(mode="sideways")


@given(st.floats(-0.99, 0.99), st.sampled_from([FluxCmd.FI, FluxCmd.FD]),
       st.sampled_from([TorqueCmd.TI, TorqueCmd.TD]))
def test_two_level_outputs_hold_strictly_inside_the_band(frac, last_f, last_t):
    h = HysteresisState(0.01, 1.0, last_flux=last_f, last_torque=last_t)
    assert flux_hysteresis(frac * 0.01, h) == last_f
    assert torque_hysteresis_2level(frac * 1.0, h) == last_t


@given(st.floats(-0.99, 0.99), st.sampled_from(list(TorqueCmd)))
def test_three_level_never_jumps_across_inside_the_band(frac, last):
    out = torque_hysteresis_3level(frac, HysteresisState(0.01, 1.0, 0.5, last_torque=last))
    assert out in (last, TorqueCmd.T0)


@given(st.sampled_from(list(FluxCmd)), st.sampled_from(list(TorqueCmd)), st.integers(1, 6),
       st.booleans())
def test_lookups_are_total(f, t, k, patched):
    assert 0 <= lookup_modified(t, f, k, patched) <= 7
    if t != TorqueCmd.T0:
        assert 0 <= lookup_conventional(f, t, k, patched) <= 7
