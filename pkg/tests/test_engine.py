import io
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from bldc_regen import _loop, engine
from bldc_regen.cycle import DriveCycle, trapezoid
from bldc_regen.dtc import Mode
from bldc_regen.motor import NonFiniteState

from conftest import make_scenario

REST = DriveCycle((0.0, 1.0), (0.0, 0.0), "rest")


@pytest.fixture(scope="module")
def short_decel():
    """Modified and conventional runs of a 7 s trapezoid."""
    cycle = trapezoid(4.0, 3.0, 1.0, 3.0, 0.0)
    runs = {m: engine.run(make_scenario(dtc__mode=m, dtc__table1_patched=True), cycle)
            for m in ("modified", "conventional")}
    return cycle, runs


def test_rest_equilibrium():
    r = engine.run(make_scenario(sim__duration=0.3), REST)
    assert np.all(r.column("speed") == 0.0)
    assert np.all(np.diff(r.column("soc")) <= 0.0)
    assert np.max(np.abs(r.column("torque"))) < 1e-6


def test_trace_length_contract():
    sc = make_scenario(sim__duration=0.01234)
    r = engine.run(sc, REST)
    assert r.trace.shape == (math.floor(0.01234 / sc.sim.dt_control) + 1, len(engine.TRACE_COLUMNS))
    assert r.column("t")[1] == sc.sim.dt_control


def test_whole_cycle_runs_by_default():
    r = engine.run(make_scenario(), DriveCycle((0.0, 0.05), (0.0, 0.0)))
    assert r.column("t")[-1] == pytest.approx(0.05)


def test_conventional_pi_settles_on_a_step_reference(short_decel):
    _, runs = short_decel
    r = runs["conventional"]
    t, err = r.column("t"), r.column("speed") - r.column("speed_ref")
    cruise = (t > 3.5) & (t <= 4.0)
    assert np.max(np.abs(err[cruise])) < 0.1


def test_modified_tracks_the_cycle(short_decel):
    _, runs = short_decel
    assert runs["modified"].summary["rms_speed_error_mps"] < 0.1


def test_summary_fields(short_decel):
    s = short_decel[1]["modified"].summary
    for key in ("soc_initial", "soc_final", "rms_speed_error_mps", "torque_ripple_nm",
                "energy_regenerated_J"):
        assert math.isfinite(s[key])
    assert s["mode"] == "modified" and s["controller"] == "pi"
    assert s["energy_regenerated_J"] > 0


def test_braking_energy_cannot_exceed_kinetic_energy_released(short_decel):
    _, runs = short_decel
    for r in runs.values():
        t = r.column("t")
        start, stop = int(np.searchsorted(t, 4.0)), len(t) - 1
        audit = engine.energy_audit(r, start, stop)
        assert audit["kinetic"] < 0
        assert -audit["battery"] <= -audit["kinetic"]


def test_energy_audit_of_an_empty_window_is_zero(short_decel):
    audit = engine.energy_audit(short_decel[1]["modified"], 10, 10)
    assert all(v == 0.0 for v in audit.values())


def test_energy_audit_at_rest():
    r = engine.run(make_scenario(sim__duration=0.1), REST)
    audit = engine.energy_audit(r)
    assert all(abs(v) < 1e-9 for v in audit.values())


def test_compare_identical_scenarios_gives_zero_deltas():
    cycle = trapezoid(2.0, 0.5, 1.0, 0.5)
    sc = make_scenario(sim__duration=1.2, cycle__time_s=list(cycle.times),
                       cycle__speed_mps=list(cycle.speeds), cycle__builtin="")
    a, b = engine.compare(sc, sc)
    delta = engine.comparison_summary(a, b)
    assert math.isfinite(a.summary["torque_ripple_nm"])
    assert all(v == 0.0 for k, v in delta.items() if k.startswith("delta_"))
    assert np.array_equal(a.trace, b.trace)


def test_compare_rejects_different_cycles():
    a = make_scenario(sim__duration=0.1)
    b = make_scenario(sim__duration=0.1, cycle__builtin="",
                      cycle__time_s=[0.0, 1.0], cycle__speed_mps=[0.0, 0.0])
    with pytest.raises(engine.MismatchError):
        engine.compare(a, b)
    with pytest.raises(engine.MismatchError):
        engine.compare(a, make_scenario(sim__duration=0.2))


def test_non_finite_state_reports_step(monkeypatch):
    monkeypatch.setattr(_loop, "run_loop", lambda *args: 7)
    with pytest.raises(NonFiniteState) as exc:
        engine.run(make_scenario(sim__duration=0.01), REST)
    assert exc.value.step == 7


def test_trace_csv_round_trip(tmp_path, short_decel):
    r = short_decel[1]["modified"]
    path = tmp_path / "trace.csv"
    engine.write_trace_csv(r, path)
    assert path.read_text().splitlines()[0] == ",".join(engine.TRACE_COLUMNS)
    back = engine.read_trace_csv(path)
    assert np.array_equal(back, r.trace)
    row = path.read_text().splitlines()[5].split(",")
    assert "." not in row[engine.TRACE_COLUMNS.index("sector")]
    assert "." not in row[engine.TRACE_COLUMNS.index("vector_id")]


def test_summary_writer():
    buf = io.StringIO()
    engine.write_summary({"a": 1, "b": 0.5}, buf)
    assert buf.getvalue() == "a = 1\nb = 0.5\n"


def test_steady_mask_and_ripple():
    cycle = DriveCycle((0.0, 1.0, 2.0), (0.0, 0.0, 1.0))
    r = engine.run(make_scenario(sim__duration=1.5), cycle)
    mask = engine.steady_mask(r, settle=0.5)
    t = r.column("t")
    assert not mask[t < 0.5].any() and mask[(t >= 0.5) & (t <= 1.0)].all()
    assert not mask[t > 1.0].any()
    assert math.isnan(engine.torque_ripple(r, settle=5.0))


def test_with_mode():
    assert engine.with_mode(make_scenario(), "conventional").dtc.mode is Mode.CONVENTIONAL


@pytest.mark.slow
@settings(max_examples=20, deadline=None, derandomize=True,
          suppress_health_check=[HealthCheck.too_slow])
@given(st.floats(3.0, 5.0), st.floats(0.6, 1.2), st.floats(0.6, 1.2))
def test_modified_dtc_regenerates_on_random_decel_cycles(v, accel, decel):
    t_accel, t_decel = v / accel, v / decel
    cycle = trapezoid(v, t_accel, 1.0, t_decel, 0.2)
    r = engine.run(make_scenario(dtc__mode="modified"), cycle)
    start = 0.2 + t_accel + 1.0
    assert engine.window_mean(r, "i_dc", start, start + t_decel) < 0.0
