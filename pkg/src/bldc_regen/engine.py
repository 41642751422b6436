"""Closed-loop simulation: scenario in, trace and summary out."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TextIO

import numpy as np

from . import _loop
from ._loop import AUX_COLUMNS, TRACE_COLUMNS
from .config import Scenario
from .cycle import DriveCycle
from .dtc import (CONVENTIONAL_TABLE, CONVENTIONAL_TABLE_PATCHED, MODIFIED_TABLE,
                  MODIFIED_TABLE_PATCHED, Mode)
from .inverter import LEG_TABLE
from .mras import coefficients_from_motor, normalized_gamma
from .motor import NonFiniteState

log = logging.getLogger(__name__)

TRACE_HEADER = ",".join(TRACE_COLUMNS)
SETTLE_TIME = 0.5
"""seconds after a reference change that are excluded from ripple statistics"""


class MismatchError(ValueError):
    """Two runs being compared do not share the same drive cycle."""


@dataclass
class RunResult:
    scenario: Scenario
    cycle: DriveCycle
    trace: np.ndarray
    """one row per control period, columns :data:`TRACE_COLUMNS`"""
    aux: np.ndarray
    """cumulative energies and shaft speeds, columns :data:`AUX_COLUMNS`"""
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name in TRACE_COLUMNS:
            return self.trace[:, TRACE_COLUMNS.index(name)]
        return self.aux[:, AUX_COLUMNS.index(name)]


def _mras_coefficients(sc: Scenario) -> tuple[float, float, float]:
    m = sc.mras
    if m.denom_s_coeff > 0:
        c1, c0 = m.denom_s_coeff, m.denom_const_coeff
    else:
        c1, c0 = coefficients_from_motor(sc.motor, m.placement)
    bm = m.model_gain if m.model_gain > 0 else c0
    return bm, c1, c0


def _param_vector(sc: Scenario, cycle: DriveCycle) -> np.ndarray:
    p = np.zeros(_loop.N_PARAMS)
    mo, ve = sc.motor, sc.vehicle
    p[_loop.R] = mo.resistance
    p[_loop.L] = mo.inductance
    p[_loop.KE] = mo.ke
    p[_loop.PP] = mo.pole_pairs
    jt = mo.inertia
    if sc.road.inertia == "reflected":
        jt += ve.reflected_inertia
    p[_loop.JT] = jt
    p[_loop.B] = mo.friction
    p[_loop.M] = ve.mass
    p[_loop.G] = ve.gravity
    p[_loop.F] = ve.rolling_coeff
    p[_loop.RHO] = ve.air_density
    p[_loop.CD] = ve.drag_coeff
    p[_loop.AREA] = ve.frontal_area
    p[_loop.RW] = ve.wheel_radius
    p[_loop.GEAR] = ve.gear_ratio
    p[_loop.ETA] = ve.driveline_efficiency
    p[_loop.SLOPE] = sc.road.slope
    p[_loop.COMMANDED] = 1.0 if sc.road.inertia == "commanded" else 0.0
    d = sc.dtc
    p[_loop.MODE] = int(d.mode)
    p[_loop.PSI_REF] = d.flux_ref
    p[_loop.DF] = d.flux_band
    p[_loop.DTB] = d.torque_band
    p[_loop.DTI] = d.torque_inner
    p[_loop.LEAK] = d.leakage
    s = sc.speed
    p[_loop.CTRL] = 1.0 if s.controller == "mras" else 0.0
    p[_loop.PI_KP] = s.kp
    p[_loop.PI_KI] = s.ki
    p[_loop.T_MAX] = s.torque_limit
    bm, c1, c0 = _mras_coefficients(sc)
    m = sc.mras
    w_peak = cycle.peak_speed * ve.gear_ratio / ve.wheel_radius
    if m.gamma >= 0:
        gamma = m.gamma
    else:
        # model output peaks near the reference peak for a unit-gain model
        gamma = normalized_gamma(m.gamma0, max(w_peak * bm / c0, 1e-9))
    p[_loop.GAMMA] = gamma
    p[_loop.KP0] = m.kp_init
    p[_loop.KP_MIN] = m.kp_min
    p[_loop.KP_MAX] = m.kp_max
    p[_loop.BM] = bm
    p[_loop.C1] = c1
    p[_loop.C0] = c0
    p[_loop.W_MAX] = m.speed_limit
    b = sc.battery
    p[_loop.SOC0] = b.soc
    p[_loop.CAP] = b.capacity
    p[_loop.VMIN] = b.v_min
    p[_loop.VMAX] = b.v_max
    p[_loop.RINT] = b.internal_resistance
    p[_loop.DT_E] = sc.sim.dt_electrical
    p[_loop.THETA0] = sc.sim.theta0
    return p


def control_steps(sc: Scenario, cycle: DriveCycle) -> int:
    duration = sc.sim.duration if sc.sim.duration > 0 else cycle.duration
    return int(math.floor(duration / sc.sim.dt_control + 1e-9))


def run(scenario: Scenario, cycle: DriveCycle | None = None) -> RunResult:
    """Simulate ``scenario`` over its drive cycle (or ``cycle`` when given).

    Raises :class:`NonFiniteState` if the integration blows up.
    """
    cycle = cycle if cycle is not None else scenario.drive_cycle()
    n = control_steps(scenario, cycle)
    times, speeds = cycle.arrays()
    trace = np.zeros((n + 1, len(TRACE_COLUMNS)))
    aux = np.zeros((n + 1, len(AUX_COLUMNS)))
    mod_table = MODIFIED_TABLE_PATCHED if scenario.dtc.table3_patched else MODIFIED_TABLE
    conv_table = CONVENTIONAL_TABLE_PATCHED if scenario.dtc.table1_patched else CONVENTIONAL_TABLE
    log.info("running %s: %d control steps x %d substeps", scenario.sim.name, n,
             scenario.sim.substeps)
    bad = _loop.run_loop(_param_vector(scenario, cycle), conv_table, mod_table, LEG_TABLE,
                         times, speeds, n, scenario.sim.substeps, trace, aux)
    if bad >= 0:
        raise NonFiniteState("simulation state became non-finite", step=int(bad))
    result = RunResult(scenario, cycle, trace, aux)
    result.summary = summarize(result)
    return result


def compare(a: Scenario, b: Scenario, parallel: bool = True) -> tuple[RunResult, RunResult]:
    """Run two scenarios over the same drive cycle (concurrently by default)."""
    ca, cb = a.drive_cycle(), b.drive_cycle()
    if ca.times != cb.times or ca.speeds != cb.speeds:
        raise MismatchError(f"drive cycles differ: {ca.name!r} vs {cb.name!r}")
    if control_steps(a, ca) != control_steps(b, cb) or a.sim.dt_control != b.sim.dt_control:
        raise MismatchError("runs differ in duration or control period")
    if not parallel:
        return run(a, ca), run(b, cb)
    # the compiled loop releases the GIL
    with ThreadPoolExecutor(max_workers=2) as pool:
        fa, fb = pool.submit(run, a, ca), pool.submit(run, b, cb)
        return fa.result(), fb.result()


# ---------------------------------------------------------------------------
# post-processing


def steady_mask(result: RunResult, settle: float = SETTLE_TIME) -> np.ndarray:
    """Rows whose speed reference has been constant for at least ``settle`` seconds."""
    t = result.column("t")
    ref = result.column("speed_ref")
    mask = np.zeros(t.size, dtype=bool)
    since = 0.0
    for j in range(1, t.size):
        if abs(ref[j] - ref[j - 1]) > 1e-9:
            since = t[j]
        mask[j] = t[j] - since >= settle
    return mask


def torque_ripple(result: RunResult, settle: float = SETTLE_TIME) -> float:
    """Standard deviation of the torque estimate about the torque reference in
    steady constant-speed windows."""
    mask = steady_mask(result, settle)
    if not mask.any():
        return float("nan")
    err = result.column("torque")[mask] - result.column("torque_ref")[mask]
    return float(np.std(err))


def comparison_summary(a: RunResult, b: RunResult) -> dict:
    """Deltas ``b - a`` of the headline figures; all zero for identical runs."""
    sa, sb = a.summary, b.summary
    return {
        "scenario_a": sa["scenario"],
        "scenario_b": sb["scenario"],
        "cycle": sa["cycle"],
        "delta_soc_final": sb["soc_final"] - sa["soc_final"],
        "delta_rms_speed_error_mps": sb["rms_speed_error_mps"] - sa["rms_speed_error_mps"],
        "delta_torque_ripple_nm": sb["torque_ripple_nm"] - sa["torque_ripple_nm"],
        "delta_energy_regenerated_J": sb["energy_regenerated_J"] - sa["energy_regenerated_J"],
    }


def window_mean(result: RunResult, name: str, t0: float, t1: float) -> float:
    """Mean of a trace column over records with ``t0 < t <= t1``."""
    t = result.column("t")
    sel = (t > t0) & (t <= t1)
    return float(np.mean(result.column(name)[sel]))


def energy_audit(result: RunResult, start: int = 0, stop: int | None = None) -> dict:
    """Energy balance between records ``start`` and ``stop`` (inclusive).

    ``battery = kinetic + magnetic + copper + viscous + load + residual``; the
    relative residual divides by the sum of the magnitudes of every term.
    """
    stop = result.aux.shape[0] - 1 if stop is None else stop
    a0, a1 = result.aux[start], result.aux[stop]
    d = {name: float(a1[k] - a0[k]) for k, name in enumerate(AUX_COLUMNS)}
    terms = {
        "battery": d["e_battery"],
        "kinetic": d["kinetic"],
        "magnetic": d["magnetic"],
        "copper": d["e_copper"],
        "viscous": d["e_viscous"],
        "load": d["e_load"],
    }
    residual = terms["battery"] - sum(v for k, v in terms.items() if k != "battery")
    scale = sum(abs(v) for v in terms.values())
    terms["residual"] = residual
    terms["relative_residual"] = abs(residual) / scale if scale > 0 else 0.0
    return terms


def summarize(result: RunResult) -> dict:
    tr = result.column
    speed_err = tr("speed") - tr("speed_ref")
    idc = tr("i_dc")
    audit = energy_audit(result)
    return {
        "scenario": result.scenario.sim.name,
        "mode": Mode(result.scenario.dtc.mode).name.lower(),
        "controller": result.scenario.speed.controller,
        "cycle": result.cycle.name,
        "duration_s": float(tr("t")[-1]),
        "soc_initial": float(tr("soc")[0]),
        "soc_final": float(tr("soc")[-1]),
        "rms_speed_error_mps": float(np.sqrt(np.mean(speed_err ** 2))),
        "max_speed_error_mps": float(np.max(np.abs(speed_err))),
        "torque_ripple_nm": torque_ripple(result),
        "mean_i_dc_a": float(np.mean(idc[1:])) if idc.size > 1 else 0.0,
        "energy_regenerated_J": float(tr("e_regen")[-1]),
        "energy_battery_J": audit["battery"],
        "energy_copper_J": audit["copper"],
        "energy_load_J": audit["load"],
        "energy_residual_rel": audit["relative_residual"],
        "kp_final": float(tr("kp")[-1]),
    }


# ---------------------------------------------------------------------------
# output


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace_csv(result: RunResult, out: TextIO | str | Path) -> None:
    """Per-control-step trace; integer columns are written without a decimal point."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            write_trace_csv(result, fh)
        return
    ints = {TRACE_COLUMNS.index("sector"), TRACE_COLUMNS.index("vector_id")}
    out.write(TRACE_HEADER + "\n")
    for row in result.trace:
        out.write(",".join(str(int(v)) if k in ints else _fmt(v) for k, v in enumerate(row)))
        out.write("\n")


def read_trace_csv(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header: {header!r}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_summary(summary: dict, out: TextIO | str | Path) -> None:
    """``key = value`` lines in insertion order."""
    if isinstance(out, (str, Path)):
        with open(out, "w") as fh:
            write_summary(summary, fh)
        return
    for key, value in summary.items():
        out.write(f"{key} = {value}\n")


def with_mode(scenario: Scenario, mode: Mode | str) -> Scenario:
    return replace(scenario, dtc=replace(scenario.dtc, mode=Mode.parse(mode)))
