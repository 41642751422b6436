"""Check that every switching-table cell moves torque and flux the commanded way.

For each sector the machine is placed at a mid-sector operating point: the
stator flux sits on the sector centre at the reference magnitude and the
magnet flux lags it by a fixed load angle.  The selected vector is applied
for one control period through the inverter and machine model, the flux
estimate is advanced exactly as the controller would, and the signs of the
torque and flux-magnitude changes are compared with the commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _loop
from .config import Scenario, apply_overrides
from .cycle import DriveCycle
from .dtc import (CONVENTIONAL_TABLE, CONVENTIONAL_TABLE_PATCHED, FluxCmd, Mode,
                  MODIFIED_TABLE, MODIFIED_TABLE_PATCHED, TorqueCmd, lookup, sector_offset)
from .engine import _param_vector
from .inverter import LEG_TABLE
from .motor import clarke, inverse_clarke, rotor_flux_ab, torque_abc

LOAD_ANGLE = math.radians(20.0)
"""electrical angle by which the magnet flux trails the stator flux"""
TEST_SPEED = 5.0
"""shaft speed of the operating point (rad/s)"""


@dataclass(frozen=True)
class CellResult:
    sector: int
    flux_cmd: FluxCmd
    torque_cmd: TorqueCmd
    vector_id: int
    d_flux: float
    d_torque: float

    @property
    def flux_ok(self) -> bool:
        return self.d_flux * int(self.flux_cmd) > 0

    @property
    def torque_ok(self) -> bool:
        return self.d_torque * int(self.torque_cmd) > 0

    @property
    def ok(self) -> bool:
        return self.flux_ok and self.torque_ok

    def describe(self) -> str:
        def mark(good):
            return "ok" if good else "WRONG"
        return (f"sector {self.sector} {self.flux_cmd.name} {self.torque_cmd.name} -> V{self.vector_id}: "
                f"dpsi={self.d_flux:+.3e} ({mark(self.flux_ok)}) "
                f"dT={self.d_torque:+.3e} ({mark(self.torque_ok)})")


def _rotor_angle_for(flux_angle: float, ke: float, pole_pairs: int) -> float:
    """Electrical rotor angle whose magnet flux points at ``flux_angle``."""
    grid = np.linspace(0.0, 2.0 * math.pi, 3601)[:-1]
    ang = np.array([math.atan2(*reversed(rotor_flux_ab(ke, pole_pairs, th))) for th in grid])
    diff = np.angle(np.exp(1j * (ang - flux_angle)))
    th = grid[int(np.argmin(np.abs(diff)))]
    # refine by secant on the wrapped angle error
    for _ in range(20):
        a, b = rotor_flux_ab(ke, pole_pairs, th)
        err = math.remainder(math.atan2(b, a) - flux_angle, 2.0 * math.pi)
        if abs(err) < 1e-12:
            break
        th -= err
    return th


def operating_point(scenario: Scenario, sector: int, mode: Mode):
    """Initial state vector and stator flux estimate for a mid-sector point."""
    mo = scenario.motor
    centre = math.radians(60.0 * (sector - 1)) + sector_offset(int(mode))
    psi_s = scenario.dtc.flux_ref
    sa, sb = psi_s * math.cos(centre), psi_s * math.sin(centre)
    theta = _rotor_angle_for(centre - LOAD_ANGLE, mo.ke, mo.pole_pairs)
    ra, rb = rotor_flux_ab(mo.ke, mo.pole_pairs, theta)
    ia, ib, ic = inverse_clarke((sa - ra) / mo.inductance, (sb - rb) / mo.inductance)
    y = np.zeros(_loop.N_STATE)
    y[_loop.IA], y[_loop.IB], y[_loop.IC] = ia, ib, ic
    y[_loop.W] = TEST_SPEED
    y[_loop.TH] = theta
    return y, (sa, sb)


def apply_vector(scenario: Scenario, y0: np.ndarray, psi0: tuple[float, float], vector_id: int):
    """One control period of ``vector_id``; returns (delta |psi|, delta torque)."""
    sim = scenario.sim
    p = _param_vector(scenario, DriveCycle((0.0, 1.0), (0.0, 0.0)))
    y = y0.copy()
    work = np.zeros((6, _loop.N_STATE))
    legs = LEG_TABLE[vector_id].copy()
    vdc = scenario.battery.open_circuit_voltage
    mo = scenario.motor
    for _ in range(sim.substeps):
        _loop.drive_step(p, y, legs, vdc, 0.0, work)
    dt_c = sim.dt_control
    va, vb = clarke(y[_loop.VA] / dt_c, y[_loop.VB] / dt_c, y[_loop.VC] / dt_c)
    ia, ib = clarke(y[_loop.JA] / dt_c, y[_loop.JB] / dt_c, y[_loop.JC] / dt_c)
    pa = psi0[0] + (va - mo.resistance * ia) * dt_c
    pb = psi0[1] + (vb - mo.resistance * ib) * dt_c
    t0 = torque_abc(mo.ke, y0[_loop.TH], y0[_loop.IA], y0[_loop.IB], y0[_loop.IC])
    t1 = torque_abc(mo.ke, y[_loop.TH], y[_loop.IA], y[_loop.IB], y[_loop.IC])
    return math.hypot(pa, pb) - math.hypot(*psi0), t1 - t0


def check_table(mode: Mode | str, patched: bool = False,
                scenario: Scenario | None = None) -> list[CellResult]:
    """Sweep all sectors and non-zero torque commands of one table."""
    mode = Mode.parse(mode)
    sc = scenario or Scenario()
    sc = apply_overrides(sc, {"dtc.mode": mode.name.lower()})
    conv = CONVENTIONAL_TABLE_PATCHED if patched else CONVENTIONAL_TABLE
    mod = MODIFIED_TABLE_PATCHED if patched else MODIFIED_TABLE
    results = []
    for k in range(1, 7):
        y0, psi0 = operating_point(sc, k, mode)
        for t in (TorqueCmd.TI, TorqueCmd.TD):
            for f in (FluxCmd.FI, FluxCmd.FD):
                vec = int(lookup(conv, mod, int(mode), int(f), int(t), k))
                d_flux, d_torque = apply_vector(sc, y0, psi0, vec)
                results.append(CellResult(k, f, t, vec, d_flux, d_torque))
    return results


def failures(results: list[CellResult]) -> list[CellResult]:
    return [r for r in results if not r.ok]
