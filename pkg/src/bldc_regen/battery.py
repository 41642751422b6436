"""Coulomb-counting battery with an affine open-circuit voltage."""

from __future__ import annotations

from dataclasses import dataclass, replace

from numba import njit


@dataclass(frozen=True)
class BatteryState:
    soc: float = 0.8
    capacity: float = 36000.0
    """charge capacity (C)"""
    v_min: float = 100.0
    v_max: float = 126.0
    internal_resistance: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.soc <= 1.0:
            raise ValueError("soc must lie in [0, 1]")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if self.internal_resistance < 0:
            raise ValueError("internal_resistance must be non-negative")

    @property
    def open_circuit_voltage(self) -> float:
        return ocv(self.soc, self.v_min, self.v_max)


@njit(cache=True)
def ocv(soc, v_min, v_max):
    return v_min + soc * (v_max - v_min)


@njit(cache=True)
def coulomb_step(soc, charge, capacity):
    """Remove ``charge`` coulombs (negative charges the battery); clamp to [0, 1]."""
    s = soc - charge / capacity
    if s < 0.0:
        return 0.0
    if s > 1.0:
        return 1.0
    return s


def soc_step(state: BatteryState, i_dc: float, dt: float) -> BatteryState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    return replace(state, soc=coulomb_step(state.soc, i_dc * dt, state.capacity))


def terminal_voltage(state: BatteryState, i_dc: float) -> float:
    return state.open_circuit_voltage - i_dc * state.internal_resistance
