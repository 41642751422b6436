"""Longitudinal road loads and their reflection to the motor shaft."""

from __future__ import annotations

import math
from dataclasses import dataclass

from numba import njit


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 350.0
    gravity: float = 9.81
    rolling_coeff: float = 0.012
    air_density: float = 1.2
    drag_coeff: float = 0.4
    frontal_area: float = 1.5
    wheel_radius: float = 0.27
    gear_ratio: float = 6.0
    """motor revolutions per wheel revolution"""
    driveline_efficiency: float = 0.95

    def __post_init__(self):
        for name in ("mass", "gravity", "rolling_coeff", "air_density", "drag_coeff",
                     "frontal_area", "wheel_radius", "gear_ratio", "driveline_efficiency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rolling_coeff >= 1:
            raise ValueError("rolling_coeff must be < 1")
        if self.driveline_efficiency > 1:
            raise ValueError("driveline_efficiency must be <= 1")

    @property
    def reflected_inertia(self) -> float:
        """Vehicle mass seen at the motor shaft (kg m^2)."""
        return self.mass * (self.wheel_radius / self.gear_ratio) ** 2


@dataclass(frozen=True)
class RoadState:
    slope: float = 0.0
    """road grade angle (rad), positive uphill"""
    speed: float = 0.0
    """vehicle speed (m/s)"""

    def __post_init__(self):
        if not abs(self.slope) < math.pi / 2:
            raise ValueError("|slope| must be below pi/2")


@njit(cache=True)
def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def road_force(mass, g, f, rho, cd, area, slope, v, accel):
    s = _sign(v)
    return (mass * g * f * s + mass * g * math.sin(slope)
            + 0.5 * rho * cd * area * v * v * s + mass * accel)


@njit(cache=True)
def shaft_torque(force, wheel_radius, gear_ratio, efficiency):
    if force >= 0.0:
        return force * wheel_radius / (gear_ratio * efficiency)
    return force * wheel_radius * efficiency / gear_ratio


def force_components(params: VehicleParams, road: RoadState, accel: float) -> dict[str, float]:
    """Rolling, climbing, drag and inertial forces (N); rolling and drag oppose motion."""
    p, v = params, road.speed
    s = _sign(v)
    return {
        "rolling": p.mass * p.gravity * p.rolling_coeff * s,
        "climbing": p.mass * p.gravity * math.sin(road.slope),
        "drag": 0.5 * p.air_density * p.drag_coeff * p.frontal_area * v * v * s,
        "inertial": p.mass * accel,
    }


def total_force(params: VehicleParams, road: RoadState, accel: float) -> float:
    p = params
    return road_force(p.mass, p.gravity, p.rolling_coeff, p.air_density, p.drag_coeff,
                      p.frontal_area, road.slope, road.speed, accel)


def load_torque(params: VehicleParams, road: RoadState, accel: float) -> float:
    """Tractive force reflected to the motor shaft.

    Driveline losses divide when the motor drives the wheels and multiply
    when the wheels drive the motor.
    """
    return shaft_torque(total_force(params, road, accel), params.wheel_radius,
                        params.gear_ratio, params.driveline_efficiency)


def motor_speed_from_vehicle(params: VehicleParams, v: float) -> float:
    return v * params.gear_ratio / params.wheel_radius


def vehicle_speed_from_motor(params: VehicleParams, omega_mech: float) -> float:
    return omega_mech * params.wheel_radius / params.gear_ratio
