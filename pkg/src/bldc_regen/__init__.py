"""BLDC electric-vehicle drivetrain simulator with regenerative direct torque control."""

__version__ = "0.1.0"

from .config import ConfigError, Scenario, TypeMismatch, UnknownKey, apply_overrides, load_scenario
from .cycle import DriveCycle, load_cycle, trapezoid
from .dtc import FluxCmd, Mode, TorqueCmd, lookup_conventional, lookup_modified
from .engine import MismatchError, RunResult, compare, energy_audit, run
from .motor import MotorParams, NonFiniteState

__all__ = [
    "ConfigError", "DriveCycle", "FluxCmd", "MismatchError", "Mode", "MotorParams",
    "NonFiniteState", "RunResult", "Scenario", "TorqueCmd", "TypeMismatch", "UnknownKey",
    "apply_overrides", "compare", "energy_audit", "load_cycle", "load_scenario",
    "lookup_conventional", "lookup_modified", "run", "trapezoid",
]
