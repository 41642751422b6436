"""Trapezoidal back-EMF BLDC machine.

Phase currents follow ``L di/dt = v - R i - e`` with an isolated star point,
so the three currents always sum to zero.  The rotor carries the mechanical
state ``J dw/dt = T_em - T_L - B w``.  The numeric kernels are compiled with
numba and shared with the closed-loop engine; the dataclass wrappers below are
the library surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from numba import njit

TWO_PI = 2.0 * math.pi
_RAMP = math.pi / 6.0  # half-width of a commutation ramp (30 electrical degrees)
SQRT3 = math.sqrt(3.0)

#: electrical angle offsets of phases a, b, c
PHASE_SHIFTS = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)


class NonFiniteState(ArithmeticError):
    """Raised when an integration step produces NaN or inf."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class PhaseQuantities(NamedTuple):
    """Per-phase values (volts or amps) in a, b, c order."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class MotorParams:
    resistance: float = 0.05
    self_inductance: float = 0.35e-3
    mutual_inductance: float = 0.05e-3
    ke: float = 0.16
    """Peak line-neutral back-EMF per mechanical rad/s (V s/rad)."""
    pole_pairs: int = 4
    inertia: float = 0.02
    friction: float = 5e-4

    def __post_init__(self):
        if self.resistance <= 0:
            raise ValueError("resistance must be positive")
        if not self.self_inductance > self.mutual_inductance >= 0:
            raise ValueError("need self_inductance > mutual_inductance >= 0")
        if self.ke <= 0:
            raise ValueError("ke must be positive")
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ValueError("pole_pairs must be an integer >= 1")
        if self.inertia <= 0:
            raise ValueError("inertia must be positive")
        if self.friction < 0:
            raise ValueError("friction must be non-negative")

    @property
    def inductance(self) -> float:
        """Equivalent per-phase inductance ``Ls - Lm``."""
        return self.self_inductance - self.mutual_inductance


@dataclass(frozen=True)
class MotorState:
    currents: PhaseQuantities = PhaseQuantities(0.0, 0.0, 0.0)
    theta_elec: float = 0.0
    omega_mech: float = 0.0


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def wrap_angle(theta):
    th = theta % TWO_PI
    if th >= TWO_PI:  # -tiny % 2pi can round up to 2pi
        th = 0.0
    return th


@njit(cache=True)
def emf_shape(theta):
    """Unit trapezoid with a 120 degree flat top centred on 90 degrees."""
    th = wrap_angle(theta)
    if th < _RAMP:
        return th / _RAMP
    if th < 5.0 * _RAMP:
        return 1.0
    if th < 7.0 * _RAMP:
        return 1.0 - (th - 5.0 * _RAMP) / _RAMP
    if th < 11.0 * _RAMP:
        return -1.0
    return -1.0 + (th - 11.0 * _RAMP) / _RAMP


@njit(cache=True)
def emf_shapes(theta):
    return (
        emf_shape(theta),
        emf_shape(theta - 2.0 * math.pi / 3.0),
        emf_shape(theta - 4.0 * math.pi / 3.0),
    )


@njit(cache=True)
def flux_shape(theta):
    """Zero-mean antiderivative of :func:`emf_shape` over electrical angle."""
    th = wrap_angle(theta)
    s = _RAMP
    if th < s:
        g = th * th / (2.0 * s)
    elif th < 5.0 * s:
        g = 0.5 * s + (th - s)
    elif th < 7.0 * s:
        u = th - 5.0 * s
        g = 4.5 * s + u - u * u / (2.0 * s)
    elif th < 11.0 * s:
        g = 4.5 * s - (th - 7.0 * s)
    else:
        u = th - 11.0 * s
        g = 0.5 * s - u + u * u / (2.0 * s)
    return g - 2.5 * s


@njit(cache=True)
def clarke(a, b, c):
    """Amplitude-invariant abc -> alpha/beta transform."""
    return (2.0 * a - b - c) / 3.0, (b - c) / SQRT3


@njit(cache=True)
def inverse_clarke(alpha, beta):
    return alpha, -0.5 * alpha + 0.5 * SQRT3 * beta, -0.5 * alpha - 0.5 * SQRT3 * beta


@njit(cache=True)
def rotor_flux_ab(ke, pole_pairs, theta):
    """Permanent-magnet flux linkage in the alpha/beta frame (Wb)."""
    k = ke / pole_pairs
    fa = k * flux_shape(theta)
    fb = k * flux_shape(theta - 2.0 * math.pi / 3.0)
    fc = k * flux_shape(theta - 4.0 * math.pi / 3.0)
    return clarke(fa, fb, fc)


@njit(cache=True)
def torque_abc(ke, theta, ia, ib, ic):
    sa, sb, sc = emf_shapes(theta)
    return ke * (sa * ia + sb * ib + sc * ic)


@njit(cache=True)
def current_rates(res, ind, ke, theta, omega, ia, ib, ic, va, vb, vc, ca, cb, cc):
    """di/dt for conducting phases (mask ``c*``); Kirchhoff projection on the neutral.

    Non-conducting phases hold their current.  The common-mode part of the
    driving voltage over the conducting set is removed, which is the same as
    re-solving the star-point voltage at every evaluation.
    """
    sa, sb, sc = emf_shapes(theta)
    w = ke * omega
    ra = (va - res * ia - w * sa) / ind
    rb = (vb - res * ib - w * sb) / ind
    rc = (vc - res * ic - w * sc) / ind
    n = ca + cb + cc
    if n < 2:
        return 0.0, 0.0, 0.0
    mean = (ca * ra + cb * rb + cc * rc) / n
    return ca * (ra - mean), cb * (rb - mean), cc * (rc - mean)


@njit(cache=True)
def _electrical_step(res, ind, ke, pp, theta, omega, ia, ib, ic, va, vb, vc, ca, cb, cc, dt, rk4):
    if not rk4:
        da, db, dc = current_rates(res, ind, ke, theta, omega, ia, ib, ic, va, vb, vc, ca, cb, cc)
        return ia + dt * da, ib + dt * db, ic + dt * dc
    we = pp * omega
    h = 0.5 * dt
    a1, b1, c1 = current_rates(res, ind, ke, theta, omega, ia, ib, ic, va, vb, vc, ca, cb, cc)
    a2, b2, c2 = current_rates(res, ind, ke, theta + we * h, omega,
                               ia + h * a1, ib + h * b1, ic + h * c1, va, vb, vc, ca, cb, cc)
    a3, b3, c3 = current_rates(res, ind, ke, theta + we * h, omega,
                               ia + h * a2, ib + h * b2, ic + h * c2, va, vb, vc, ca, cb, cc)
    a4, b4, c4 = current_rates(res, ind, ke, theta + we * dt, omega,
                               ia + dt * a3, ib + dt * b3, ic + dt * c3, va, vb, vc, ca, cb, cc)
    s = dt / 6.0
    return (ia + s * (a1 + 2 * a2 + 2 * a3 + a4),
            ib + s * (b1 + 2 * b2 + 2 * b3 + b4),
            ic + s * (c1 + 2 * c2 + 2 * c3 + c4))


@njit(cache=True)
def _mechanical_step(inertia, friction, pp, theta, omega, t_em, t_load, dt, rk4):
    drive = t_em - t_load
    if not rk4:
        return wrap_angle(theta + pp * omega * dt), omega + dt * (drive - friction * omega) / inertia
    k1 = (drive - friction * omega) / inertia
    k2 = (drive - friction * (omega + 0.5 * dt * k1)) / inertia
    k3 = (drive - friction * (omega + 0.5 * dt * k2)) / inertia
    k4 = (drive - friction * (omega + dt * k3)) / inertia
    # theta integrates omega with the same stages
    dth = pp * dt / 6.0 * (omega + 2 * (omega + 0.5 * dt * k1) + 2 * (omega + 0.5 * dt * k2)
                           + (omega + dt * k3))
    return wrap_angle(theta + dth), omega + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# ---------------------------------------------------------------------------
# library surface


def back_emf_shape(theta_elec: float) -> float:
    """Normalised trapezoidal back-EMF of phase a at ``theta_elec`` (rad)."""
    return emf_shape(theta_elec)


def back_emfs(params: MotorParams, state: MotorState) -> PhaseQuantities:
    sa, sb, sc = emf_shapes(state.theta_elec)
    w = params.ke * state.omega_mech
    return PhaseQuantities(w * sa, w * sb, w * sc)


def electromagnetic_torque(params: MotorParams, state: MotorState) -> float:
    """Shaft torque from the speed-normalised back-EMF shapes.

    ``T = ke * sum(shape_x * i_x)``; identical to ``sum(e_x i_x) / w`` for
    ``w != 0`` and still defined at standstill.
    """
    ia, ib, ic = state.currents
    return torque_abc(params.ke, state.theta_elec, ia, ib, ic)


def torque_alphabeta(params: MotorParams, theta_elec: float, i_alpha: float, i_beta: float) -> float:
    """Same torque evaluated from stationary-frame currents (3/2 scaling of the Clarke transform)."""
    sa, sb, sc = emf_shapes(theta_elec)
    s_alpha, s_beta = clarke(sa, sb, sc)
    return 1.5 * params.ke * (s_alpha * i_alpha + s_beta * i_beta)


def stator_flux(params: MotorParams, state: MotorState) -> tuple[float, float]:
    """True stator flux linkage ``L i + psi_pm`` in the alpha/beta frame."""
    ra, rb = rotor_flux_ab(params.ke, params.pole_pairs, state.theta_elec)
    ia, ib = clarke(*state.currents)
    return params.inductance * ia + ra, params.inductance * ib + rb


def _check_finite(values, what: str):
    for v in values:
        if not math.isfinite(v):
            raise NonFiniteState(f"non-finite {what}: {values}")


def step_electrical(
    params: MotorParams,
    state: MotorState,
    v_applied: PhaseQuantities,
    dt: float,
    floating: tuple[bool, bool, bool] = (False, False, False),
    method: str = "rk4",
) -> MotorState:
    """Advance the phase currents by ``dt`` under constant line-neutral voltages.

    The rotor angle moves at constant speed inside the step for the back-EMF
    evaluation but is not written back; :func:`step_mechanical` owns it.
    Floating phases keep their current.
    """
    if not 0 < dt <= 1e-3:
        raise ValueError(f"dt must be in (0, 1e-3] s, got {dt}")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}")
    ca, cb, cc = (0 if f else 1 for f in floating)
    ia, ib, ic = state.currents
    va, vb, vc = v_applied
    na, nb, nc = _electrical_step(
        params.resistance, params.inductance, params.ke, params.pole_pairs,
        state.theta_elec, state.omega_mech, ia, ib, ic, va, vb, vc, ca, cb, cc,
        dt, method == "rk4",
    )
    # remove round-off drift from the isolated-neutral constraint
    n = ca + cb + cc
    if n:
        r = (na + nb + nc) / n
        na, nb, nc = na - ca * r, nb - cb * r, nc - cc * r
    _check_finite((na, nb, nc), "phase current")
    return replace(state, currents=PhaseQuantities(na, nb, nc))


def step_mechanical(
    params: MotorParams,
    state: MotorState,
    t_em: float,
    t_load: float,
    dt: float,
    method: str = "rk4",
) -> MotorState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    theta, omega = _mechanical_step(
        params.inertia, params.friction, params.pole_pairs,
        state.theta_elec, state.omega_mech, t_em, t_load, dt, method == "rk4",
    )
    _check_finite((theta, omega), "mechanical state")
    return replace(state, theta_elec=theta, omega_mech=omega)
