"""Model reference adaptive gain (MIT rule) and the fixed-gain PI speed regulator.

The adaptive law adjusts a feedforward gain ``kp`` so that ``kp * G_p``
follows the reference model ``G_m = kbar * G_p``.  Both share the
denominator ``s^2 + s_coeff * s + const_coeff``; the ``1/kbar`` factor of
the exact sensitivity is absorbed into ``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .motor import MotorParams


@dataclass(frozen=True)
class SecondOrderModel:
    """``gain / (s^2 + s_coeff s + const_coeff)`` in controllable canonical form."""

    gain: float
    s_coeff: float
    const_coeff: float
    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self):
        if not (self.s_coeff > 0 and self.const_coeff > 0):
            raise ValueError("denominator s^2 + b s + a must be Hurwitz (a > 0, b > 0)")

    @property
    def output(self) -> float:
        return self.gain * self.x1

    @property
    def dc_gain(self) -> float:
        return self.gain / self.const_coeff


ReferenceModel = SecondOrderModel
PlantModel = SecondOrderModel


@njit(cache=True)
def lag2_step(x1, x2, u, c1, c0, dt):
    """RK4 step of x1' = x2, x2' = u - c1 x2 - c0 x1 with ``u`` held."""
    k1a = x2
    k1b = u - c1 * x2 - c0 * x1
    y1 = x1 + 0.5 * dt * k1a
    y2 = x2 + 0.5 * dt * k1b
    k2a = y2
    k2b = u - c1 * y2 - c0 * y1
    y1 = x1 + 0.5 * dt * k2a
    y2 = x2 + 0.5 * dt * k2b
    k3a = y2
    k3b = u - c1 * y2 - c0 * y1
    y1 = x1 + dt * k3a
    y2 = x2 + dt * k3b
    k4a = y2
    k4b = u - c1 * y2 - c0 * y1
    return (x1 + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a),
            x2 + dt / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b))


@njit(cache=True)
def mit_kernel(kp, gamma, e, ym, dt, kp_min, kp_max):
    k = kp - gamma * e * ym * dt
    if k < kp_min:
        return kp_min
    if k > kp_max:
        return kp_max
    return k


@njit(cache=True)
def clamp(x, limit):
    if x > limit:
        return limit
    if x < -limit:
        return -limit
    return x


@njit(cache=True)
def pi_kernel(integral, err, kp, ki, limit, dt):
    """PI with conditional integration: the integrator stops while the output is clamped
    in the direction the error pushes."""
    u = kp * err + ki * integral
    if (u >= limit and err > 0.0) or (u <= -limit and err < 0.0):
        return clamp(u, limit), integral
    integral = integral + err * dt
    return clamp(kp * err + ki * integral, limit), integral


def reference_model_step(model: SecondOrderModel, uc: float, dt: float) -> SecondOrderModel:
    """Advance the model by ``dt`` with the input held; read ``.output`` for ``y_m``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x1, x2 = lag2_step(model.x1, model.x2, uc, model.s_coeff, model.const_coeff, dt)
    return replace(model, x1=x1, x2=x2)


plant_step = reference_model_step


@dataclass(frozen=True)
class AdaptiveGainState:
    kp: float = 1.0
    gamma: float = 0.0
    kp_min: float = -math.inf
    kp_max: float = math.inf
    ym: float = 0.0
    e: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not math.isfinite(self.kp):
            raise ValueError("kp must be finite")
        if self.kp_min > self.kp_max:
            raise ValueError("kp_min exceeds kp_max")


def tracking_error(y: float, ym: float) -> float:
    return y - ym


def mit_update(state: AdaptiveGainState, e: float, ym: float, dt: float,
               frozen: bool = False) -> AdaptiveGainState:
    """One Euler step of ``dkp/dt = -gamma e ym``, clamped to ``[kp_min, kp_max]``.

    ``frozen`` holds kp (anti-windup while the actuator saturates).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if frozen or state.gamma == 0.0 or e * ym == 0.0:
        kp = state.kp
    else:
        kp = mit_kernel(state.kp, state.gamma, e, ym, dt, state.kp_min, state.kp_max)
    return replace(state, kp=kp, e=e, ym=ym)


def control_output(state: AdaptiveGainState, uc: float, limit: float = math.inf) -> float:
    """``u = kp * uc`` saturated to ``+-limit``."""
    return clamp(state.kp * uc, limit)


def normalized_gamma(gamma0: float, ym_peak: float) -> float:
    """Adaptation gain scaled by the expected peak model output, ``gamma0 / ym_peak^2``."""
    if ym_peak == 0:
        raise ValueError("ym_peak must be non-zero")
    return gamma0 / ym_peak ** 2


def coefficients_from_motor(motor: MotorParams, placement: str = "standard") -> tuple[float, float]:
    """Denominator ``(s_coeff, const_coeff)`` built from ``R/L + B/J`` and ``RB/(LJ)``.

    ``standard`` puts the sum on the ``s`` term (the usual electromechanical
    placement); ``as_printed`` swaps the two.
    """
    r_l = motor.resistance / motor.inductance
    b_j = motor.friction / motor.inertia
    total, product = r_l + b_j, r_l * b_j
    if placement == "standard":
        return total, product
    if placement == "as_printed":
        return product, total
    raise ValueError(f"unknown placement {placement!r}")


@dataclass(frozen=True)
class PIController:
    kp: float
    ki: float
    limit: float = math.inf
    integral: float = 0.0

    def step(self, err: float, dt: float) -> tuple[float, "PIController"]:
        u, integral = pi_kernel(self.integral, err, self.kp, self.ki, self.limit, dt)
        return u, replace(self, integral=integral)


@njit(cache=True)
def _matched_loop(uc, dt, b0, bm, c1, c0, kp0, gamma, kp_min, kp_max):
    n = uc.shape[0]
    kp = np.empty(n)
    e = np.empty(n)
    ym = np.empty(n)
    p1 = p2 = m1 = m2 = 0.0
    k = kp0
    for j in range(n):
        p1, p2 = lag2_step(p1, p2, k * uc[j], c1, c0, dt)
        m1, m2 = lag2_step(m1, m2, uc[j], c1, c0, dt)
        y = b0 * p1
        ymj = bm * m1
        ej = y - ymj
        k = mit_kernel(k, gamma, ej, ymj, dt, kp_min, kp_max)
        kp[j] = k
        e[j] = ej
        ym[j] = ymj
    return kp, e, ym


def simulate_matched(plant: SecondOrderModel, model: SecondOrderModel, gain: AdaptiveGainState,
                     uc: np.ndarray, dt: float) -> dict[str, np.ndarray]:
    """Run the MIT loop on the matched-structure pair ``kp*G_p`` vs ``G_m``.

    ``uc`` is sampled at ``dt``; returns time, kp, e and ym series.
    """
    if (plant.s_coeff, plant.const_coeff) != (model.s_coeff, model.const_coeff):
        raise ValueError("plant and reference model must share the denominator")
    uc = np.ascontiguousarray(uc, dtype=float)
    kp, e, ym = _matched_loop(uc, dt, plant.gain, model.gain, model.s_coeff, model.const_coeff,
                              gain.kp, gain.gamma, gain.kp_min, gain.kp_max)
    return {"t": dt * np.arange(1, uc.shape[0] + 1), "kp": kp, "e": e, "ym": ym}
