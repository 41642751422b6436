"""Compiled two-rate closed loop shared by :mod:`bldc_regen.engine`.

Electrical and mechanical states advance together with RK4 every
``dt_electrical``; speed control, DTC decisions, battery update and logging
run every ``dt_control``.  Energy integrals ride along as extra RK4 states
so the audit uses the same quadrature as the dynamics.
"""

import math

import numpy as np
from numba import njit

from .battery import coulomb_step, ocv
from .cycle import interp_speed, segment_slope
from .dtc import decide
from .inverter import block_diodes, dc_current, solve_terminals
from .mras import clamp, lag2_step, mit_kernel, pi_kernel
from .motor import clarke, current_rates, emf_shapes, rotor_flux_ab, torque_abc, wrap_angle
from .vehicle import road_force, shaft_torque

# parameter vector layout
R, L, KE, PP, JT, B = 0, 1, 2, 3, 4, 5
M, G, F, RHO, CD, AREA, RW, GEAR, ETA, SLOPE, COMMANDED = 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16
MODE, PSI_REF, DF, DTB, DTI, LEAK = 17, 18, 19, 20, 21, 22
CTRL, PI_KP, PI_KI, T_MAX, GAMMA, KP0, KP_MIN, KP_MAX, BM, C1, C0, W_MAX = (
    23, 24, 25, 26, 27, 28, 29, 30, 31, 32, 33, 34)
SOC0, CAP, VMIN, VMAX, RINT = 35, 36, 37, 38, 39
DT_E, THETA0 = 40, 41
N_PARAMS = 42

# state vector layout for one RK4 step
IA, IB, IC, W, TH, QDC, ECU, EVISC, ELOAD, VA, VB, VC, JA, JB, JC = range(15)
N_STATE = 15

TRACE_COLUMNS = ("t", "speed_ref", "speed", "torque_ref", "torque", "flux_mag", "sector",
                 "vector_id", "i_a", "i_b", "i_c", "i_dc", "soc", "kp")
# cumulative energies per record (J), not part of the CSV
AUX_COLUMNS = ("e_battery", "e_copper", "e_viscous", "e_load", "kinetic", "magnetic",
               "e_regen", "omega_ref", "omega", "vdc")


@njit(cache=True)
def _rates(p, y, out, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel):
    res, ind, ke = p[R], p[L], p[KE]
    ia, ib, ic, w, th = y[IA], y[IB], y[IC], y[W], y[TH]
    sa, sb, sc = emf_shapes(th)
    ea, eb, ec = ke * w * sa, ke * w * sb, ke * w * sc
    ra, rb, rc = current_rates(res, ind, ke, th, w, ia, ib, ic, vta, vtb, vtc, ca, cb, cc)
    out[IA], out[IB], out[IC] = ra, rb, rc
    t_em = ke * (sa * ia + sb * ib + sc * ic)
    v = w * p[RW] / p[GEAR]
    force = road_force(p[M], p[G], p[F], p[RHO], p[CD], p[AREA], p[SLOPE], v, accel)
    t_load = shaft_torque(force, p[RW], p[GEAR], p[ETA])
    out[W] = (t_em - t_load - p[B] * w) / p[JT]
    out[TH] = p[PP] * w
    out[QDC] = dc_current(la, lb, lc, da, db, dc, ia, ib, ic)
    out[ECU] = res * (ia * ia + ib * ib + ic * ic)
    out[EVISC] = p[B] * w * w
    out[ELOAD] = t_load * w
    # line-neutral voltages: L di/dt + R i + e for conducting phases, e for open ones
    out[VA] = ind * ra + res * ia + ea if ca else ea
    out[VB] = ind * rb + res * ib + eb if cb else eb
    out[VC] = ind * rc + res * ic + ec if cc else ec
    out[JA], out[JB], out[JC] = ia, ib, ic


@njit(cache=True)
def _rk4(p, y, dt, work, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel):
    """One RK4 step of size ``dt`` with the inverter topology frozen; result in work[5]."""
    k1, k2, k3, k4, tmp, res = work[0], work[1], work[2], work[3], work[4], work[5]
    _rates(p, y, k1, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel)
    for n in range(N_STATE):
        tmp[n] = y[n] + 0.5 * dt * k1[n]
    _rates(p, tmp, k2, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel)
    for n in range(N_STATE):
        tmp[n] = y[n] + 0.5 * dt * k2[n]
    _rates(p, tmp, k3, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel)
    for n in range(N_STATE):
        tmp[n] = y[n] + dt * k3[n]
    _rates(p, tmp, k4, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel)
    for n in range(N_STATE):
        res[n] = y[n] + dt / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])


@njit(cache=True)
def drive_step(p, y, legs, vdc, accel, work):
    """Advance ``y`` in place by one electrical step.

    A diode current that would cross zero is stopped at the crossing (linear
    estimate of the crossing time) and the remainder of the step is taken
    with the updated topology.
    """
    la, lb, lc = legs[0], legs[1], legs[2]
    remaining = p[DT_E]
    for _sub in range(4):
        ke, w, th = p[KE], y[W], y[TH]
        sa, sb, sc = emf_shapes(th)
        vta, vtb, vtc, vn, ca, cb, cc, da, db, dc = solve_terminals(
            la, lb, lc, y[IA], y[IB], y[IC], ke * w * sa, ke * w * sb, ke * w * sc, p[R], vdc)
        _rk4(p, y, remaining, work, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel)
        res = work[5]
        # earliest diode zero crossing within the step
        frac = 2.0
        hit = -1
        dio = (da, db, dc)
        for x in range(3):
            i0, i1 = y[IA + x], res[IA + x]
            if (dio[x] == -1 and i0 > 0.0 and i1 <= 0.0) or (dio[x] == 1 and i0 < 0.0 and i1 >= 0.0):
                fx = i0 / (i0 - i1)
                if fx < frac:
                    frac = fx
                    hit = x
        if hit < 0 or frac >= 1.0 or _sub == 3:
            ia, ib, ic = block_diodes(da, db, dc, y[IA], y[IB], y[IC], res[IA], res[IB], res[IC])
            for n in range(N_STATE):
                y[n] = res[n]
            y[IA], y[IB], y[IC] = ia, ib, ic
            break
        part = max(frac, 1e-6) * remaining
        _rk4(p, y, part, work, vta, vtb, vtc, ca, cb, cc, la, lb, lc, da, db, dc, accel)
        res = work[5]
        for n in range(N_STATE):
            y[n] = res[n]
        # land the commutating phase exactly on zero and keep the currents balanced
        spill = y[IA + hit]
        y[IA + hit] = 0.0
        others = 0
        for x in range(3):
            if x != hit and y[IA + x] != 0.0:
                others += 1
        if others > 0:
            for x in range(3):
                if x != hit and y[IA + x] != 0.0:
                    y[IA + x] += spill / others
        remaining -= part
    y[TH] = wrap_angle(y[TH])


@njit(cache=True, nogil=True)
def run_loop(p, conv, mod, leg_table, times, speeds, n_ctrl, substeps, trace, aux):
    """Returns -1 on success or the control-step index where the state went non-finite."""
    dt_e = p[DT_E]
    dt_c = dt_e * substeps
    y = np.zeros(N_STATE)
    work = np.zeros((6, N_STATE))
    legs = np.zeros(3, dtype=np.int64)
    ind = p[L]
    gear_over_r = p[GEAR] / p[RW]

    y[TH] = wrap_angle(p[THETA0])
    w0 = interp_speed(times, speeds, 0.0) * gear_over_r
    y[W] = w0
    ra, rb = rotor_flux_ab(p[KE], p[PP], y[TH])
    psi_a, psi_b = ra, rb
    soc = p[SOC0]
    vdc = ocv(soc, p[VMIN], p[VMAX])
    idc_avg = 0.0
    prev_f, prev_t = 1, 0
    pi_int = 0.0
    kp = p[KP0]
    # reference model starts at rest at the initial reference
    m1 = w0 / p[C0] if p[C0] > 0.0 else 0.0
    m2 = 0.0
    saturated = False
    e_batt = 0.0
    e_regen = 0.0
    is_mras = p[CTRL] > 0.5
    commanded = p[COMMANDED] > 0.5

    for j in range(n_ctrl + 1):
        t = j * dt_c
        if j > 0:
            va, vb = clarke(y[VA] / dt_c, y[VB] / dt_c, y[VC] / dt_c)
            ia_m, ib_m = clarke(y[JA] / dt_c, y[JB] / dt_c, y[JC] / dt_c)
            psi_a += (va - p[R] * ia_m - p[LEAK] * psi_a) * dt_c
            psi_b += (vb - p[R] * ib_m - p[LEAK] * psi_b) * dt_c
            idc_avg = y[QDC] / dt_c
            e_batt += vdc * y[QDC]
            if y[QDC] < 0.0:
                e_regen -= vdc * y[QDC]
            soc = coulomb_step(soc, y[QDC], p[CAP])
            y[QDC] = 0.0
            y[VA] = y[VB] = y[VC] = 0.0
            y[JA] = y[JB] = y[JC] = 0.0
        vdc = ocv(soc, p[VMIN], p[VMAX]) - p[RINT] * idc_avg
        if vdc < 1e-3:
            vdc = 1e-3

        v_ref = interp_speed(times, speeds, t)
        w_ref = v_ref * gear_over_r
        w = y[W]
        if is_mras:
            if j > 0:
                m1, m2 = lag2_step(m1, m2, w_ref, p[C1], p[C0], dt_c)
                ym = p[BM] * m1
                if not saturated:
                    kp = mit_kernel(kp, p[GAMMA], w - ym, ym, dt_c, p[KP_MIN], p[KP_MAX])
            w_cmd = clamp(kp * w_ref, p[W_MAX])
        else:
            w_cmd = w_ref
        t_ref, pi_int = pi_kernel(pi_int, w_cmd - w, p[PI_KP], p[PI_KI], p[T_MAX], dt_c)
        saturated = abs(t_ref) >= p[T_MAX]

        t_est = torque_abc(p[KE], y[TH], y[IA], y[IB], y[IC])
        vec, f, tc, k = decide(conv, mod, int(p[MODE]), psi_a, psi_b, p[PSI_REF], t_est, t_ref,
                               p[DF], p[DTB], p[DTI], prev_f, prev_t)
        prev_f, prev_t = f, tc

        row = trace[j]
        row[0] = t
        row[1] = v_ref
        row[2] = w / gear_over_r
        row[3] = t_ref
        row[4] = t_est
        row[5] = math.sqrt(psi_a * psi_a + psi_b * psi_b)
        row[6] = k
        row[7] = vec
        row[8], row[9], row[10] = y[IA], y[IB], y[IC]
        row[11] = idc_avg
        row[12] = soc
        row[13] = kp
        ax = aux[j]
        ax[0] = e_batt
        ax[1] = y[ECU]
        ax[2] = y[EVISC]
        ax[3] = y[ELOAD]
        ax[4] = 0.5 * p[JT] * w * w
        ax[5] = 0.5 * ind * (y[IA] ** 2 + y[IB] ** 2 + y[IC] ** 2)
        ax[6] = e_regen
        ax[7] = w_ref
        ax[8] = w
        ax[9] = vdc

        if j == n_ctrl:
            break
        for x in range(3):
            legs[x] = leg_table[vec, x]
        accel = segment_slope(times, speeds, t) if commanded else 0.0
        for _ in range(substeps):
            drive_step(p, y, legs, vdc, accel, work)
        for n in range(N_STATE):
            if not math.isfinite(y[n]):
                return j
    return -1
