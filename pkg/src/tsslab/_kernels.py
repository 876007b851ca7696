"""Compiled inner loops: algebraic fixed point, staged RK4, swing integrators.

Everything here is numba-jitted scalar math. Parameters travel as flat float64
vectors; the public modules own all validation, units, and bookkeeping.
"""
import math

import numpy as np
from numba import njit

# machine/controller parameter vector slots
P_OMEGA0 = 0
P_XG = 1
P_XS = 2
P_XM = 3
P_H = 4
P_PIN = 5
P_UTREF = 6
P_WRREF = 7
P_KPW = 8
P_KIW = 9
P_KPV = 10
P_KIV = 11
P_KPPLL = 12
P_KIPLL = 13
P_LEN = 14

# scenario vector slots for simulate_core
S_UGNOM = 0
S_UG2 = 1
S_TF = 2
S_TC = 3            # inf = permanent fault
S_IRD2_REQ = 4
S_IRQ2 = 5          # nan = compute from voltage deficit at stage-2 entry
S_KE = 6
S_IMAX = 7
S_KRAMP = 8
S_FREEZE = 9        # 1.0 freezes rotor speed in stages 2-3
S_IRD1S = 10
S_IRQ1S = 11
S_PHI_U1 = 12
S_ALLOW_ZERO_IRD = 13
S_LEN = 14

UT_TOL = 1e-10
UT_SWITCH_THRESHOLD = 0.8
EVENT_TOL = 1e-6

# simulate_core status codes
ST_OK = 0
ST_NONFINITE = 1
ST_ANGLE_ESCAPE = 2
ST_ALG_FAIL = 3
ST_CAPACITY = 4

# trajectory sample columns
C_T = 0
C_WR = 1
C_Y1 = 2
C_Y2 = 3
C_X = 4
C_PHI = 5
C_IRD = 6
C_IRQ = 7
C_UTD = 8
C_UTQ = 9
C_UT = 10
C_PT = 11
C_STAGE = 12
C_LEN = 13


@njit(cache=True)
def coeffs(Xs, Xm, Xg, wr):
    """Reactance-ratio correction coefficients (a, b, c, d) at rotor speed wr."""
    den1 = Xs + Xg
    den2 = Xs + wr * Xg
    return Xs / den1, Xm / den1, Xs / den2, wr * Xm / den2


@njit(cache=True)
def solve_ut(alpha, beta, utq, guess):
    """Terminal-voltage magnitude from U = hypot(alpha - beta*U, utq).

    Damped fixed-point iteration (damping 0.5) with a Newton fallback.
    Returns (U_t, residual); residual <= UT_TOL signals convergence.
    """
    u = guess
    if not (u > 0.0) or not math.isfinite(u):
        u = 1.0
    f = u
    for _ in range(100):
        f = math.hypot(alpha - beta * u, utq)
        r = f - u
        if abs(r) < UT_TOL:
            return f, abs(r)
        u += 0.5 * r
    for _ in range(50):
        f = math.hypot(alpha - beta * u, utq)
        g = f - u
        if abs(g) < UT_TOL:
            return f, abs(g)
        fp = 0.0
        if f > 0.0:
            fp = -beta * (alpha - beta * u) / f
        den = fp - 1.0
        if den == 0.0:
            break
        u -= g / den
    f = math.hypot(alpha - beta * u, utq)
    return f, abs(f - u)


@njit(cache=True)
def algebra(y, stage, Ug, ird2, irq2, p, ut_guess):
    """Network/machine algebraic layer at state y for the given stage.

    Returns (ird, irq, utd, utq, ut, itd, itq, pt, residual).
    """
    wr = y[0]
    phi = y[4]
    a, b, c, d = coeffs(p[P_XS], p[P_XM], p[P_XG], wr)
    Xg = p[P_XG]
    if stage == 2:
        ird = ird2
        irq = irq2
        utq = -c * Ug * math.sin(phi) + d * Xg * ird
        utd = a * Ug * math.cos(phi) - b * Xg * irq
        ut = math.hypot(utd, utq)
        res = 0.0
    else:
        if stage == 3:
            ird = y[1]
        else:
            ird = y[1] + p[P_KPW] * wr
        utq = -c * Ug * math.sin(phi) + d * Xg * ird
        alpha = a * Ug * math.cos(phi) - b * Xg * y[2]
        beta = b * Xg * p[P_KPV]
        ut, res = solve_ut(alpha, beta, utq, ut_guess)
        irq = y[2] + p[P_KPV] * ut
        utd = alpha - beta * ut
    itd = wr * (p[P_XM] * ird - utq) / p[P_XS]
    itq = (p[P_XM] * irq + utd) / p[P_XS]
    pt = utd * itd + utq * itq
    return ird, irq, utd, utq, ut, itd, itq, pt, res


@njit(cache=True)
def rhs(y, stage, Ug, ird2, irq2, kramp, freeze, p, ut_guess):
    """Stage vector field. Returns (dy[5], ut, residual).

    State layout: y = (omega_r, y1, y2, x_pll, phi_pll) where y1/y2 carry the
    stage-dependent current states: transformed RSC/TVC integrators in stages
    1 and 4, the ramped active current and TVC integrator in stage 3, unused
    in stage 2 (currents clamped to ird2/irq2).
    """
    dy = np.empty(5)
    ird, irq, utd, utq, ut, itd, itq, pt, res = algebra(
        y, stage, Ug, ird2, irq2, p, ut_guess)
    wr = y[0]
    dwr = (p[P_PIN] - pt) / (2.0 * p[P_H] * wr)
    if freeze and (stage == 2 or stage == 3):
        dwr = 0.0
    dy[0] = dwr
    if stage == 2:
        dy[1] = 0.0
        dy[2] = 0.0
    elif stage == 3:
        dy[1] = kramp
        dy[2] = p[P_KIV] * (ut - p[P_UTREF])
    else:
        dy[1] = p[P_KIW] * (wr - p[P_WRREF])
        dy[2] = p[P_KIV] * (ut - p[P_UTREF])
    dy[3] = p[P_KIPLL] * utq / p[P_OMEGA0]
    dy[4] = p[P_KPPLL] * utq + p[P_OMEGA0] * (y[3] - 1.0)
    return dy, ut, res


@njit(cache=True)
def rk4_step(y, h, stage, Ug, ird2, irq2, kramp, freeze, p, ut_guess):
    """One classical 4th-order step. Returns (y_new, ut_guess_out, max_residual)."""
    k1, u1, r1 = rhs(y, stage, Ug, ird2, irq2, kramp, freeze, p, ut_guess)
    k2, u2, r2 = rhs(y + 0.5 * h * k1, stage, Ug, ird2, irq2, kramp, freeze, p, u1)
    k3, u3, r3 = rhs(y + 0.5 * h * k2, stage, Ug, ird2, irq2, kramp, freeze, p, u2)
    k4, u4, r4 = rhs(y + h * k3, stage, Ug, ird2, irq2, kramp, freeze, p, u3)
    ynew = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    rmax = max(max(r1, r2), max(r3, r4))
    return ynew, u4, rmax


@njit(cache=True)
def lvrt_entry(phi, wr, Ug2, ird2_req, irq2_fixed, Ke, Imax, irq1s,
               allow_zero_ird, p):
    """LVRT current setpoints at stage-2 entry.

    Solves the joint (U_t2, i_rq2) fixed point when the reactive current is
    deficit-driven (irq2_fixed is nan), then clamps the requested active
    current to the converter capacity circle.
    Returns (ird2, irq2, ut2, ok).
    """
    a, b, c, d = coeffs(p[P_XS], p[P_XM], p[P_XG], wr)
    Xg = p[P_XG]
    ird2 = ird2_req
    irq2 = irq2_fixed
    ut2 = 1.0
    for _ in range(20):
        utq2 = -c * Ug2 * math.sin(phi) + d * Xg * ird2
        if math.isnan(irq2_fixed):
            # i_rq2 = irq1s - Ke*(0.9 - U_t): affine in U_t, same scalar solve
            alpha = a * Ug2 * math.cos(phi) - b * Xg * (irq1s - 0.9 * Ke)
            beta = b * Xg * Ke
            ut2, res = solve_ut(alpha, beta, utq2, ut2)
            if res > UT_TOL:
                return ird2, irq2, ut2, False
            irq2 = irq1s - Ke * (0.9 - ut2)
        else:
            irq2 = irq2_fixed
            utd2 = a * Ug2 * math.cos(phi) - b * Xg * irq2
            ut2 = math.hypot(utd2, utq2)
        cap = Imax * Imax - irq2 * irq2
        if cap < 0.0:
            if allow_zero_ird:
                irq2 = math.copysign(Imax, irq2)
                ird2_new = 0.0
            else:
                return ird2, irq2, ut2, False
        else:
            ird2_new = min(ird2_req, math.sqrt(cap))
            if ird2_new < 0.0:
                ird2_new = 0.0
        if abs(ird2_new - ird2) < 1e-14:
            return ird2_new, irq2, ut2, True
        ird2 = ird2_new
    return ird2, irq2, ut2, True


@njit(cache=True)
def _stage2_escape(phi_entry, wr, ug2, ird2, p):
    """Angle threshold sealing loss of synchronism for a permanent fault.

    Past the during-fault saddle plus a full turn the PLL cannot re-lock at
    the during-fault operating point; without a saddle (lost equilibrium)
    any sustained two-turn advance is a runaway.
    """
    a, b, c, d = coeffs(p[P_XS], p[P_XM], p[P_XG], wr)
    arg = d * p[P_XG] * ird2 / (c * ug2)
    if abs(arg) <= 1.0:
        return (math.pi - math.asin(arg)) + 2.0 * math.pi
    return phi_entry + 4.0 * math.pi


@njit(cache=True)
def simulate_core(p, s, y0, dt, horizon, sample_dt, nmax):
    """Event-driven staged integration from the pre-fault state y0 at t = 0.

    Fixed-step RK4 inside segments; segment stops at t_f, t_c, and horizon
    land exactly on step boundaries. Stage switches:
      1 -> 2 when U_t < 0.8 while the fault is on (bisected to EVENT_TOL),
      2 -> 3 at t_c, 3 -> 4 when the ramped current reaches its pre-fault
      value (bisected). Early exit on non-finite states or an armed angle
      escape (stage 4, or permanent-fault stage 2).

    Returns (samples, nsamp, transitions, ntrans, status, t_end,
             ird2_eff, irq2_eff, ut_entry, y_final).
    """
    out = np.empty((nmax, C_LEN))
    trans = np.empty((8, 3))
    ntrans = 0
    nsamp = 0
    status = ST_OK

    y = y0.copy()
    t = 0.0
    stage = 1
    ug = s[S_UGNOM]
    ird2 = s[S_IRD2_REQ]
    irq2 = s[S_IRQ2]
    ut_entry = -1.0
    kramp = s[S_KRAMP]
    freeze = s[S_FREEZE] == 1.0
    tf = s[S_TF]
    tc = s[S_TC]
    permanent = math.isinf(tc)
    ut_guess = 1.0
    next_sample = 0.0
    esc4_thr = s[S_PHI_U1] + 2.0 * math.pi
    esc2_thr = math.inf

    while t < horizon - 1e-12 and status == ST_OK:
        # sample when due
        if t >= next_sample - 1e-12 and nsamp < nmax:
            ird, irq, utd, utq, ut, itd, itq, pt, res = algebra(
                y, stage, ug, ird2, irq2, p, ut_guess)
            out[nsamp, C_T] = t
            out[nsamp, C_WR] = y[0]
            out[nsamp, C_Y1] = y[1]
            out[nsamp, C_Y2] = y[2]
            out[nsamp, C_X] = y[3]
            out[nsamp, C_PHI] = y[4]
            out[nsamp, C_IRD] = ird
            out[nsamp, C_IRQ] = irq
            out[nsamp, C_UTD] = utd
            out[nsamp, C_UTQ] = utq
            out[nsamp, C_UT] = ut
            out[nsamp, C_PT] = pt
            out[nsamp, C_STAGE] = stage
            nsamp += 1
            next_sample += sample_dt

        # segment stop: next time event
        seg_end = horizon
        if t < tf and tf < seg_end:
            seg_end = tf
        if stage <= 2 and not permanent and t < tc and tc < seg_end:
            seg_end = tc

        # time events exactly reached
        if stage == 1 and not permanent and t >= tc - 1e-12:
            ug = s[S_UGNOM]  # fault cleared without the LVRT ever triggering
        elif stage == 1 and t >= tf - 1e-12 and (permanent or t < tc):
            # fault on; immediate switch if the algebraic U_t is already sagged
            ug = s[S_UG2]
            _, _, _, _, ut_now, _, _, _, res = algebra(
                y, 1, ug, ird2, irq2, p, ut_guess)
            if ut_now < UT_SWITCH_THRESHOLD:
                ird2, irq2, ut_entry, ok = lvrt_entry(
                    y[4], y[0], ug, s[S_IRD2_REQ], s[S_IRQ2], s[S_KE],
                    s[S_IMAX], s[S_IRQ1S], s[S_ALLOW_ZERO_IRD] == 1.0, p)
                if not ok:
                    status = ST_CAPACITY
                    break
                if permanent:
                    esc2_thr = _stage2_escape(y[4], y[0], ug, ird2, p)
                stage = 2
                trans[ntrans, 0] = t
                trans[ntrans, 1] = 1.0
                trans[ntrans, 2] = 2.0
                ntrans += 1
                continue
        if stage == 2 and not permanent and t >= tc - 1e-12:
            # fault cleared: voltage restored, ramped recovery starts
            ug = s[S_UGNOM]
            a, b, c, d = coeffs(p[P_XS], p[P_XM], p[P_XG], y[0])
            utq3 = -c * ug * math.sin(y[4]) + d * p[P_XG] * ird2
            utd3 = a * ug * math.cos(y[4]) - b * p[P_XG] * irq2
            ut3 = math.hypot(utd3, utq3)
            y[1] = ird2
            y[2] = irq2 - p[P_KPV] * ut3
            ut_guess = ut3
            if ird2 >= s[S_IRD1S]:
                stage = 4
                y[1] = ird2 - p[P_KPW] * y[0]
                trans[ntrans, 0] = t
                trans[ntrans, 1] = 2.0
                trans[ntrans, 2] = 4.0
                ntrans += 1
            else:
                stage = 3
                trans[ntrans, 0] = t
                trans[ntrans, 1] = 2.0
                trans[ntrans, 2] = 3.0
                ntrans += 1
            continue

        # integration step (shortened to land on the segment stop)
        h = dt
        if t + h > seg_end:
            h = seg_end - t
        if h <= 1e-15:
            # degenerate remainder: advance the clock
            t = seg_end
            continue
        y_prev = y
        guess_prev = ut_guess
        y, ut_guess, rmax = rk4_step(y, h, stage, ug, ird2, irq2, kramp,
                                     freeze, p, guess_prev)
        t_new = t + h
        if rmax > UT_TOL:
            status = ST_ALG_FAIL
            t = t_new
            break
        finite = True
        for i in range(5):
            if not math.isfinite(y[i]):
                finite = False
        if not finite:
            status = ST_NONFINITE
            t = t_new
            break

        # state events within (t, t_new]
        if stage == 1 and t_new > tf and (permanent or t_new <= tc + 1e-12):
            _, _, _, _, ut_now, _, _, _, _ = algebra(
                y, 1, ug, ird2, irq2, p, ut_guess)
            if ut_now < UT_SWITCH_THRESHOLD:
                lo = 0.0
                hi = h
                while hi - lo > EVENT_TOL:
                    mid = 0.5 * (lo + hi)
                    ym, um, _ = rk4_step(y_prev, mid, stage, ug, ird2, irq2,
                                         kramp, freeze, p, guess_prev)
                    _, _, _, _, utm, _, _, _, _ = algebra(
                        ym, 1, ug, ird2, irq2, p, um)
                    if utm < UT_SWITCH_THRESHOLD:
                        hi = mid
                    else:
                        lo = mid
                y, ut_guess, _ = rk4_step(y_prev, hi, stage, ug, ird2, irq2,
                                          kramp, freeze, p, guess_prev)
                t_new = t + hi
                ird2, irq2, ut_entry, ok = lvrt_entry(
                    y[4], y[0], ug, s[S_IRD2_REQ], s[S_IRQ2], s[S_KE],
                    s[S_IMAX], s[S_IRQ1S], s[S_ALLOW_ZERO_IRD] == 1.0, p)
                if not ok:
                    status = ST_CAPACITY
                    t = t_new
                    break
                if permanent:
                    esc2_thr = _stage2_escape(y[4], y[0], ug, ird2, p)
                stage = 2
                trans[ntrans, 0] = t_new
                trans[ntrans, 1] = 1.0
                trans[ntrans, 2] = 2.0
                ntrans += 1
        elif stage == 3 and y[1] >= s[S_IRD1S]:
            lo = 0.0
            hi = h
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                ym, _, _ = rk4_step(y_prev, mid, stage, ug, ird2, irq2,
                                    kramp, freeze, p, guess_prev)
                if ym[1] >= s[S_IRD1S]:
                    hi = mid
                else:
                    lo = mid
            y, ut_guess, _ = rk4_step(y_prev, hi, stage, ug, ird2, irq2,
                                      kramp, freeze, p, guess_prev)
            t_new = t + hi
            y[1] = y[1] - p[P_KPW] * y[0]
            stage = 4
            trans[ntrans, 0] = t_new
            trans[ntrans, 1] = 3.0
            trans[ntrans, 2] = 4.0
            ntrans += 1

        t = t_new

        # armed angle escapes: fate is sealed once the next saddle is passed
        if stage == 4 and y[4] > esc4_thr:
            status = ST_ANGLE_ESCAPE
            break
        if stage == 2 and permanent and y[4] > esc2_thr:
            status = ST_ANGLE_ESCAPE
            break

    # final sample at the end state
    if nsamp < nmax:
        ird, irq, utd, utq, ut, itd, itq, pt, res = algebra(
            y, stage, ug, ird2, irq2, p, ut_guess)
        out[nsamp, C_T] = t
        out[nsamp, C_WR] = y[0]
        out[nsamp, C_Y1] = y[1]
        out[nsamp, C_Y2] = y[2]
        out[nsamp, C_X] = y[3]
        out[nsamp, C_PHI] = y[4]
        out[nsamp, C_IRD] = ird
        out[nsamp, C_IRQ] = irq
        out[nsamp, C_UTD] = utd
        out[nsamp, C_UTQ] = utq
        out[nsamp, C_UT] = ut
        out[nsamp, C_PT] = pt
        out[nsamp, C_STAGE] = stage
        nsamp += 1

    return out, nsamp, trans, ntrans, status, t, ird2, irq2, ut_entry, y


# ---------------------------------------------------------------------------
# second-order swing reduction kernels: state (phi, v = dphi/dt)
# ---------------------------------------------------------------------------

SW_RUNNING = 0
SW_CONVERGED = 1
SW_ESCAPED = 2


@njit(cache=True)
def swing_rhs(phi, v, pm, pe, meq, dco):
    return v, (pm - pe * math.sin(phi) - dco * math.cos(phi) * v) / meq


@njit(cache=True)
def swing_rk4(phi, v, h, pm, pe, meq, dco):
    k1p, k1v = swing_rhs(phi, v, pm, pe, meq, dco)
    k2p, k2v = swing_rhs(phi + 0.5 * h * k1p, v + 0.5 * h * k1v, pm, pe, meq, dco)
    k3p, k3v = swing_rhs(phi + 0.5 * h * k2p, v + 0.5 * h * k2v, pm, pe, meq, dco)
    k4p, k4v = swing_rhs(phi + h * k3p, v + h * k3v, pm, pe, meq, dco)
    return (phi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))


@njit(cache=True)
def swing_record(phi0, v0, pm, pe, meq, dco, dt, nsteps, stride):
    """Integrate nsteps and record every stride-th state (plus the last)."""
    nmax = nsteps // stride + 2
    out = np.empty((nmax, 3))
    phi = phi0
    v = v0
    n = 0
    for k in range(nsteps + 1):
        if k % stride == 0 or k == nsteps:
            out[n, 0] = k * dt
            out[n, 1] = phi
            out[n, 2] = v
            n += 1
        if k < nsteps:
            phi, v = swing_rk4(phi, v, dt, pm, pe, meq, dco)
    return out[:n]


@njit(cache=True)
def swing_state_at(phi0, v0, pm, pe, meq, dco, dt, t_target):
    """State at exactly t_target: full steps of dt plus one remainder step."""
    phi = phi0
    v = v0
    nfull = int(t_target / dt)
    for _ in range(nfull):
        phi, v = swing_rk4(phi, v, dt, pm, pe, meq, dco)
    rem = t_target - nfull * dt
    if rem > 1e-15:
        phi, v = swing_rk4(phi, v, rem, pm, pe, meq, dco)
    return phi, v


@njit(cache=True)
def swing_verdict(phi0, v0, pm, pe, meq, dco, phi_sep, phi_escape,
                  dt, horizon, conv_radius, conv_speed):
    """Forward-simulated basin membership verdict.

    Returns (code, well_index, t_decided, phi_final). SW_CONVERGED fires
    once the state sits within conv_radius of the equilibrium family member
    phi_sep + 2*pi*k with |v| <= conv_speed (captured by local damping);
    well_index is that k, so k != 0 marks a slipped pole. SW_ESCAPED fires
    past phi_escape or on a non-finite state; SW_RUNNING means the horizon
    ended first.
    """
    phi = phi0
    v = v0
    t = 0.0
    two_pi = 2.0 * math.pi
    nsteps = int(math.ceil(horizon / dt))
    for _ in range(nsteps):
        if abs(v) <= conv_speed:
            k = int(math.floor((phi - phi_sep) / two_pi + 0.5))
            if abs(phi - (phi_sep + two_pi * k)) < conv_radius:
                return SW_CONVERGED, k, t, phi
        if phi > phi_escape:
            return SW_ESCAPED, 0, t, phi
        if not (math.isfinite(phi) and math.isfinite(v)):
            return SW_ESCAPED, 0, t, phi
        phi, v = swing_rk4(phi, v, dt, pm, pe, meq, dco)
        t += dt
    return SW_RUNNING, 0, t, phi


@njit(cache=True)
def swing_first_crossing(phi0, v0, pm, pe, meq, dco, phi_target, dt, horizon):
    """First time phi crosses phi_target from below; nan if it never does.

    The crossing step is refined by bisection to EVENT_TOL seconds.
    """
    phi = phi0
    v = v0
    t = 0.0
    nsteps = int(math.ceil(horizon / dt))
    for _ in range(nsteps):
        if phi >= phi_target:
            return t
        phi_new, v_new = swing_rk4(phi, v, dt, pm, pe, meq, dco)
        if phi_new >= phi_target:
            lo = 0.0
            hi = dt
            while hi - lo > EVENT_TOL:
                mid = 0.5 * (lo + hi)
                pm_, _ = swing_rk4(phi, v, mid, pm, pe, meq, dco)
                if pm_ >= phi_target:
                    hi = mid
                else:
                    lo = mid
            return t + hi
        phi = phi_new
        v = v_new
        t += dt
    return math.nan


@njit(cache=True)
def swing_trace(phi0, v0, pm, pe, meq, dco, dt, direction,
                phi_lo, phi_hi, v_lim, arc_budget, nmax, stride):
    """Trace a trajectory (direction=+1 forward, -1 backward in time).

    Stops when the state leaves the [phi_lo, phi_hi] x [-v_lim, v_lim]
    window or the polyline arc length exceeds arc_budget.
    Returns (points (phi, v), count, truncated_by_window).
    """
    out = np.empty((nmax, 2))
    phi = phi0
    v = v0
    n = 0
    arc = 0.0
    hit_window = False
    k = 0
    while n < nmax:
        if k % stride == 0:
            out[n, 0] = phi
            out[n, 1] = v
            n += 1
        if phi < phi_lo or phi > phi_hi or abs(v) > v_lim:
            hit_window = True
            break
        if arc > arc_budget:
            break
        phi_new, v_new = swing_rk4(phi, v, direction * dt, pm, pe, meq, dco)
        arc += math.hypot(phi_new - phi, v_new - v)
        phi = phi_new
        v = v_new
        k += 1
    return out[:n], n, hit_window
