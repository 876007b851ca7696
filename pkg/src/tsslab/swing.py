"""Second-order swing reduction of a frozen stage.

With the grid voltage and active rotor current held fixed, the PLL pair
collapses exactly to one second-order equation in the PLL angle,

    Meq * phi'' = Pm - Pe_amp*sin(phi) - Deq_coeff*cos(phi)*phi',

with equivalent mechanical power Pm = d*Xg*i_rd, electromagnetic amplitude
Pe_amp = c*Ug, inertia Meq = 1/kipll, and an angle-dependent damping
coefficient Deq_coeff = c*(kppll/kipll)*Ug multiplying cos(phi). The
reduction is an algebraic identity, not an approximation; the equal-area and
basin-of-attraction assessors share it as their analytical core.

Note the damping changes sign past pi/2: the model is implemented exactly as
derived, including the negative-damping region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .model_core import FrozenStageEquilibria, correction_coefficients
from .params import SystemParams


@dataclass(frozen=True)
class GseParams:
    """Coefficients of the reduced swing equation for one frozen stage."""

    Pm: float
    Pe_amp: float
    Meq: float
    Deq_coeff: float
    # context needed to map between (phi, phi_dot) and (x_pll, phi_pll)
    kppll: float
    omega0: float

    def u_tq(self, phi: float) -> float:
        """Quadrature terminal voltage; equals Pm - Pe_amp*sin(phi)."""
        return self.Pm - self.Pe_amp * math.sin(phi)

    def equilibria(self) -> FrozenStageEquilibria:
        arg = self.Pm / self.Pe_amp if self.Pe_amp > 0.0 else math.inf
        if abs(arg) > 1.0:
            return FrozenStageEquilibria(math.nan, math.nan, False, False, arg)
        if abs(arg) == 1.0:
            half_pi = math.copysign(math.pi / 2.0, arg)
            return FrozenStageEquilibria(half_pi, half_pi, True, True, arg)
        phi_s = math.asin(arg)
        return FrozenStageEquilibria(phi_s, math.pi - phi_s, True, False, arg)

    def energy(self, phi: float, phi_dot: float) -> float:
        """Undamped first integral: kinetic + potential."""
        return (0.5 * self.Meq * phi_dot * phi_dot
                - self.Pm * phi - self.Pe_amp * math.cos(phi))


@dataclass(frozen=True)
class GseState:
    phi: float
    phi_dot: float


def gse_from_stage(params: SystemParams, Ug: float, i_rd: float,
                   omega_r_frozen: float) -> GseParams:
    """Reduced swing coefficients with (c, d) frozen at omega_r_frozen."""
    co = correction_coefficients(params, omega_r_frozen)
    return GseParams(
        Pm=co.d * params.Xg * i_rd,
        Pe_amp=co.c * Ug,
        Meq=1.0 / params.kipll,
        Deq_coeff=co.c * (params.kppll / params.kipll) * Ug,
        kppll=params.kppll,
        omega0=params.omega0,
    )


def gse_derivatives(s: GseState, g: GseParams) -> GseState:
    dphi, dv = K.swing_rhs(s.phi, s.phi_dot, g.Pm, g.Pe_amp, g.Meq, g.Deq_coeff)
    return GseState(dphi, dv)


def state_from_pll(x_pll: float, phi_pll: float, g: GseParams) -> GseState:
    """Map PLL coordinates (x_pll, phi_pll) to swing coordinates (phi, phi_dot)."""
    v = g.kppll * g.u_tq(phi_pll) + g.omega0 * (x_pll - 1.0)
    return GseState(phi_pll, v)


def pll_from_state(s: GseState, g: GseParams):
    """Inverse of state_from_pll; returns (x_pll, phi_pll)."""
    x = 1.0 + (s.phi_dot - g.kppll * g.u_tq(s.phi)) / g.omega0
    return x, s.phi


def integrate(g: GseParams, s0: GseState, duration: float,
              dt: float = 5e-5, sample_stride: int = 20) -> np.ndarray:
    """Fixed-step trajectory; rows are (t, phi, phi_dot)."""
    nsteps = int(round(duration / dt))
    return K.swing_record(s0.phi, s0.phi_dot, g.Pm, g.Pe_amp, g.Meq,
                          g.Deq_coeff, dt, nsteps, sample_stride)


def state_at(g: GseParams, s0: GseState, t: float, dt: float = 5e-5) -> GseState:
    phi, v = K.swing_state_at(s0.phi, s0.phi_dot, g.Pm, g.Pe_amp, g.Meq,
                              g.Deq_coeff, dt, t)
    return GseState(phi, v)


def stage2_entry_state(params: SystemParams, g2: GseParams,
                       phi_entry: float, x_entry: float = 1.0) -> GseState:
    """Swing state the during-fault system starts from at stage-2 entry.

    The PLL pair is continuous across the switch, so the angle rate jumps
    with the quadrature voltage: phi_dot = kppll*u_tq2(phi) + omega0*(x-1).
    """
    return state_from_pll(x_entry, phi_entry, g2)


def dae_trajectory(params: SystemParams, Ug: float, i_rd: float,
                   omega_r_frozen: float, x0: float, phi0: float,
                   duration: float, dt: float = 5e-5,
                   sample_stride: int = 20) -> np.ndarray:
    """Frozen-stage PLL pair integrated in its original (x, phi) coordinates.

    Used to confirm the reduction is exact: rows are (t, phi) on the same
    sample grid as integrate().
    """
    co = correction_coefficients(params, omega_r_frozen)
    nsteps = int(round(duration / dt))
    return _dae_pll_record(
        x0, phi0, co.c * Ug, co.d * params.Xg * i_rd,
        params.kppll, params.kipll, params.omega0, dt, nsteps, sample_stride)


def gse_vs_dae_residual(params: SystemParams, Ug: float, i_rd: float,
                        omega_r_frozen: float, x0: float, phi0: float,
                        duration: float, dt: float = 5e-5) -> float:
    """Max |phi_swing - phi_pll_pair| over the duration, same initial point."""
    g = gse_from_stage(params, Ug, i_rd, omega_r_frozen)
    s0 = state_from_pll(x0, phi0, g)
    stride = 20
    sw = integrate(g, s0, duration, dt=dt, sample_stride=stride)
    da = dae_trajectory(params, Ug, i_rd, omega_r_frozen, x0, phi0,
                        duration, dt=dt, sample_stride=stride)
    n = min(len(sw), len(da))
    return float(np.max(np.abs(sw[:n, 1] - da[:n, 1])))


@njit(cache=True)
def _dae_pll_record(x0, phi0, ce_ug, de_xg_ird, kppll, kipll, omega0,
                    dt, nsteps, stride):
    nmax = nsteps // stride + 2
    out = np.empty((nmax, 2))
    x = x0
    phi = phi0
    n = 0
    for k in range(nsteps + 1):
        if k % stride == 0 or k == nsteps:
            out[n, 0] = k * dt
            out[n, 1] = phi
            n += 1
        if k < nsteps:
            # classical RK4 on the (x, phi) pair
            u1 = -ce_ug * math.sin(phi) + de_xg_ird
            k1x = kipll * u1 / omega0
            k1p = kppll * u1 + omega0 * (x - 1.0)
            u2 = -ce_ug * math.sin(phi + 0.5 * dt * k1p) + de_xg_ird
            k2x = kipll * u2 / omega0
            k2p = kppll * u2 + omega0 * (x + 0.5 * dt * k1x - 1.0)
            u3 = -ce_ug * math.sin(phi + 0.5 * dt * k2p) + de_xg_ird
            k3x = kipll * u3 / omega0
            k3p = kppll * u3 + omega0 * (x + 0.5 * dt * k2x - 1.0)
            u4 = -ce_ug * math.sin(phi + dt * k3p) + de_xg_ird
            k4x = kipll * u4 / omega0
            k4p = kppll * u4 + omega0 * (x + dt * k3x - 1.0)
            x += (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            phi += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return out[:n]


def phase_portrait_grid(g: GseParams, phi_range, phi_dot_range,
                        n_phi: int = 61, n_v: int = 41) -> np.ndarray:
    """CSV-ready grid of (phi, phi_dot, phi_ddot) for portrait plots."""
    phis = np.linspace(phi_range[0], phi_range[1], n_phi)
    vs = np.linspace(phi_dot_range[0], phi_dot_range[1], n_v)
    rows = np.empty((n_phi * n_v, 3))
    i = 0
    for phi in phis:
        for v in vs:
            _, dv = K.swing_rhs(phi, v, g.Pm, g.Pe_amp, g.Meq, g.Deq_coeff)
            rows[i, 0] = phi
            rows[i, 1] = v
            rows[i, 2] = dv
            i += 1
    return rows
