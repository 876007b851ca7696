"""Algebraic network/machine layer and closed-form equilibria.

The terminal voltage and output currents follow from the rotor currents and
the PLL angle through reactance-ratio corrected network equations. In the
stages where the voltage controller is active, the terminal-voltage magnitude
appears on both sides of the algebra and is resolved by a damped scalar
fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import AlgebraicSolveError, NoEquilibriumError, ParameterError
from .params import SystemParams


@dataclass(frozen=True)
class CoeffSet:
    """Reactance-ratio correction coefficients."""

    a: float
    b: float
    c: float
    d: float


@dataclass(frozen=True)
class AlgebraicOutputs:
    u_td: float
    u_tq: float
    U_t: float
    i_td: float
    i_tq: float
    P_t: float


@dataclass(frozen=True)
class EquilibriumPoint:
    omega_r: float
    i_rd: float
    i_rq: float
    x_pll: float
    phi_pll: float
    kind: str  # "SEP" or "UEP"

    def as_list(self):
        return [self.omega_r, self.i_rd, self.i_rq, self.x_pll, self.phi_pll]


@dataclass(frozen=True)
class FrozenStageEquilibria:
    """SEP/UEP pair of a frozen (fixed Ug, fixed i_rd) stage.

    ``exists`` is False in the loss-of-synchronism regime (no equilibrium);
    that is a legal outcome, not an error. ``argument`` is the arcsine
    argument d*Xg*i_rd / (c*Ug).
    """

    phi_s: float
    phi_u: float
    exists: bool
    degenerate: bool
    argument: float


def params_vector(params: SystemParams):
    """Flat parameter vector consumed by the compiled kernels."""
    p = np.empty(K.P_LEN)
    p[K.P_OMEGA0] = params.omega0
    p[K.P_XG] = params.Xg
    p[K.P_XS] = params.Xs
    p[K.P_XM] = params.Xm
    p[K.P_H] = params.H
    p[K.P_PIN] = params.Pin
    p[K.P_UTREF] = params.Ut_ref
    p[K.P_WRREF] = params.omega_r_ref
    p[K.P_KPW] = params.kpw
    p[K.P_KIW] = params.kiw
    p[K.P_KPV] = params.kpV
    p[K.P_KIV] = params.kiV
    p[K.P_KPPLL] = params.kppll
    p[K.P_KIPLL] = params.kipll
    return p


def correction_coefficients(params: SystemParams, omega_r: float) -> CoeffSet:
    """Coefficients (a, b, c, d) at rotor speed omega_r."""
    if not math.isfinite(omega_r) or omega_r <= 0.0:
        raise ParameterError(f"omega_r must be finite and positive, got {omega_r!r}")
    if params.Xs + omega_r * params.Xg <= 0.0:
        raise ParameterError("Xs + omega_r*Xg must be positive")
    a, b, c, d = K.coeffs(params.Xs, params.Xm, params.Xg, omega_r)
    return CoeffSet(a, b, c, d)


def terminal_voltage_dq(coeffs: CoeffSet, Ug: float, phi_pll: float,
                        i_rd: float, i_rq: float, params: SystemParams):
    """Terminal-voltage dq components from rotor currents and the PLL angle."""
    u_td = coeffs.a * Ug * math.cos(phi_pll) - coeffs.b * params.Xg * i_rq
    u_tq = -coeffs.c * Ug * math.sin(phi_pll) + coeffs.d * params.Xg * i_rd
    return u_td, u_tq


def solve_algebraic(state, Ug: float, stage: int,
                    params: SystemParams) -> AlgebraicOutputs:
    """Self-consistent algebraic outputs at a state.

    ``state`` needs attributes omega_r, phi_pll, i_rd, i_rq and (for stages
    with an active voltage controller) z_tvc. During the fault (stage 2) the
    currents are the clamped injection values carried by the state, so no
    fixed point is involved.
    """
    y = np.empty(5)
    y[0] = state.omega_r
    y[3] = getattr(state, "x_pll", 1.0)
    y[4] = state.phi_pll
    if stage == 2:
        y[1] = 0.0
        y[2] = 0.0
        ird2, irq2 = state.i_rd, state.i_rq
    elif stage == 3:
        y[1] = state.i_rd
        y[2] = state.z_tvc
        ird2 = irq2 = 0.0
    else:
        y[1] = state.i_rd - params.kpw * state.omega_r
        y[2] = state.z_tvc
        ird2 = irq2 = 0.0
    p = params_vector(params)
    guess = getattr(state, "U_t_guess", 1.0)
    ird, irq, utd, utq, ut, itd, itq, pt, res = K.algebra(
        y, stage, Ug, ird2, irq2, p, guess)
    if res > K.UT_TOL:
        raise AlgebraicSolveError(
            f"terminal-voltage fixed point did not converge (residual {res:.3e})",
            residual=res)
    return AlgebraicOutputs(utd, utq, ut, itd, itq, pt)


def _stage1_phi_s(params: SystemParams) -> float:
    arg = params.Pin * params.Xg / (params.Ug_nominal * params.Ut_ref)
    if arg > 1.0:
        raise NoEquilibriumError(
            f"no pre-fault operating point: Pin*Xg/(Ug*Ut_ref) = {arg:.4f} > 1")
    return math.asin(arg)


def _stage1_point(params: SystemParams, kind: str) -> EquilibriumPoint:
    phi_s = _stage1_phi_s(params)
    phi = phi_s if kind == "SEP" else math.pi - phi_s
    wr = params.omega_r_ref
    co = correction_coefficients(params, wr)
    i_rd = params.Xs * params.Pin / (params.Xm * wr)
    # steady state pins u_td = Ut_ref (u_tq = 0), which fixes i_rq
    i_rq = (co.a * params.Ug_nominal * math.cos(phi) - params.Ut_ref) \
        / (co.b * params.Xg)
    return EquilibriumPoint(wr, i_rd, i_rq, 1.0, phi, kind)


def sep_stage1(params: SystemParams) -> EquilibriumPoint:
    """Stable pre-fault operating point."""
    return _stage1_point(params, "SEP")


def uep_stage1(params: SystemParams) -> EquilibriumPoint:
    """Unstable pre-fault equilibrium (the saddle at pi - phi_s)."""
    return _stage1_point(params, "UEP")


def sep_uep_stage2or3(coeffs: CoeffSet, Ug: float, i_rd: float,
                      params: SystemParams) -> FrozenStageEquilibria:
    """Equilibrium angles of a frozen stage with fixed (Ug, i_rd).

    Loss of the equilibrium (|argument| > 1) is reported, not raised: it is
    the loss-of-synchronism regime.
    """
    arg = coeffs.d * params.Xg * i_rd / (coeffs.c * Ug)
    if abs(arg) > 1.0:
        return FrozenStageEquilibria(math.nan, math.nan, False, False, arg)
    if abs(arg) == 1.0:
        half_pi = math.copysign(math.pi / 2.0, arg)
        return FrozenStageEquilibria(half_pi, half_pi, True, True, arg)
    phi_s = math.asin(arg)
    return FrozenStageEquilibria(phi_s, math.pi - phi_s, True, False, arg)
