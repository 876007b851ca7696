"""Equal-area assessment: permanent-fault test and whole-sequence CCT.

The permanent-fault test compares the accelerating area against the maximal
decelerating area of the during-fault swing. The whole-sequence extension
virtually holds the post-fault active current at its during-fault value and
balances the during-fault accelerating area against the recovered-voltage
decelerating area up to the post-fault saddle, which yields a closed-form
critical clearing angle. Converting the angle to a time uses the damped
during-fault swing trajectory; the angle derivation itself drops damping,
which is why this method runs a few percent radical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import _kernels as K
from .errors import NoEquilibriumError, ParameterError
from .model_core import params_vector, sep_stage1
from .params import SystemParams
from .scenario import Scenario
from .swing import GseParams, GseState, gse_from_stage, state_from_pll

QUAD_TOL = 1e-10
ROOT_TOL = 1e-10
STAGE2_HORIZON = 10.0


@dataclass(frozen=True)
class EacAreas:
    s_plus: float
    s_minus: float
    phi_start: float
    phi_end: float


@dataclass
class CctReport:
    """Per-scenario record of the assessment methods."""

    scenario_id: str
    Ug2: float
    i_rq2: float
    i_rd2: float
    Kramp: float
    phi_cr: float | None = None
    cct_eac: float | None = None
    cct_boa: float | None = None
    cct_sim: float | None = None
    flags: dict = field(default_factory=dict)

    @staticmethod
    def _err_pct(value, reference):
        if value is None or reference is None:
            return None
        if not (math.isfinite(value) and math.isfinite(reference)) or reference == 0:
            return None
        return 100.0 * (value - reference) / reference

    @property
    def err_boa_pct(self):
        return self._err_pct(self.cct_boa, self.cct_sim)

    @property
    def err_eac_pct(self):
        return self._err_pct(self.cct_eac, self.cct_sim)


def adaptive_simpson(f, a, b, tol=QUAD_TOL):
    """Adaptive Simpson quadrature to absolute tolerance tol."""
    if a == b:
        return 0.0

    def _simpson(fa, fm, fb, a_, b_):
        return (b_ - a_) / 6.0 * (fa + 4.0 * fm + fb)

    def _recurse(a_, b_, fa, fm, fb, whole, tol_, depth):
        m = 0.5 * (a_ + b_)
        lm = f(0.5 * (a_ + m))
        rm = f(0.5 * (m + b_))
        left = _simpson(fa, lm, fm, a_, m)
        right = _simpson(fm, rm, fb, m, b_)
        if depth > 50 or abs(left + right - whole) <= 15.0 * tol_:
            return left + right + (left + right - whole) / 15.0
        return (_recurse(a_, m, fa, lm, fm, left, 0.5 * tol_, depth + 1)
                + _recurse(m, b_, fm, rm, fb, right, 0.5 * tol_, depth + 1))

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = _simpson(fa, fm, fb, a, b)
    return _recurse(a, b, fa, fm, fb, whole, tol, 0)


def bisect_root(f, lo, hi, tol=ROOT_TOL):
    """Root of a sign-changing continuous f on [lo, hi] by plain bisection."""
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ParameterError("bisection bracket does not change sign")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def accelerating_power(g: GseParams):
    """Integrand Pm - Pe(phi) of the swing areas."""
    return lambda phi: g.Pm - g.Pe_amp * math.sin(phi)


def areas_permanent_fault(g2: GseParams, phi_s1: float) -> EacAreas:
    """Accelerating and maximal decelerating areas of the during-fault swing.

    The accelerating excursion runs from the pre-fault angle to the
    during-fault operating angle; when the operating angle sits below the
    pre-fault one the excursion is empty and the accelerating area is zero.
    """
    eq = g2.equilibria()
    if not eq.exists:
        raise NoEquilibriumError(
            "during-fault equilibrium lost (loss-of-synchronism regime); "
            f"sin argument {eq.argument:.4f}")
    f = accelerating_power(g2)
    if eq.phi_s > phi_s1:
        s_plus = adaptive_simpson(f, phi_s1, eq.phi_s)
    else:
        s_plus = 0.0
    s_minus = -adaptive_simpson(f, eq.phi_s, eq.phi_u)
    return EacAreas(s_plus, s_minus, phi_s1, eq.phi_u)


def permanent_fault_stable(g2: GseParams, phi_s1: float) -> bool:
    """First-swing verdict for a never-cleared fault: S+ <= S-."""
    try:
        areas = areas_permanent_fault(g2, phi_s1)
    except NoEquilibriumError:
        return False
    return areas.s_plus <= areas.s_minus


@dataclass(frozen=True)
class CriticalAngle:
    """Closed-form critical clearing angle, or the verdict when none exists.

    status: "ok" (phi_cr valid), "always-stable" (deceleration exceeds any
    possible acceleration; arccos argument < -1), "always-unstable"
    (argument > 1).
    """

    phi_cr: float | None
    status: str
    cos_argument: float


def critical_clearing_angle(params: SystemParams, Ug2: float, Ug3: float,
                            i_rd2: float, omega_r_frozen: float) -> CriticalAngle:
    """Equal-area critical clearing angle for the whole ride-through sequence."""
    if Ug3 <= Ug2:
        raise ParameterError(
            f"post-fault voltage must exceed the fault depth (Ug3={Ug3}, Ug2={Ug2})")
    g2 = gse_from_stage(params, Ug2, i_rd2, omega_r_frozen)
    g3 = gse_from_stage(params, Ug3, i_rd2, omega_r_frozen)
    eq3 = g3.equilibria()
    if not eq3.exists:
        raise NoEquilibriumError(
            "no post-fault saddle at the during-fault current "
            f"(sin argument {eq3.argument:.4f})")
    phi_s1 = sep_stage1(params).phi_pll
    phi_u3 = eq3.phi_u
    co_c = g3.Pe_amp / Ug3  # = correction coefficient c at the frozen speed
    arg = (g2.Pm * (phi_u3 - phi_s1)) / (co_c * (Ug3 - Ug2)) \
        + (Ug3 * math.cos(phi_u3) - Ug2 * math.cos(phi_s1)) / (Ug3 - Ug2)
    if arg < -1.0:
        return CriticalAngle(None, "always-stable", arg)
    if arg > 1.0:
        return CriticalAngle(None, "always-unstable", arg)
    return CriticalAngle(math.acos(arg), "ok", arg)


def critical_clearing_angle_quadrature(params: SystemParams, Ug2: float,
                                       Ug3: float, i_rd2: float,
                                       omega_r_frozen: float) -> float:
    """Independent root of the equal-area balance, for cross-checking.

    Solves S_sigma2+(phi) = S_3-(phi) by adaptive quadrature and bisection
    on (phi_s1, phi_u3); raises when the balance has no root there.
    """
    g2 = gse_from_stage(params, Ug2, i_rd2, omega_r_frozen)
    g3 = gse_from_stage(params, Ug3, i_rd2, omega_r_frozen)
    eq3 = g3.equilibria()
    if not eq3.exists:
        raise NoEquilibriumError("no post-fault saddle")
    phi_s1 = sep_stage1(params).phi_pll
    phi_u3 = eq3.phi_u
    f2 = accelerating_power(g2)
    f3 = accelerating_power(g3)

    def residual(phi):
        s_acc = adaptive_simpson(f2, phi_s1, phi)
        s_dec = -adaptive_simpson(f3, phi, phi_u3)
        return s_acc - s_dec

    return bisect_root(residual, phi_s1, phi_u3, tol=ROOT_TOL)


def lvrt_entry_effective(scenario: Scenario):
    """Effective (i_rd2, i_rq2, U_t) at stage-2 entry from the pre-fault point.

    Shares the staged simulator's entry solve so the swing-based assessors
    see exactly the currents the simulator applies.
    """
    sc = scenario
    sep = sep_stage1(sc.params)
    p = params_vector(sc.params)
    irq2_fixed = math.nan if sc.i_rq2 is None else sc.i_rq2
    ird2, irq2, ut2, ok = K.lvrt_entry(
        sep.phi_pll, sep.omega_r, sc.Ug2, sc.i_rd2, irq2_fixed,
        sc.params.Ke, sc.params.Imax, sep.i_rq, sc.allow_zero_i_rd2, p)
    if not ok:
        from .errors import CapacityError
        raise CapacityError(
            f"reactive injection exceeds Imax (i_rq2 = {irq2:.4f})")
    return ird2, irq2, ut2


def cct_eac(scenario: Scenario, horizon: float = STAGE2_HORIZON):
    """EAC-based critical clearing time, measured from the fault instant.

    Integrates the damped during-fault swing from the pre-fault operating
    point and returns the first crossing of the critical clearing angle.
    Returns (cct, diagnostics); cct is math.inf when the fault trajectory
    never reaches the critical angle (always-stable), 0.0 when no clearing
    angle can balance the areas.
    """
    sc = scenario
    params = sc.params
    ird2, irq2, ut2 = lvrt_entry_effective(sc)
    wr0 = params.omega_r_ref
    angle = critical_clearing_angle(params, sc.Ug2, params.Ug_nominal,
                                    ird2, wr0)
    diag = {"i_rd2_eff": ird2, "i_rq2_eff": irq2, "angle_status": angle.status}
    if angle.status == "always-stable":
        return math.inf, diag
    if angle.status == "always-unstable":
        return 0.0, diag
    diag["phi_cr"] = angle.phi_cr
    g2 = gse_from_stage(params, sc.Ug2, ird2, wr0)
    phi_s1 = sep_stage1(params).phi_pll
    s0 = state_from_pll(1.0, phi_s1, g2)
    t_cross = K.swing_first_crossing(
        s0.phi, s0.phi_dot, g2.Pm, g2.Pe_amp, g2.Meq, g2.Deq_coeff,
        angle.phi_cr, sc.dt, horizon)
    if math.isnan(t_cross):
        if g2.equilibria().exists:
            return math.inf, diag  # bounded below the critical angle
        diag["warning"] = "no crossing within horizon despite lost equilibrium"
        return math.nan, diag
    return t_cross, diag
