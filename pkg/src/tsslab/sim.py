"""Event-driven four-stage simulator and outcome classification.

The integrator state is (omega_r, y1, y2, x_pll, phi_pll); y1/y2 hold the
transformed controller states of the active stage (see FullState). Switching
follows the ride-through sequence: the LVRT clamp engages when the terminal
voltage sags below 0.8, clearing restores the grid voltage and starts the
ramped active-current recovery, and normal control returns once the ramp
reaches its pre-fault value. All switch times are localized to 1e-6 s.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import AlgebraicSolveError, CapacityError, TsslabError
from .model_core import params_vector, sep_stage1, sep_uep_stage2or3, \
    correction_coefficients, uep_stage1
from .params import SystemParams
from .scenario import Scenario, StageId

TRAJECTORY_CSV_HEADER = "t,omega_r,i_rd,i_rq,x_pll,phi_pll,u_td,u_tq,U_t,P_t,stage"

# classification box around the final-stage operating point
CONV_PHI_TOL = 0.05
CONV_X_TOL = 0.01
CONV_WINDOW = 0.5


class Outcome(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class FullState:
    """Five mechanism states in integrator-friendly coordinates.

    w_rsc = i_rd - kpw*omega_r and z_tvc = i_rq - kpV*U_t remove the
    controller derivative terms from the right-hand side; i_rd and i_rq are
    reconstructed readouts.
    """

    omega_r: float
    w_rsc: float
    z_tvc: float
    x_pll: float
    phi_pll: float
    i_rd: float
    i_rq: float

    @classmethod
    def at_equilibrium(cls, eq, params: SystemParams) -> "FullState":
        # at an equilibrium U_t = Ut_ref
        return cls(
            omega_r=eq.omega_r,
            w_rsc=eq.i_rd - params.kpw * eq.omega_r,
            z_tvc=eq.i_rq - params.kpV * params.Ut_ref,
            x_pll=eq.x_pll,
            phi_pll=eq.phi_pll,
            i_rd=eq.i_rd,
            i_rq=eq.i_rq,
        )


@dataclass
class Transition:
    from_stage: int
    to_stage: int
    t: float


@dataclass
class Trajectory:
    """Uniformly sampled run of the staged model.

    ``samples`` columns follow _kernels: t, omega_r, y1, y2, x_pll, phi_pll,
    i_rd, i_rq, u_td, u_tq, U_t, P_t, stage.
    """

    samples: np.ndarray
    transitions: list[Transition]
    status: int
    t_end: float
    scenario: Scenario
    i_rd2_eff: float
    i_rq2_eff: float
    ut_at_entry: float
    final_state: np.ndarray
    horizon: float

    @property
    def t(self):
        return self.samples[:, K.C_T]

    @property
    def phi_pll(self):
        return self.samples[:, K.C_PHI]

    @property
    def x_pll(self):
        return self.samples[:, K.C_X]

    @property
    def stage(self):
        return self.samples[:, K.C_STAGE].astype(int)

    def blew_up(self) -> bool:
        return self.status in (K.ST_NONFINITE, K.ST_ALG_FAIL)

    def csv_rows(self):
        """Rows in the export column order (drops the internal y1/y2)."""
        cols = [K.C_T, K.C_WR, K.C_IRD, K.C_IRQ, K.C_X, K.C_PHI,
                K.C_UTD, K.C_UTQ, K.C_UT, K.C_PT, K.C_STAGE]
        return self.samples[:, cols]


def _scenario_vector(sc: Scenario, sep, uep):
    s = np.empty(K.S_LEN)
    s[K.S_UGNOM] = sc.params.Ug_nominal
    s[K.S_UG2] = sc.Ug2
    s[K.S_TF] = sc.t_f
    s[K.S_TC] = sc.t_c
    s[K.S_IRD2_REQ] = sc.i_rd2
    s[K.S_IRQ2] = math.nan if sc.i_rq2 is None else sc.i_rq2
    s[K.S_KE] = sc.params.Ke
    s[K.S_IMAX] = sc.params.Imax
    s[K.S_KRAMP] = sc.kramp
    s[K.S_FREEZE] = 1.0 if sc.freeze_rotor_during_fault else 0.0
    s[K.S_IRD1S] = sep.i_rd
    s[K.S_IRQ1S] = sep.i_rq
    s[K.S_PHI_U1] = uep.phi_pll
    s[K.S_ALLOW_ZERO_IRD] = 1.0 if sc.allow_zero_i_rd2 else 0.0
    return s


def _raw_state(state: FullState, stage: int, params: SystemParams):
    y = np.empty(5)
    y[0] = state.omega_r
    y[3] = state.x_pll
    y[4] = state.phi_pll
    if stage == 2:
        y[1] = state.w_rsc
        y[2] = state.z_tvc
    elif stage == 3:
        y[1] = state.i_rd
        y[2] = state.z_tvc
    else:
        y[1] = state.i_rd - params.kpw * state.omega_r
        y[2] = state.z_tvc
    return y


def _full_state(y, stage: int, ug: float, ird2: float, irq2: float,
                params: SystemParams) -> FullState:
    p = params_vector(params)
    ird, irq, utd, utq, ut, itd, itq, pt, res = K.algebra(
        y, stage, ug, ird2, irq2, p, 1.0)
    return FullState(
        omega_r=y[0],
        w_rsc=ird - params.kpw * y[0],
        z_tvc=irq - params.kpV * ut,
        x_pll=y[3],
        phi_pll=y[4],
        i_rd=ird,
        i_rq=irq,
    )


def derivatives(state: FullState, t: float, stage: int, scenario: Scenario):
    """Stage vector field at a state; returns a 5-vector matching FullState order.

    Components: d(omega_r), d(w_rsc or i_rd), d(z_tvc), d(x_pll), d(phi_pll).
    """
    sc = scenario
    ug = _grid_voltage(sc, t, stage)
    y = _raw_state(state, stage, sc.params)
    p = params_vector(sc.params)
    dy, ut, res = K.rhs(y, stage, ug, state.i_rd, state.i_rq, sc.kramp,
                        sc.freeze_rotor_during_fault, p, 1.0)
    if res > K.UT_TOL:
        raise AlgebraicSolveError(
            f"terminal-voltage fixed point did not converge (residual {res:.3e})",
            residual=res)
    return dy


def _grid_voltage(sc: Scenario, t: float, stage: int) -> float:
    if stage in (3, 4):
        return sc.params.Ug_nominal
    if sc.t_f <= t < sc.t_c:
        return sc.Ug2
    return sc.params.Ug_nominal


def step(state: FullState, t: float, dt: float, stage: int,
         scenario: Scenario):
    """One RK4 step with a post-step switching check.

    Returns (state', events) where events is a list of Transition records
    localized to 1e-6 s within (t, t+dt].
    """
    if dt <= 0.0:
        raise TsslabError("dt must be positive")
    sc = scenario
    p = params_vector(sc.params)
    ug = _grid_voltage(sc, t, stage)
    y = _raw_state(state, stage, sc.params)
    ynew, ut_g, rmax = K.rk4_step(y, dt, stage, ug, state.i_rd, state.i_rq,
                                  sc.kramp, sc.freeze_rotor_during_fault, p, 1.0)
    if rmax > K.UT_TOL:
        raise AlgebraicSolveError("algebraic layer diverged inside the step",
                                  residual=rmax)
    if not np.all(np.isfinite(ynew)):
        raise AlgebraicSolveError("state became non-finite inside the step")
    events = []
    t_new = t + dt
    if stage == 1 and sc.t_f <= t_new and (sc.permanent or t_new <= sc.t_c):
        _, _, _, _, ut, _, _, _, _ = K.algebra(
            ynew, 1, ug, 0.0, 0.0, p, ut_g)
        if ut < K.UT_SWITCH_THRESHOLD:
            lo, hi = 0.0, dt
            while hi - lo > K.EVENT_TOL:
                mid = 0.5 * (lo + hi)
                ym, um, _ = K.rk4_step(y, mid, stage, ug, state.i_rd,
                                       state.i_rq, sc.kramp,
                                       sc.freeze_rotor_during_fault, p, 1.0)
                _, _, _, _, utm, _, _, _, _ = K.algebra(ym, 1, ug, 0.0, 0.0, p, um)
                if utm < K.UT_SWITCH_THRESHOLD:
                    hi = mid
                else:
                    lo = mid
            events.append(Transition(1, 2, t + hi))
    elif stage == 3:
        ird1s = sep_stage1(sc.params).i_rd
        if ynew[1] >= ird1s:
            lo, hi = 0.0, dt
            while hi - lo > K.EVENT_TOL:
                mid = 0.5 * (lo + hi)
                ym, _, _ = K.rk4_step(y, mid, stage, ug, state.i_rd,
                                      state.i_rq, sc.kramp,
                                      sc.freeze_rotor_during_fault, p, 1.0)
                if ym[1] >= ird1s:
                    hi = mid
                else:
                    lo = mid
            events.append(Transition(3, 4, t + hi))
    ird2 = state.i_rd if stage == 2 else 0.0
    irq2 = state.i_rq if stage == 2 else 0.0
    return _full_state(ynew, stage, ug, ird2, irq2, sc.params), events


def simulate(scenario: Scenario) -> Trajectory:
    """Run the full staged model from the pre-fault operating point."""
    sc = scenario
    sep = sep_stage1(sc.params)
    uep = uep_stage1(sc.params)
    horizon = sc.auto_horizon()
    p = params_vector(sc.params)
    s = _scenario_vector(sc, sep, uep)
    y0 = np.array([sep.omega_r,
                   sep.i_rd - sc.params.kpw * sep.omega_r,
                   sep.i_rq - sc.params.kpV * sc.params.Ut_ref,
                   sep.x_pll,
                   sep.phi_pll])
    nmax = int(horizon / sc.sample_dt) + 8
    out, nsamp, trans, ntrans, status, t_end, ird2, irq2, ut_entry, yf = \
        K.simulate_core(p, s, y0, sc.dt, horizon, sc.sample_dt, nmax)
    if status == K.ST_CAPACITY:
        raise CapacityError(
            "reactive injection exceeds Imax at stage-2 entry "
            "(set allow_zero_i_rd2 to ride through with zero active current)")
    transitions = [Transition(int(trans[i, 1]), int(trans[i, 2]), trans[i, 0])
                   for i in range(ntrans)]
    return Trajectory(
        samples=out[:nsamp].copy(),
        transitions=transitions,
        status=status,
        t_end=t_end,
        scenario=sc,
        i_rd2_eff=ird2,
        i_rq2_eff=irq2,
        ut_at_entry=ut_entry,
        final_state=yf.copy(),
        horizon=horizon,
    )


def _final_stage_sep_phi(traj: Trajectory) -> float:
    """Reference angle the final stage should settle at."""
    sc = traj.scenario
    final_stage = int(traj.samples[-1, K.C_STAGE])
    if final_stage == 2:
        co = correction_coefficients(sc.params, traj.samples[-1, K.C_WR])
        eq = sep_uep_stage2or3(co, sc.Ug2, traj.i_rd2_eff, sc.params)
        return eq.phi_s if eq.exists else math.nan
    return sep_stage1(sc.params).phi_pll


def classify_outcome(traj: Trajectory, params: SystemParams | None = None) -> Outcome:
    """Stable / Unstable / Indeterminate verdict for a finished run.

    Stable: the last 0.5 s sits inside the (0.05 rad, 0.01) box around the
    final stage's stable operating point with no pole slip. A trajectory
    that settles a whole number of turns away re-synchronized at a shifted
    angle - a slipped pole - and counts Unstable, as do runaway angles and
    non-finite states. Anything still in transit at the horizon is
    Indeterminate, never silently Stable.
    """
    if traj.blew_up():
        return Outcome.UNSTABLE
    if traj.status == K.ST_ANGLE_ESCAPE:
        return Outcome.UNSTABLE
    phi_ref = _final_stage_sep_phi(traj)
    if math.isnan(phi_ref):
        # permanent fault with no during-fault equilibrium that somehow did
        # not trip the escape guard within the horizon
        return Outcome.INDETERMINATE
    t = traj.t
    window = t >= (t[-1] - CONV_WINDOW)
    phi_w = traj.phi_pll[window]
    x_w = traj.x_pll[window]
    k = round(float(np.mean(phi_w) - phi_ref) / (2.0 * math.pi))
    phi_target = phi_ref + 2.0 * math.pi * k
    converged = (np.all(np.abs(phi_w - phi_target) < CONV_PHI_TOL)
                 and np.all(np.abs(x_w - 1.0) < CONV_X_TOL))
    if not converged:
        return Outcome.INDETERMINATE
    return Outcome.STABLE if k == 0 else Outcome.UNSTABLE


def cct_sim(scenario: Scenario, bracket=(0.0, 1.5), tol: float = 1e-4):
    """Critical clearing time of the full staged model by bisection on t_c.

    Returns (cct, diagnostics). cct is math.inf when even the largest
    bracketed delay stays stable. Indeterminate verdicts count as unstable,
    keeping the estimate conservative.
    """
    lo, hi = bracket

    def stable(delay):
        run = simulate(scenario.with_clearing_delay(delay))
        return classify_outcome(run) is Outcome.STABLE

    n_evals = 0
    if not stable(lo):
        return math.nan, {"error": "unstable at the lower bracket", "evals": 1}
    n_evals += 1
    if stable(hi):
        return math.inf, {"always_stable_up_to": hi, "evals": 2}
    n_evals += 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        n_evals += 1
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), {"bracket": (lo, hi), "evals": n_evals}
