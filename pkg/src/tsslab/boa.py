"""Basin-of-attraction engine for the frozen post-fault swing system.

The post-fault saddle is hyperbolic; backward integration along its stable
directions traces the basin boundary of the stable operating point, and
forward simulation of the damped swing decides membership. The whole
analysis lives in the (phi_pll, x_pll) plane of the angle-driving subsystem,
where states are continuous across the clearing instant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NoEquilibriumError, ParameterError
from .model_core import sep_stage1
from .scenario import Scenario
from .swing import GseParams, GseState, gse_from_stage, pll_from_state, \
    state_from_pll

SEED_OFFSET = 1e-5
MEMBERSHIP_HORIZON = 5.0
CONV_RADIUS = 0.05
CONV_SPEED = 1.0
BOUNDARY_BAND = 1e-3


@dataclass(frozen=True)
class Saddle:
    """Eigenstructure of the swing Jacobian at the saddle (phi_u, 0).

    Directions are unit vectors in (phi, phi_dot) coordinates.
    """

    phi_u: float
    lambda_stable: float
    lambda_unstable: float
    v_stable: tuple[float, float]
    v_unstable: tuple[float, float]


def _jacobian_at(g: GseParams, phi: float):
    # d(phi)' = v ; d(v)' = (Pm - Pe sin phi - D cos phi v)/Meq, at v = 0
    j21 = -g.Pe_amp * math.cos(phi) / g.Meq
    j22 = -g.Deq_coeff * math.cos(phi) / g.Meq
    return j21, j22


def uep_eigenstructure(g: GseParams) -> Saddle:
    """Eigenvalues and directions at the post-fault saddle."""
    eq = g.equilibria()
    if not eq.exists:
        raise NoEquilibriumError("no saddle: equilibrium family lost")
    if eq.degenerate:
        raise NoEquilibriumError(
            "grazing equilibrium: the saddle eigenvalue is at zero")
    j21, j22 = _jacobian_at(g, eq.phi_u)
    disc = j22 * j22 + 4.0 * j21
    if disc <= 0.0 or j21 <= 0.0:
        raise NoEquilibriumError(
            "equilibrium is not a saddle (check the angle ordering)")
    root = math.sqrt(disc)
    lam_plus = 0.5 * (j22 + root)
    lam_minus = 0.5 * (j22 - root)

    def unit(lam):
        n = math.hypot(1.0, lam)
        return (1.0 / n, lam / n)

    return Saddle(eq.phi_u, lam_minus, lam_plus, unit(lam_minus), unit(lam_plus))


@dataclass
class BoaBoundary:
    """Stable-manifold polyline of the post-fault saddle in (phi_pll, x_pll).

    The two branches are concatenated so the polyline passes through the
    saddle in the middle; ``truncated`` flags branches cut by the state
    window rather than the arc-length budget.
    """

    points: np.ndarray          # (n, 2) columns phi_pll, x_pll
    g: GseParams
    sep: tuple[float, float]    # (phi, x) of the enclosed operating point
    uep: tuple[float, float]
    truncated: tuple[bool, bool]
    uep_index: int              # row of the saddle inside ``points``


def boundary_manifold(g: GseParams, arc_length_budget: float = 250.0,
                      window=None, dt: float = 5e-5,
                      max_points: int = 400_000,
                      sample_stride: int = 10) -> BoaBoundary:
    """Trace the saddle's stable manifold by backward integration.

    Two seeds offset +-SEED_OFFSET along the stable eigenvector produce the
    inside and outside branches; each stops at the window edge or when its
    arc length exceeds the budget.
    """
    saddle = uep_eigenstructure(g)
    eq = g.equilibria()
    if window is None:
        window = (eq.phi_u - 2.0 * math.pi - 2.0, eq.phi_u + 2.5, 120.0)
    phi_lo, phi_hi, v_lim = window
    branches = []
    truncated = []
    for sign in (-1.0, 1.0):
        phi0 = saddle.phi_u + sign * SEED_OFFSET * saddle.v_stable[0]
        v0 = sign * SEED_OFFSET * saddle.v_stable[1]
        pts, n, hit = K.swing_trace(
            phi0, v0, g.Pm, g.Pe_amp, g.Meq, g.Deq_coeff, dt, -1.0,
            phi_lo, phi_hi, v_lim, arc_length_budget, max_points,
            sample_stride)
        branches.append(pts)
        truncated.append(bool(hit))
    # order: inside branch reversed, saddle, outside branch
    inside = branches[0][::-1]
    outside = branches[1]
    uep_row = np.array([[saddle.phi_u, 0.0]])
    poly_sw = np.vstack([inside, uep_row, outside])
    x = 1.0 + (poly_sw[:, 1] - g.kppll * (g.Pm - g.Pe_amp * np.sin(poly_sw[:, 0]))) / g.omega0
    points = np.column_stack([poly_sw[:, 0], x])
    return BoaBoundary(
        points=points,
        g=g,
        sep=(eq.phi_s, 1.0),
        uep=(eq.phi_u, 1.0),
        truncated=(truncated[0], truncated[1]),
        uep_index=len(inside),
    )


@dataclass(frozen=True)
class MembershipResult:
    inside: bool | None          # None = indeterminate
    method: str                  # "forward-sim" or "manifold-side"
    convergence_time: float | None = None
    escape_angle: float | None = None
    well_index: int | None = None
    near_boundary: bool = False


def is_in_boa(point, g: GseParams, method: str = "forward-sim",
              boundary: BoaBoundary | None = None,
              horizon: float = MEMBERSHIP_HORIZON,
              dt: float = 5e-5) -> MembershipResult:
    """Basin membership of a (phi_pll, x_pll) point.

    Forward simulation is the ground truth: inside means the damped swing
    settles at the principal operating angle; settling a full turn away (a
    slipped pole) or passing the next saddle is outside. The manifold-side
    test classifies against the traced boundary polyline and is intended
    for cross-checks and plots.
    """
    phi_pll, x_pll = point
    eq = g.equilibria()
    if not eq.exists:
        raise NoEquilibriumError("membership undefined: no stable operating point")
    if method == "manifold-side":
        if boundary is None:
            boundary = boundary_manifold(g)
        return _manifold_side(point, boundary)
    if method != "forward-sim":
        raise ParameterError(f"unknown membership method {method!r}")
    s = state_from_pll(x_pll, phi_pll, g)
    code, k, t_dec, phi_f = K.swing_verdict(
        s.phi, s.phi_dot, g.Pm, g.Pe_amp, g.Meq, g.Deq_coeff,
        eq.phi_s, eq.phi_u + 2.0 * math.pi, dt, horizon,
        CONV_RADIUS, CONV_SPEED)
    if code == K.SW_CONVERGED:
        return MembershipResult(inside=(k == 0), method="forward-sim",
                                convergence_time=t_dec, well_index=k)
    if code == K.SW_ESCAPED:
        return MembershipResult(inside=False, method="forward-sim",
                                escape_angle=phi_f)
    return MembershipResult(inside=None, method="forward-sim",
                            near_boundary=True)


def distance_to_boundary(point, boundary: BoaBoundary) -> float:
    """Euclidean distance from a (phi, x) point to the boundary polyline."""
    return _nearest_segment(point, boundary.points)[0]


def _nearest_segment(point, pts):
    p = np.asarray(point, dtype=float)
    a = pts[:-1]
    b = pts[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = np.hypot(*(p - proj).T)
    i = int(np.argmin(d))
    return float(d[i]), i, t[i]


def _manifold_side(point, boundary: BoaBoundary) -> MembershipResult:
    """Side-of-curve membership: which side of the nearest boundary segment.

    Orientation is calibrated once per boundary with the operating point,
    which by construction lies inside.
    """
    pts = boundary.points
    d, i, _ = _nearest_segment(point, pts)
    side = _segment_side(pts, i, point)
    d_sep, i_sep, _ = _nearest_segment(boundary.sep, pts)
    inside_sign = _segment_side(pts, i_sep, boundary.sep)
    inside = bool(side * inside_sign > 0.0)
    return MembershipResult(inside=inside, method="manifold-side",
                            near_boundary=bool(d < BOUNDARY_BAND))


def _segment_side(pts, i, point):
    ax, ay = pts[i]
    bx, by = pts[i + 1]
    cross = (bx - ax) * (point[1] - ay) - (by - ay) * (point[0] - ax)
    if cross == 0.0:
        return 0.0
    return math.copysign(1.0, cross)


def stage3_entry_point(scenario: Scenario, delay: float,
                       g2: GseParams, dt: float = 5e-5):
    """(phi_pll, x_pll) the post-fault stage starts from after a given delay.

    The during-fault swing runs from the pre-fault operating point; the PLL
    pair carries over continuously at clearing.
    """
    params = scenario.params
    phi_s1 = sep_stage1(params).phi_pll
    s0 = state_from_pll(1.0, phi_s1, g2)
    phi, v = K.swing_state_at(s0.phi, s0.phi_dot, g2.Pm, g2.Pe_amp,
                              g2.Meq, g2.Deq_coeff, dt, delay)
    x, _ = pll_from_state(GseState(phi, v), g2)
    return phi, x


def cct_boa(scenario: Scenario, bracket=(0.0, 1.5), tol: float = 1e-4,
            horizon: float = MEMBERSHIP_HORIZON):
    """BOA-based critical clearing time, measured from the fault instant.

    Bisects the clearing delay on membership of the post-fault entry state
    in the basin of the recovered-voltage system frozen at the during-fault
    active current. Returns (cct, diagnostics); math.inf when the fault
    trajectory never leaves the basin within the bracket.
    """
    from .eac import lvrt_entry_effective

    sc = scenario
    params = sc.params
    ird2, irq2, _ = lvrt_entry_effective(sc)
    wr0 = params.omega_r_ref
    g2 = gse_from_stage(params, sc.Ug2, ird2, wr0)
    g3 = gse_from_stage(params, params.Ug_nominal, ird2, wr0)
    if not g3.equilibria().exists:
        raise NoEquilibriumError(
            "post-fault system has no stable point at the during-fault current")
    diag = {"i_rd2_eff": ird2, "i_rq2_eff": irq2}

    def inside(delay):
        pt = stage3_entry_point(sc, delay, g2, dt=sc.dt)
        r = is_in_boa(pt, g3, horizon=horizon, dt=sc.dt)
        return bool(r.inside)  # indeterminate counts as outside: conservative

    lo, hi = bracket
    if not inside(lo):
        return math.nan, {**diag, "error": "outside the basin at zero delay"}
    if inside(hi):
        return math.inf, {**diag, "always_stable_up_to": hi}
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), {**diag, "bracket": (lo, hi)}


def membership_grid(g: GseParams, phi_range, x_range, n_phi: int = 81,
                    n_x: int = 61, dt: float = 5e-5):
    """Grid of forward-sim memberships for basin plots: rows (phi, x, inside)."""
    phis = np.linspace(phi_range[0], phi_range[1], n_phi)
    xs = np.linspace(x_range[0], x_range[1], n_x)
    rows = np.empty((n_phi * n_x, 3))
    i = 0
    for phi in phis:
        for x in xs:
            r = is_in_boa((phi, x), g, dt=dt)
            rows[i, 0] = phi
            rows[i, 1] = x
            rows[i, 2] = 1.0 if r.inside else 0.0
            i += 1
    return rows
