"""Transient synchronization stability toolkit for grid-tied DFIG ride-through.

Simulates the four-stage low-voltage ride-through sequence with a
reduced-order mechanism model, reduces the frozen stages to a second-order
swing equation, and assesses critical clearing times by equal-area and
basin-of-attraction methods alongside full-model bisection.
"""

__version__ = "0.1.0"

from .params import SystemParams, PAPER_APPENDIX, preset
from .scenario import Scenario, StageId, PERMANENT, lvrt_currents
from .model_core import (
    CoeffSet,
    AlgebraicOutputs,
    EquilibriumPoint,
    FrozenStageEquilibria,
    correction_coefficients,
    terminal_voltage_dq,
    solve_algebraic,
    sep_stage1,
    uep_stage1,
    sep_uep_stage2or3,
)
from .swing import (
    GseParams,
    GseState,
    gse_from_stage,
    gse_derivatives,
    gse_vs_dae_residual,
    state_from_pll,
    pll_from_state,
)
from .sim import (
    FullState,
    Trajectory,
    Transition,
    Outcome,
    derivatives,
    step,
    simulate,
    classify_outcome,
    cct_sim,
)
from .eac import (
    EacAreas,
    CctReport,
    CriticalAngle,
    areas_permanent_fault,
    permanent_fault_stable,
    critical_clearing_angle,
    critical_clearing_angle_quadrature,
    cct_eac,
)
from .boa import (
    Saddle,
    BoaBoundary,
    MembershipResult,
    uep_eigenstructure,
    boundary_manifold,
    is_in_boa,
    cct_boa,
)
from .errors import (
    TsslabError,
    ParameterError,
    NoEquilibriumError,
    AlgebraicSolveError,
    CapacityError,
    ConfigError,
)
