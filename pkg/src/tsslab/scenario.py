"""Fault scenarios for the staged simulator and the assessment methods."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

from .errors import CapacityError, ParameterError
from .params import SystemParams


class StageId(IntEnum):
    PRE_FAULT = 1
    DURING_FAULT = 2
    EARLY_POST_FAULT = 3
    LATE_POST_FAULT = 4


PERMANENT = math.inf


@dataclass(frozen=True)
class Scenario:
    """One LVRT event: fault depth, schedule, and during-fault injection.

    ``i_rq2`` None means the reactive injection follows the voltage-deficit
    rule at stage-2 entry; a float pins it explicitly. ``t_c`` may be
    ``PERMANENT`` (math.inf) for a never-cleared fault. ``horizon`` None
    auto-sizes from the clearing time and the recovery ramp.
    """

    params: SystemParams = field(default_factory=SystemParams)
    Ug2: float = 0.2
    t_f: float = 0.5
    t_c: float = 1.1
    i_rd2: float = 0.3
    i_rq2: float | None = None
    Kramp: float | None = None       # None: take params.Kramp
    dt: float = 5e-5
    sample_dt: float = 1e-3
    horizon: float | None = None
    freeze_rotor_during_fault: bool = False
    allow_zero_i_rd2: bool = False

    def __post_init__(self):
        if not (self.Ug2 >= 0.0 and math.isfinite(self.Ug2)):
            raise ParameterError(f"Ug2 must be finite and >= 0, got {self.Ug2!r}")
        if self.t_f < 0.0 or not math.isfinite(self.t_f):
            raise ParameterError(f"t_f must be finite and >= 0, got {self.t_f!r}")
        if self.t_c < self.t_f:
            raise ParameterError("t_c must not precede t_f")
        if self.i_rd2 < 0.0:
            raise ParameterError("i_rd2 must be >= 0")
        if self.dt <= 0.0 or self.sample_dt <= 0.0:
            raise ParameterError("dt and sample_dt must be positive")

    @property
    def permanent(self) -> bool:
        return math.isinf(self.t_c)

    @property
    def kramp(self) -> float:
        return self.params.Kramp if self.Kramp is None else self.Kramp

    @property
    def fault_duration(self) -> float:
        return self.t_c - self.t_f

    def with_clearing_delay(self, delay: float) -> "Scenario":
        return replace(self, t_c=self.t_f + delay)

    def auto_horizon(self) -> float:
        if self.horizon is not None:
            return self.horizon
        if self.permanent:
            return self.t_f + 6.0
        from .model_core import sep_stage1
        ird1s = sep_stage1(self.params).i_rd
        ramp = max(ird1s - self.i_rd2, 0.0) / self.kramp
        # the rotor's inertial recovery (~2H) outlives the PLL transient
        settle = 4.0 if self.freeze_rotor_during_fault else 4.0 + 2.0 * self.params.H
        return self.t_c + ramp + settle


def lvrt_currents(scenario: Scenario, ut_at_onset: float):
    """Injection setpoints from the terminal voltage seen at stage-2 entry.

    Reactive current grows with the voltage deficit below 0.9 (negative
    injection convention); the requested active current is clamped to the
    converter capacity circle.
    """
    if not (0.0 <= ut_at_onset <= 1.2):
        raise ParameterError(
            f"terminal voltage at onset out of range [0, 1.2]: {ut_at_onset!r}")
    p = scenario.params
    if scenario.i_rq2 is not None:
        i_rq2 = scenario.i_rq2
    else:
        from .model_core import sep_stage1
        i_rq1s = sep_stage1(p).i_rq
        i_rq2 = i_rq1s - p.Ke * (0.9 - ut_at_onset)
    cap = p.Imax ** 2 - i_rq2 ** 2
    if cap < 0.0:
        if not scenario.allow_zero_i_rd2:
            raise CapacityError(
                f"|i_rq2| = {abs(i_rq2):.4f} exceeds Imax = {p.Imax}; "
                "set allow_zero_i_rd2 to ride through with zero active current")
        return 0.0, math.copysign(p.Imax, i_rq2)
    i_rd2 = min(scenario.i_rd2, math.sqrt(cap))
    return max(i_rd2, 0.0), i_rq2
