"""System parameters and built-in presets.

All electrical quantities are per-unit on the machine base; time constants in
seconds; angles in radians.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

from .errors import ParameterError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Grid, machine, and controller constants of the grid-tied DFIG."""

    f0: float = 50.0              # Hz
    Xg: float = 0.5               # line reactance
    Xs: float = 4.071             # stator reactance (leakage + mutual)
    Xm: float = 3.9               # mutual reactance
    H: float = 4.0                # inertia constant, s
    Pin: float = 0.8              # mechanical input power
    Ug_nominal: float = 1.0       # pre-fault grid voltage
    Ut_ref: float = 1.0           # terminal-voltage reference
    omega_r_ref: float = 1.2      # rotor-speed reference
    kpw: float = 1.0              # rotor-speed-control PI gains
    kiw: float = 5.0
    kpV: float = 1.0              # terminal-voltage-control PI gains
    kiV: float = 10.0
    kppll: float = 60.0           # PLL PI gains
    kipll: float = 1400.0
    Ke: float = 1.5               # reactive-current ratio
    Imax: float = 1.1             # converter current limit
    Kramp: float = 0.8            # active-current ramp rate, p.u./s
    omega0: float = field(default=0.0)  # rad/s; 0 means "derive from f0"

    def __post_init__(self):
        if self.omega0 == 0.0:
            object.__setattr__(self, "omega0", TWO_PI * self.f0)
        self.validate()

    def validate(self):
        positive = ("f0", "Xg", "Xs", "Xm", "H", "Ug_nominal", "Ut_ref",
                    "omega_r_ref", "kpw", "kiw", "kpV", "kiV", "kppll",
                    "kipll", "Ke", "Imax", "Kramp", "omega0")
        for name in positive:
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0.0:
                raise ParameterError(f"{name} must be finite and positive, got {v!r}")
        if not math.isfinite(self.Pin) or self.Pin < 0.0:
            raise ParameterError(f"Pin must be finite and non-negative, got {self.Pin!r}")

    def replace(self, **changes) -> "SystemParams":
        if "omega0" not in changes and "f0" in changes:
            changes["omega0"] = 0.0  # re-derive
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Canonical parameter set shipped with the toolkit.
PAPER_APPENDIX = SystemParams()

_BUILTIN_PRESETS = {"paper-appendix": PAPER_APPENDIX}

PRESET_DIR_ENV = "TSSLAB_PRESET_DIR"


def preset(name: str) -> SystemParams:
    """Look up a named parameter preset.

    Built-in names are checked first; otherwise ``$TSSLAB_PRESET_DIR/<name>.conf``
    is loaded if the environment variable is set.
    """
    if name in _BUILTIN_PRESETS:
        return _BUILTIN_PRESETS[name]
    preset_dir = os.environ.get(PRESET_DIR_ENV)
    if preset_dir:
        path = os.path.join(preset_dir, name + ".conf")
        if os.path.exists(path):
            from .configio import load_config
            return load_config(path).params
    raise ParameterError(
        f"unknown preset {name!r}; built-ins: {sorted(_BUILTIN_PRESETS)}")
