"""Physical parameters of the levitated-nanosphere / coupled-cavity system.

Unit convention: every rate and frequency is an angular frequency in rad/s,
lengths are in metres, masses in kg, power in W and temperature in K.
Values quoted "in Hz" for this system are used verbatim as rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Union

from scipy import constants

from .errors import InvalidParam

HBAR = constants.hbar
K_B = constants.k
C_LIGHT = constants.c


@dataclass(frozen=True)
class Direct:
    """Fix cos(2 k1 x0) directly; x0 is taken on the branch with sin(2 k1 x0) >= 0."""

    cos2k1x0: float = 0.0


@dataclass(frozen=True)
class SelfConsistent:
    """Solve for x0 from the trap position x_trap (metres)."""

    x_trap: float


PositionMode = Union[Direct, SelfConsistent]


@dataclass(frozen=True)
class SystemParams:
    mass: float
    kappa1: float
    kappa2: float
    omega_trap: float
    shift_amplitude: float
    k1: float
    gamma_m: float
    delta_tilde1: float
    power: float
    mu: float = 0.0
    d: float = 0.0
    kappa_ex1_fraction: float = 0.5
    omega_laser: float | None = None
    temperature: float = 300.0
    position_mode: PositionMode = field(default_factory=Direct)

    hbar = HBAR
    k_B = K_B
    c = C_LIGHT

    @property
    def laser_frequency(self) -> float:
        """Cooling-laser angular frequency; defaults to c * k1."""
        if self.omega_laser is None:
            return C_LIGHT * self.k1
        return self.omega_laser

    @property
    def kappa_ex1(self) -> float:
        return self.kappa_ex1_fraction * self.kappa1

    @property
    def delta2(self) -> float:
        """Cavity-2 detuning, Delta_2 = Delta~_1 + d."""
        return self.delta_tilde1 + self.d

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DriveStrength:
    E: float


def reference_params(**overrides) -> SystemParams:
    """The reference parameter set used in the numerical examples.

    Trap position is chosen so that cos(2 k1 x0) = 0 (hence omega_m = omega_t);
    the cooling laser sits at the single-cavity red sideband unless overridden.
    """
    base = dict(
        mass=9.2e-18,
        kappa1=6e5,
        kappa2=1e3,
        omega_trap=2e6,
        shift_amplitude=1e5,
        k1=3e6,
        gamma_m=1e-3,
        power=5e-3,
        delta_tilde1=-2e6,
        position_mode=Direct(0.0),
    )
    base.update(overrides)
    return SystemParams(**base)


def validate(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged, or raise InvalidParam for the first violated invariant."""
    positive = ("mass", "kappa1", "omega_trap", "gamma_m", "temperature", "k1")
    non_negative = ("kappa2", "power", "mu")
    for name in positive:
        value = getattr(params, name)
        if not math.isfinite(value) or value <= 0:
            raise InvalidParam(name, f"must be a finite value > 0, got {value!r}")
    for name in non_negative:
        value = getattr(params, name)
        if not math.isfinite(value) or value < 0:
            raise InvalidParam(name, f"must be a finite value >= 0, got {value!r}")
    for name in ("shift_amplitude", "delta_tilde1", "d"):
        value = getattr(params, name)
        if not math.isfinite(value):
            raise InvalidParam(name, f"must be finite, got {value!r}")
    if not 0 < params.kappa_ex1_fraction <= 1:
        raise InvalidParam("kappa_ex1_fraction", f"must lie in (0, 1], got {params.kappa_ex1_fraction!r}")
    if params.omega_laser is not None and not (math.isfinite(params.omega_laser) and params.omega_laser > 0):
        raise InvalidParam("omega_laser", f"must be a finite value > 0, got {params.omega_laser!r}")
    mode = params.position_mode
    if isinstance(mode, Direct):
        if not (math.isfinite(mode.cos2k1x0) and abs(mode.cos2k1x0) <= 1):
            raise InvalidParam("cos2k1x0", f"must lie in [-1, 1], got {mode.cos2k1x0!r}")
    elif isinstance(mode, SelfConsistent):
        if not math.isfinite(mode.x_trap):
            raise InvalidParam("x_trap", f"must be finite, got {mode.x_trap!r}")
    else:
        raise InvalidParam("position_mode", f"unknown mode {mode!r}")
    return params


def drive_strength(params: SystemParams) -> DriveStrength:
    """E = sqrt(kappa_ex1 P / (hbar omega_L))."""
    return DriveStrength(math.sqrt(params.kappa_ex1 * params.power / (HBAR * params.laser_frequency)))


# --- plain-text config -------------------------------------------------------

#: field name -> config key (SI unit suffix).  CLI flags use the field name.
CONFIG_KEYS = {
    "mass": "mass_kg",
    "kappa1": "kappa1_rad_s",
    "kappa2": "kappa2_rad_s",
    "kappa_ex1_fraction": "kappa_ex1_fraction",
    "omega_trap": "omega_trap_rad_s",
    "shift_amplitude": "shift_amplitude_rad_s",
    "k1": "k1_per_m",
    "gamma_m": "gamma_m_rad_s",
    "mu": "mu_rad_s",
    "delta_tilde1": "delta_tilde1_rad_s",
    "d": "d_rad_s",
    "power": "power_w",
    "omega_laser": "omega_laser_rad_s",
    "temperature": "temperature_k",
    "cos2k1x0": "cos2k1x0",
    "x_trap": "x_trap_m",
}
KEY_TO_FIELD = {key: name for name, key in CONFIG_KEYS.items()}
REQUIRED_FIELDS = (
    "mass", "kappa1", "kappa2", "omega_trap", "shift_amplitude", "k1", "gamma_m", "delta_tilde1", "power",
)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, float]:
    """Parse ``key = value`` lines into {config_key: float}. ``#`` starts a comment."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEY_TO_FIELD:
            raise KeyError(key)
        try:
            values[key] = float(value)
        except ValueError:
            raise ValueError(f"{source}:{lineno}: value for {key!r} is not a number: {value!r}") from None
    return values


def load_config(path: str | Path) -> dict[str, float]:
    path = Path(path)
    return parse_config_text(path.read_text(), source=str(path))


def params_from_mapping(values: Mapping[str, float]) -> SystemParams:
    """Build SystemParams from {config_key: value}; missing required keys raise KeyError."""
    missing = [CONFIG_KEYS[name] for name in REQUIRED_FIELDS if CONFIG_KEYS[name] not in values]
    if missing:
        raise KeyError(", ".join(missing))
    kwargs = {}
    for key, value in values.items():
        name = KEY_TO_FIELD[key]
        if name not in ("cos2k1x0", "x_trap"):
            kwargs[name] = float(value)
    if "cos2k1x0" in values and "x_trap_m" in values:
        raise InvalidParam("position_mode", "give either cos2k1x0 or x_trap_m, not both")
    if "x_trap_m" in values:
        kwargs["position_mode"] = SelfConsistent(float(values["x_trap_m"]))
    else:
        kwargs["position_mode"] = Direct(float(values.get("cos2k1x0", 0.0)))
    return SystemParams(**kwargs)


def params_to_mapping(params: SystemParams) -> dict[str, float]:
    """Inverse of params_from_mapping, with every default resolved."""
    out = {}
    for name, key in CONFIG_KEYS.items():
        if name in ("cos2k1x0", "x_trap"):
            continue
        value = params.laser_frequency if name == "omega_laser" else getattr(params, name)
        out[key] = float(value)
    mode = params.position_mode
    if isinstance(mode, SelfConsistent):
        out["x_trap_m"] = mode.x_trap
    else:
        out["cos2k1x0"] = mode.cos2k1x0
    return out
