"""Experiment configuration: validated scenario, array shape and frame bookkeeping.

Scenario files are flat TOML documents. ``validate`` collects every problem
in one pass so a user fixing a config sees all of them at once.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0

# default (bs_height_m, dl_tx_power_dbm) per tower type
BS_TYPE_DEFAULTS = {"HTBS": (150.0, 50.0), "Legacy": (25.0, 46.0)}

DEFAULT_NOISE_FIGURE_DB = 7.0
DEFAULT_TAU_C = 10_000
DEFAULT_TDD_UL_FRACTION = 0.25


class Duplex(str, enum.Enum):
    FDD = "FDD"
    TDD = "TDD"


class BSType(str, enum.Enum):
    LEGACY = "Legacy"
    HTBS = "HTBS"


@dataclass(frozen=True)
class Violation:
    kind: str  # UnknownKey | MissingKey | RangeViolation
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}[{self.key}]: {self.message}"


class ConfigError(ValueError):
    """Raised by :func:`validate` with the complete list of violations."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class ArrayConfig:
    m_horizontal: int
    m_vertical: int
    dual_polarized: bool = True
    element_spacing_wavelengths: float = 0.5

    @property
    def num_ports(self) -> int:
        return self.m_horizontal * self.m_vertical * (2 if self.dual_polarized else 1)


@dataclass(frozen=True)
class FrameStructure:
    """Samples per coherence block and how they are split.

    ``tau_p`` is the uplink pilot length (one orthogonal pilot per user).
    """

    tau_c: int
    tau_p: int
    ul_fraction: float = 1.0

    def __post_init__(self):
        if not 0 < self.tau_p < self.tau_c:
            raise ValueError(f"need 0 < tau_p < tau_c, got tau_p={self.tau_p}, tau_c={self.tau_c}")
        if not 0.0 < self.ul_fraction <= 1.0:
            raise ValueError(f"ul_fraction must lie in (0, 1], got {self.ul_fraction}")

    @property
    def ul_share(self) -> float:
        """Effective tau_u / tau_c after pilots and duplex split."""
        return self.ul_fraction * (self.tau_c - self.tau_p) / self.tau_c


@dataclass(frozen=True)
class Scenario:
    carrier_frequency_hz: float
    bandwidth_hz: float
    duplex: Duplex
    bs_height_m: float
    user_height_m: float
    bs_type: BSType
    num_users: int
    array: ArrayConfig
    eirp_max_dbm: float
    power_ratio_delta_db: float = 20.0
    cp_overhead: float = 0.05
    noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB
    coherence_block: FrameStructure = field(default=None)  # type: ignore[assignment]
    dl_tx_power_dbm: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.coherence_block is None:
            ul = 1.0 if self.duplex == Duplex.FDD else DEFAULT_TDD_UL_FRACTION
            object.__setattr__(
                self, "coherence_block", FrameStructure(DEFAULT_TAU_C, self.num_users, ul)
            )

    @property
    def num_ports(self) -> int:
        return self.array.num_ports

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz

    @property
    def los(self) -> bool:
        # tall towers get the LoS model, legacy masts the NLoS one
        return self.bs_type == BSType.HTBS

    def to_document(self) -> dict[str, Any]:
        """Inverse of :func:`validate`: the flat key-value form."""
        return {
            "carrier_frequency_mhz": self.carrier_frequency_hz / 1e6,
            "bandwidth_mhz": self.bandwidth_hz / 1e6,
            "duplex": self.duplex.value,
            "bs_height_m": self.bs_height_m,
            "user_height_m": self.user_height_m,
            "bs_type": self.bs_type.value,
            "num_users": self.num_users,
            "m_horizontal": self.array.m_horizontal,
            "m_vertical": self.array.m_vertical,
            "dual_polarized": self.array.dual_polarized,
            "eirp_max_dbm": self.eirp_max_dbm,
            "power_ratio_delta_db": self.power_ratio_delta_db,
            "cp_overhead_percent": self.cp_overhead * 100.0,
            "noise_figure_db": self.noise_figure_db,
            "tau_c": self.coherence_block.tau_c,
            "ul_fraction": self.coherence_block.ul_fraction,
            "dl_tx_power_dbm": self.dl_tx_power_dbm,
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def dbm_to_watt(x_dbm):
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watt_to_dbm(x_w):
    return 10.0 * np.log10(x_w) + 30.0


def noise_power(scenario: Scenario) -> float:
    """Receiver noise power sigma^2 in watts over the full bandwidth."""
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(scenario.bandwidth_hz) + scenario.noise_figure_db
    return dbm_to_watt(dbm)


# --- document validation -----------------------------------------------------

REQUIRED_KEYS = (
    "carrier_frequency_mhz",
    "bandwidth_mhz",
    "duplex",
    "bs_type",
    "num_users",
    "m_horizontal",
    "m_vertical",
    "eirp_max_dbm",
)
OPTIONAL_KEYS = (
    "bs_height_m",
    "user_height_m",
    "dual_polarized",
    "power_ratio_delta_db",
    "cp_overhead_percent",
    "noise_figure_db",
    "tau_c",
    "ul_fraction",
    "dl_tx_power_dbm",
    "seed",
)
ALL_KEYS = REQUIRED_KEYS + OPTIONAL_KEYS


def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def validate(raw: Mapping[str, Any]) -> Scenario:
    """Build a :class:`Scenario` from a flat document or raise :class:`ConfigError`."""
    errs: list[Violation] = []

    def bad(key, msg, kind="RangeViolation"):
        errs.append(Violation(kind, key, msg))

    for key in raw:
        if key not in ALL_KEYS:
            bad(key, "not a recognised scenario key", "UnknownKey")
    for key in REQUIRED_KEYS:
        if key not in raw:
            bad(key, "required key is absent", "MissingKey")

    def real(key, default=None, lo=None, hi=None, lo_open=True, hi_open=True):
        if key not in raw:
            return default
        v = raw[key]
        if not _is_real(v):
            bad(key, f"expected a finite number, got {v!r}")
            return None
        if lo is not None and (v <= lo if lo_open else v < lo):
            bad(key, f"{v} must be {'>' if lo_open else '>='} {lo}")
            return None
        if hi is not None and (v >= hi if hi_open else v > hi):
            bad(key, f"{v} must be {'<' if hi_open else '<='} {hi}")
            return None
        return float(v)

    def integer(key, default=None, lo=None, hi=None):
        if key not in raw:
            return default
        v = raw[key]
        if not _is_int(v):
            bad(key, f"expected an integer, got {v!r}")
            return None
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            bad(key, f"{v} outside [{lo}, {hi}]")
            return None
        return v

    def choice(key, enum_cls):
        if key not in raw:
            return None
        try:
            return enum_cls(raw[key])
        except ValueError:
            bad(key, f"{raw[key]!r} not one of {[e.value for e in enum_cls]}")
            return None

    fc = real("carrier_frequency_mhz", lo=0.0)
    bw = real("bandwidth_mhz", lo=0.0)
    duplex = choice("duplex", Duplex)
    bs_type = choice("bs_type", BSType)
    k = integer("num_users", lo=1)
    mh = integer("m_horizontal", lo=1)
    mv = integer("m_vertical", lo=1)
    eirp = real("eirp_max_dbm")
    default_h, default_dl = BS_TYPE_DEFAULTS.get(bs_type.value if bs_type else "", (None, None))
    h_bs = real("bs_height_m", default=default_h, lo=0.0)
    h_ut = real("user_height_m", default=8.0, lo=0.0)
    delta = real("power_ratio_delta_db", default=20.0, lo=0.0, lo_open=False)
    cp = real("cp_overhead_percent", default=5.0, lo=0.0, hi=100.0, lo_open=False)
    nf = real("noise_figure_db", default=DEFAULT_NOISE_FIGURE_DB, lo=0.0, lo_open=False)
    tau_c = integer("tau_c", default=DEFAULT_TAU_C, lo=1)
    dl_power = real("dl_tx_power_dbm", default=default_dl)
    seed = integer("seed", default=0, lo=0, hi=2**64 - 1)

    dual = raw.get("dual_polarized", True)
    if not isinstance(dual, bool):
        bad("dual_polarized", f"expected true/false, got {dual!r}")
        dual = None

    ul_fraction = None
    if duplex is Duplex.FDD:
        ul_fraction = real("ul_fraction", default=1.0)
        if ul_fraction is not None and ul_fraction != 1.0:
            bad("ul_fraction", "FDD uses the whole band for uplink; ul_fraction must be 1")
            ul_fraction = None
    elif duplex is Duplex.TDD:
        ul_fraction = real("ul_fraction", default=DEFAULT_TDD_UL_FRACTION, lo=0.0, hi=1.0)

    if None not in (k, mh, mv, dual):
        m = mh * mv * (2 if dual else 1)
        if k > m:
            bad("num_users", f"K={k} exceeds M={m} antenna ports (M/K must be >= 1)")
            k = None
    if k is not None and tau_c is not None and tau_c <= k:
        bad("tau_c", f"coherence block {tau_c} leaves no data samples after {k} pilots")
        tau_c = None

    if errs:
        raise ConfigError(errs)

    return Scenario(
        carrier_frequency_hz=fc * 1e6,
        bandwidth_hz=bw * 1e6,
        duplex=duplex,
        bs_height_m=h_bs,
        user_height_m=h_ut,
        bs_type=bs_type,
        num_users=k,
        array=ArrayConfig(mh, mv, dual),
        eirp_max_dbm=eirp,
        power_ratio_delta_db=delta,
        cp_overhead=cp / 100.0,
        noise_figure_db=nf,
        coherence_block=FrameStructure(tau_c, k, ul_fraction),
        dl_tx_power_dbm=dl_power,
        seed=seed,
    )


def load_document(path) -> dict[str, Any]:
    with open(Path(path), "rb") as fh:
        return tomllib.load(fh)


def load_scenario(path) -> Scenario:
    return validate(load_document(path))
