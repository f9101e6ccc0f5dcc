"""Rural-macro channel synthesis.

Large-scale loss follows the 3GPP TR 38.901 RMa path-loss and shadowing
model (Table 7.4.1-1):

    d_BP    = 2 pi h_BS h_UT f_c / c
    PL1(d)  = 20 log10(40 pi d f_GHz / 3) + min(0.03 h^1.72, 10) log10(d)
              - min(0.044 h^1.72, 14.77) + 0.002 log10(h) d
    PL2(d)  = PL1(d_BP) + 40 log10(d / d_BP)
    PL'_N   = 161.04 - 7.1 log10(W) + 7.5 log10(h)
              - (24.37 - 3.7 (h/h_BS)^2) log10(h_BS)
              + (43.42 - 3.1 log10(h_BS)) (log10(d) - 3)
              + 20 log10(f_GHz) - (3.2 (log10(11.75 h_UT))^2 - 4.97)
    PL_NLoS = max(PL_LoS, PL'_N)

with d the 3D distance, h the average building height and W the street
width. Shadowing is log-normal with sigma 4 / 6 dB (LoS before / after the
breakpoint) and 8 dB (NLoS). The standard stops at 10 km; beyond that the
same expressions are used unchanged and a warning is recorded.

Small-scale fading is a geometric multi-cluster model on the actual array
layout: a Rician LoS steering component plus ``n_clusters`` plane waves
scattered around the LoS azimuth.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .array import ElementLayout, build_layout, steering
from .scenario import Scenario

RMA_C = 3.0e8  # TR 38.901 uses this rounded value inside the formulas
RMA_MIN_DISTANCE_M = 10.0
RMA_MAX_DISTANCE_M = 10_000.0
EXTRAPOLATION_WARNING = "rma_extrapolated_beyond_10km"


class DistanceBelowValidity(ValueError):
    pass


@dataclass(frozen=True)
class ClusterModel:
    n_clusters: int = 10
    az_spread_los_deg: float = 12.0
    az_spread_nlos_deg: float = 25.0
    el_spread_deg: float | None = None  # None: distance-dependent RMa ZSD law
    power_decay_db: float = 1.0  # per cluster index
    k_factor_mean_db: float = 7.0
    k_factor_std_db: float = 4.0
    building_height_m: float = 5.0
    street_width_m: float = 20.0

    def cluster_powers(self) -> np.ndarray:
        p = 10.0 ** (-self.power_decay_db * np.arange(self.n_clusters) / 10.0)
        return p / p.sum()


DEFAULT_MODEL = ClusterModel()


@dataclass(frozen=True)
class UserDrop:
    distances_m: np.ndarray  # 2D ground distance per user
    azimuths_rad: np.ndarray
    user_height_m: float = 8.0

    @property
    def num_users(self) -> int:
        return len(self.distances_m)


@dataclass(frozen=True)
class LargeScale:
    path_loss_db: np.ndarray
    shadow_db: np.ndarray
    los: np.ndarray
    beta: np.ndarray  # linear gain 10^(-(PL + SF)/10)


@dataclass(frozen=True)
class ChannelMatrix:
    h: np.ndarray  # (M, K) complex
    large_scale: LargeScale
    wavelength_m: float
    carrier_frequency_hz: float = 0.0
    warnings: tuple = field(default=())

    @property
    def shape(self):
        return self.h.shape

    def dump(self, path) -> None:
        """Binary dump: <uint32 M, uint32 K, float64 f_c> then row-major complex64."""
        m, k = self.h.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<IId", m, k, self.carrier_frequency_hz))
            fh.write(np.ascontiguousarray(self.h, dtype="<c8").tobytes())


def load_dump(path):
    """Read a :meth:`ChannelMatrix.dump` file back as (H, f_c)."""
    with open(path, "rb") as fh:
        m, k, fc = struct.unpack("<IId", fh.read(16))
        h = np.frombuffer(fh.read(), dtype="<c8").reshape(m, k)
    return h, fc


def breakpoint_distance(h_bs: float, h_ut: float, fc_hz: float) -> float:
    return 2 * np.pi * h_bs * h_ut * fc_hz / RMA_C


def _distance_3d(d2d, h_bs, h_ut):
    return np.sqrt(d2d**2 + (h_bs - h_ut) ** 2)


def _pl1(d3d, f_ghz, h):
    return (
        20 * np.log10(40 * np.pi * d3d * f_ghz / 3)
        + min(0.03 * h**1.72, 10.0) * np.log10(d3d)
        - min(0.044 * h**1.72, 14.77)
        + 0.002 * np.log10(h) * d3d
    )


def _pl_los(d3d, d_bp, f_ghz, h):
    # switching on the 3D distance keeps the two slopes continuous at d_BP
    return np.where(
        d3d <= d_bp,
        _pl1(d3d, f_ghz, h),
        _pl1(d_bp, f_ghz, h) + 40 * np.log10(np.maximum(d3d, d_bp) / d_bp),
    )


def _pl_nlos_prime(d3d, f_ghz, h, w, h_bs, h_ut):
    return (
        161.04
        - 7.1 * np.log10(w)
        + 7.5 * np.log10(h)
        - (24.37 - 3.7 * (h / h_bs) ** 2) * np.log10(h_bs)
        + (43.42 - 3.1 * np.log10(h_bs)) * (np.log10(d3d) - 3)
        + 20 * np.log10(f_ghz)
        - (3.2 * np.log10(11.75 * h_ut) ** 2 - 4.97)
    )


def path_loss(scenario: Scenario, distance_2d_m, los: bool, model: ClusterModel = DEFAULT_MODEL):
    """RMa path loss in dB for one or many ground distances."""
    d2d = np.asarray(distance_2d_m, dtype=float)
    if np.any(d2d < RMA_MIN_DISTANCE_M):
        raise DistanceBelowValidity(
            f"RMa model needs d >= {RMA_MIN_DISTANCE_M} m, got {float(np.min(d2d)):.3f} m"
        )
    h_bs, h_ut = scenario.bs_height_m, scenario.user_height_m
    f_ghz = scenario.carrier_frequency_hz / 1e9
    h = model.building_height_m
    d3d = _distance_3d(d2d, h_bs, h_ut)
    d_bp = breakpoint_distance(h_bs, h_ut, scenario.carrier_frequency_hz)
    pl = _pl_los(d3d, d_bp, f_ghz, h)
    if not los:
        pl = np.maximum(pl, _pl_nlos_prime(d3d, f_ghz, h, model.street_width_m, h_bs, h_ut))
    return pl if pl.ndim else float(pl)


def shadow_sigma_db(los, before_breakpoint):
    los = np.asarray(los, dtype=bool)
    return np.where(los, np.where(before_breakpoint, 4.0, 6.0), 8.0)


def shadow_sample(rng: np.random.Generator, los: bool, before_breakpoint: bool, size=None):
    """Zero-mean Gaussian shadowing in dB."""
    return shadow_sigma_db(los, before_breakpoint) * rng.standard_normal(size)


def rma_zsd_deg(distance_2d_m, user_height_m: float, los: bool) -> np.ndarray:
    """BS-side rms zenith spread of the RMa model (TR 38.901 Table 7.5-6)."""
    d_km = np.asarray(distance_2d_m, dtype=float) / 1e3
    if los:
        lg = -0.17 * d_km - 0.01 * (user_height_m - 1.5) + 0.22
    else:
        lg = -0.19 * d_km - 0.01 * (user_height_m - 1.5) + 0.28
    return 10.0 ** np.maximum(-1.0, lg)


def _small_scale_batch(
    rng: np.random.Generator,
    layout: ElementLayout,
    azimuth: np.ndarray,
    elevation: np.ndarray,
    los: bool,
    kappa: np.ndarray,
    wavelength_m: float,
    model: ClusterModel,
    el_spread_deg=None,
) -> np.ndarray:
    """Unit-average-energy fading vectors for a batch of users, shape (M, K).

    Draws a fixed number of variates per user regardless of ``los`` so that
    runs differing only in geometry see the same random stream.
    """
    k = len(azimuth)
    n = model.n_clusters
    los_phase = rng.uniform(0, 2 * np.pi, k)
    pol_phase = rng.uniform(0, 2 * np.pi, k)
    az_z = rng.standard_normal((k, n))
    el_z = rng.standard_normal((k, n))
    psi = rng.uniform(0, np.pi, (k, n))
    g = (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))) / np.sqrt(2)

    spread = np.deg2rad(model.az_spread_los_deg if los else model.az_spread_nlos_deg)
    c_az = np.angle(np.exp(1j * (azimuth[:, None] + spread * az_z)))
    if el_spread_deg is None:
        el_spread_deg = 3.0 if model.el_spread_deg is None else model.el_spread_deg
    el_spread = np.deg2rad(np.broadcast_to(np.asarray(el_spread_deg, dtype=float), (k,)))
    c_el = np.clip(elevation[:, None] + el_spread[:, None] * el_z, -np.pi / 2, np.pi / 2)

    if layout.dual_polarized:
        a = np.sqrt(2.0) * steering(layout, c_az, c_el, wavelength_m, psi=psi)
    else:
        a = steering(layout, c_az, c_el, wavelength_m)
    weights = np.sqrt(model.cluster_powers())[None, :] * g  # (K, N)
    diffuse = np.einsum("kn,knm->km", weights, a)

    if not los:
        return diffuse.T

    a_los = steering(layout, azimuth, elevation, wavelength_m) * np.exp(1j * los_phase)[:, None]
    if layout.dual_polarized:
        a_los = np.where(layout.minus45_mask[None, :], a_los * np.exp(1j * pol_phase)[:, None], a_los)
    kappa = np.asarray(kappa, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        w_los = np.where(np.isinf(kappa), 1.0, np.sqrt(kappa / (1 + kappa)))
        w_dif = np.where(np.isinf(kappa), 0.0, np.sqrt(1 / (1 + kappa)))
    return (w_los[:, None] * a_los + w_dif[:, None] * diffuse).T


def small_scale(
    rng: np.random.Generator,
    layout: ElementLayout,
    azimuth: float,
    elevation: float,
    los: bool,
    wavelength_m: float,
    kappa: float = 0.0,
    model: ClusterModel = DEFAULT_MODEL,
) -> np.ndarray:
    """Fading vector of one user: Rician (LoS) or pure cluster sum (NLoS).

    ``kappa`` is the linear Rician K-factor; ``np.inf`` returns the bare
    steering vector up to a common phase.
    """
    out = _small_scale_batch(
        rng, layout, np.array([azimuth]), np.array([elevation]), los, np.array([kappa]), wavelength_m, model
    )
    return out[:, 0]


def user_elevation(drop: UserDrop, bs_height_m: float) -> np.ndarray:
    """Elevation of each user as seen from the array (negative: below horizon)."""
    return -np.arctan2(bs_height_m - drop.user_height_m, drop.distances_m)


def large_scale(
    rng: np.random.Generator, scenario: Scenario, drop: UserDrop, model=DEFAULT_MODEL, shadowing=True
) -> LargeScale:
    los = scenario.los
    pl = np.atleast_1d(path_loss(scenario, drop.distances_m, los, model))
    d3d = _distance_3d(drop.distances_m, scenario.bs_height_m, drop.user_height_m)
    before = d3d <= breakpoint_distance(scenario.bs_height_m, drop.user_height_m, scenario.carrier_frequency_hz)
    z = rng.standard_normal(drop.num_users)
    sf = shadow_sigma_db(los, before) * z if shadowing else np.zeros(drop.num_users)
    beta = 10.0 ** (-(pl + sf) / 10.0)
    return LargeScale(pl, sf, np.full(drop.num_users, los), beta)


def generate(
    rng: np.random.Generator,
    scenario: Scenario,
    drop: UserDrop,
    layout: ElementLayout | None = None,
    model: ClusterModel = DEFAULT_MODEL,
    shadowing: bool = True,
) -> ChannelMatrix:
    """Assemble H = [h_1 ... h_K] with h_k = sqrt(beta_k) * fading_k."""
    lam = scenario.wavelength_m
    if layout is None:
        layout = build_layout(scenario.array, lam)
    m, k = layout.num_ports, drop.num_users
    warnings = []
    if k and np.max(drop.distances_m) > RMA_MAX_DISTANCE_M:
        warnings.append(EXTRAPOLATION_WARNING)
    ls = large_scale(rng, scenario, drop, model, shadowing)
    if k == 0:
        return ChannelMatrix(np.zeros((m, 0), complex), ls, lam, scenario.carrier_frequency_hz, tuple(warnings))

    kappa_db = model.k_factor_mean_db + model.k_factor_std_db * rng.standard_normal(k)
    fading = _small_scale_batch(
        rng,
        layout,
        np.asarray(drop.azimuths_rad, dtype=float),
        user_elevation(drop, scenario.bs_height_m),
        scenario.los,
        10.0 ** (kappa_db / 10.0),
        lam,
        model,
        el_spread_deg=(
            rma_zsd_deg(drop.distances_m, drop.user_height_m, scenario.los)
            if model.el_spread_deg is None
            else model.el_spread_deg
        ),
    )
    h = fading * np.sqrt(ls.beta)[None, :]
    return ChannelMatrix(h, ls, lam, scenario.carrier_frequency_hz, tuple(warnings))
