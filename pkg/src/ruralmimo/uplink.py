"""Uplink power control, linear receive combining and per-user rates."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .scenario import Scenario


class DegenerateGains(ValueError):
    pass


class SingularSystem(np.linalg.LinAlgError):
    pass


class RankDeficient(np.linalg.LinAlgError):
    pass


class Scheme(str, enum.Enum):
    RZF = "RZF"
    ZF = "ZF"
    MR = "MR"


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray  # watts per user
    eirp_max_w: float
    delta_linear: float


@dataclass(frozen=True)
class Combiner:
    v: np.ndarray  # (M, K)
    scheme: Scheme


@dataclass(frozen=True)
class RateReport:
    sinr: np.ndarray
    se_bits_per_hz: np.ndarray
    rate_bps: np.ndarray
    share: float  # tau_u / tau_c (or the DL counterpart)
    cp_overhead: float


def _as_matrix(h) -> np.ndarray:
    return np.asarray(getattr(h, "h", h))


def _gains(large_scale) -> np.ndarray:
    return np.asarray(getattr(large_scale, "beta", large_scale), dtype=float)


def power_control(large_scale, eirp_max_w: float, delta_db: float) -> PowerAllocation:
    """Cap the received-power spread at ``delta_db``.

    The weakest user always transmits at the cap; stronger users back off
    so that nobody arrives more than ``delta`` above the weakest.
    """
    beta = _gains(large_scale)
    if beta.size and (not np.all(np.isfinite(beta)) or np.any(beta <= 0)):
        raise DegenerateGains("channel gains must be finite and strictly positive")
    delta = 10.0 ** (delta_db / 10.0)
    if beta.size == 0:
        return PowerAllocation(np.zeros(0), eirp_max_w, delta)
    p = np.minimum(eirp_max_w, eirp_max_w * delta * beta.min() / beta)
    return PowerAllocation(p, eirp_max_w, delta)


def _powers(P) -> np.ndarray:
    return np.asarray(getattr(P, "p", P), dtype=float)


def rzf_combiner(H, P, sigma2: float) -> Combiner:
    """V = H (H^H H + sigma2 P^-1)^-1 via a Cholesky solve of the Gram system.

    The system is solved in power-weighted form, (D H^H H D + sigma2 I) with
    D = P^(1/2), which has the same solution after rescaling but stays well
    conditioned when path gains span many decades.
    """
    h = _as_matrix(H)
    p = _powers(P)
    if np.any(p <= 0):
        raise SingularSystem("RZF needs strictly positive powers")
    d = np.sqrt(p)
    hd = h * d[None, :]
    gram = hd.conj().T @ hd
    gram[np.diag_indices_from(gram)] += sigma2
    if not np.all(np.isfinite(gram)):
        raise SingularSystem("non-finite Gram matrix")
    try:
        c = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    # (H^H H + s P^-1)^-1 = D (D H^H H D + s I)^-1 D, and the matrix is Hermitian
    x = scipy.linalg.cho_solve(c, hd.conj().T, check_finite=False)  # (K, M)
    v = (d[:, None] * x).conj().T
    return Combiner(v, Scheme.RZF)


def zf_combiner(H) -> Combiner:
    h = _as_matrix(H)
    k = h.shape[1]
    if np.linalg.matrix_rank(h) < k:
        raise RankDeficient(f"ZF needs rank(H) = K = {k}")
    gram = h.conj().T @ h
    v = np.linalg.solve(gram, h.conj().T).conj().T
    return Combiner(v, Scheme.ZF)


def mr_combiner(H) -> Combiner:
    return Combiner(_as_matrix(H).copy(), Scheme.MR)


def sinr(H, V, P, sigma2: float) -> np.ndarray:
    """Per-user uplink SINR of combiner columns v_k.

    SINR_k = p_k |v_k^H h_k|^2 / (sum_{i != k} p_i |v_k^H h_i|^2 + sigma2 ||v_k||^2)
    """
    h = _as_matrix(H)
    v = np.asarray(getattr(V, "v", V))
    p = _powers(P)
    g = np.abs(v.conj().T @ h) ** 2 * p[None, :]  # g[k, i] = p_i |v_k^H h_i|^2
    signal = np.diag(g).copy()
    np.fill_diagonal(g, 0.0)
    interference = g.sum(axis=1)
    noise = sigma2 * np.sum(np.abs(v) ** 2, axis=0)
    return signal / (interference + noise)


def ul_share(scenario: Scenario) -> float:
    """tau_u / tau_c with K pilot samples per coherence block."""
    frame = scenario.coherence_block
    return frame.ul_fraction * (frame.tau_c - scenario.num_users) / frame.tau_c


def rate(sinr_values, scenario: Scenario, share: float | None = None) -> RateReport:
    """SE = share * log2(1 + SINR); rate = W * SE * (1 - CP overhead)."""
    s = np.asarray(sinr_values, dtype=float)
    if share is None:
        share = ul_share(scenario)
    se = share * np.log2(1.0 + s)
    r = scenario.bandwidth_hz * se * (1.0 - scenario.cp_overhead)
    return RateReport(s, se, r, share, scenario.cp_overhead)
