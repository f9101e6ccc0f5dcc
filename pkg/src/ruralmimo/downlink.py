"""Downlink RZF precoding with an equal power split, for coverage searches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Duplex, Scenario, noise_power
from .uplink import RateReport, _as_matrix, rate, rzf_combiner


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Precoder:
    w: np.ndarray  # (M, K) unit-norm columns
    power: np.ndarray  # watts per user

    @property
    def total_power(self) -> float:
        return float(self.power.sum())


def dl_precoder(H, sigma2: float, total_power: float) -> Precoder:
    """Normalised RZF directions, total_power / K to every user."""
    h = _as_matrix(H)
    k = h.shape[1]
    if k < 1:
        raise ValueError("need at least one user")
    q = np.full(k, total_power / k)
    v = rzf_combiner(h, q, sigma2).v
    w = v / np.linalg.norm(v, axis=0, keepdims=True)
    return Precoder(w, q)


def dl_sinr(H, precoder: Precoder, sigma2: float) -> np.ndarray:
    h = _as_matrix(H)
    g = np.abs(h.conj().T @ precoder.w) ** 2 * precoder.power[None, :]  # g[k, i] = q_i |h_k^H w_i|^2
    signal = np.diag(g).copy()
    np.fill_diagonal(g, 0.0)
    return signal / (g.sum(axis=1) + sigma2)


def dl_share(scenario: Scenario) -> float:
    """Fraction of samples carrying downlink data.

    FDD spends M pilot samples per block (one per antenna port); TDD gets the
    non-uplink share of the block after the K uplink pilots.
    """
    tau_c = scenario.coherence_block.tau_c
    if scenario.duplex == Duplex.FDD:
        m = scenario.num_ports
        if tau_c <= m:
            raise ConfigError(f"FDD downlink needs tau_c > M, got tau_c={tau_c}, M={m}")
        return (tau_c - m) / tau_c
    ul = scenario.coherence_block.ul_fraction
    return (1.0 - ul) * (tau_c - scenario.num_users) / tau_c


def dl_rate(H, precoder: Precoder, scenario: Scenario, sigma2: float | None = None) -> RateReport:
    share = dl_share(scenario)
    if sigma2 is None:
        sigma2 = noise_power(scenario)
    return rate(dl_sinr(H, precoder, sigma2), scenario, share=share)
