"""Techno-economic arithmetic: traffic per subscriber, covered users, density."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping

BITS_PER_GB = 8e9  # decimal gigabyte
SECONDS_PER_HOUR = 3600.0


class NoFeasibleEirp(ValueError):
    pass


@dataclass(frozen=True)
class TrafficModel:
    ul_gb_per_month: float = 1.0
    dl_gb_per_month: float = 5.0
    busy_hours_per_day: float = 10.0
    days_per_month: int = 30

    def __post_init__(self):
        for name in ("ul_gb_per_month", "dl_gb_per_month", "busy_hours_per_day", "days_per_month"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def avg_user_rate(traffic: TrafficModel, link: str = "DL") -> float:
    """Busy-hour average rate of one subscriber in bit/s."""
    gb = traffic.dl_gb_per_month if link.upper() == "DL" else traffic.ul_gb_per_month
    return gb * BITS_PER_GB / (traffic.days_per_month * traffic.busy_hours_per_day * SECONDS_PER_HOUR)


def round_sig(x: float, digits: int) -> float:
    if x == 0:
        return 0.0
    return round(x, digits - 1 - math.floor(math.log10(abs(x))))


def covered_users(num_users: int, per_user_rate_bps: float, avg_dl_rate_bps: float) -> int:
    """Subscribers one cell can carry: floor(K * per-user rate / average demand)."""
    if num_users <= 0 or per_user_rate_bps <= 0 or avg_dl_rate_bps <= 0:
        raise ValueError("all inputs must be positive")
    # tiny relative slack so exact ratios like 1e9 / 1e9 * K do not floor to K - 1
    return int(math.floor(num_users * per_user_rate_bps / avg_dl_rate_bps * (1 + 1e-12)))


@dataclass(frozen=True)
class EconReport:
    num_users: int
    d_cov_km: float
    n_cov: int
    rho_cov: float  # persons / km^2
    a_cov: float  # km^2
    avg_ul_rate_bps: float
    avg_dl_rate_bps: float
    required_ul_capacity_bps: float
    min_eirp_dbm: float
    ul_capacity_at_min_eirp_bps: float
    activity_ratio: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def table_row(self) -> str:
        """Row in the K | d_cov | N_cov | rho_cov | EIRP | A_cov layout."""
        return (
            f"{self.num_users:>4d} | {self.d_cov_km:>6g} | {self.n_cov:>7,d} | {self.rho_cov:>7.3g} | "
            f"{self.min_eirp_dbm:>4g} | {self.a_cov:>7,.0f}"
        )


def econ_report(
    d_cov_km: float,
    num_users: int,
    target_dl_rate_bps: float,
    traffic: TrafficModel,
    ul_rate_table: Mapping[float, float],
    rate_sig_digits: int | None = 3,
) -> EconReport:
    """Covered users, density, area and the cheapest EIRP that carries their uplink.

    ``ul_rate_table`` maps EIRP [dBm] to the per-user uplink rate [bit/s]
    reached at that EIRP. Average subscriber rates are rounded to
    ``rate_sig_digits`` significant digits before use (7.41 / 37.0 kbps for
    the default traffic model); pass ``None`` to use them unrounded.
    """
    if not ul_rate_table:
        raise ValueError("empty UL rate table")
    ul_avg = avg_user_rate(traffic, "UL")
    dl_avg = avg_user_rate(traffic, "DL")
    if rate_sig_digits is not None:
        ul_avg, dl_avg = round_sig(ul_avg, rate_sig_digits), round_sig(dl_avg, rate_sig_digits)

    n_cov = covered_users(num_users, target_dl_rate_bps, dl_avg)
    area = math.pi * d_cov_km**2
    required = n_cov * ul_avg
    for eirp in sorted(ul_rate_table):
        capacity = num_users * ul_rate_table[eirp]
        if capacity >= required:
            break
    else:
        raise NoFeasibleEirp(f"no EIRP in the table carries {required / 1e6:.1f} Mbps of uplink")
    return EconReport(
        num_users=num_users,
        d_cov_km=d_cov_km,
        n_cov=n_cov,
        rho_cov=n_cov / area,
        a_cov=area,
        avg_ul_rate_bps=ul_avg,
        avg_dl_rate_bps=dl_avg,
        required_ul_capacity_bps=required,
        min_eirp_dbm=float(eirp),
        ul_capacity_at_min_eirp_bps=capacity,
        activity_ratio=num_users / n_cov,
    )
