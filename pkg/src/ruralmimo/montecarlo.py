"""Monte Carlo engine: user drops, percentile rates, coverage search, sweeps.

Every drop ``i`` draws from its own generator seeded with
``(master_seed, i)``. Because the stream does not depend on the disk radius
or on which worker runs the drop, all candidate radii of a coverage search
see the same fading (common random numbers) and results do not change with
the thread count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import channel, downlink, uplink
from .array import build_layout
from .scenario import Scenario, dbm_to_watt, noise_power, validate

THREADS_ENV = "RURALMIMO_THREADS"
MAX_SEARCH_RADIUS_M = 100_000.0


class EmptyPool(ValueError):
    pass


class TargetUnreachable(RuntimeError):
    pass


class NoUpperBracket(RuntimeError):
    """Target still met at the largest search radius.

    Coverage searches do not raise it; they return a saturated result whose
    warnings carry this name. Callers that need a hard failure can raise it
    from ``CoverageResult.saturated``.
    """


@dataclass(frozen=True)
class DropEnsemble:
    num_drops: int = 200
    disk_radius_m: float = 1000.0
    min_radius_m: float = 35.0
    master_seed: int = 0

    def __post_init__(self):
        if self.num_drops < 1:
            raise ValueError("num_drops must be >= 1")
        if self.disk_radius_m <= self.min_radius_m:
            raise ValueError("disk radius must exceed the minimum radius")


@dataclass(frozen=True)
class RateSummary:
    p5: float
    p50: float
    p95: float
    mean: float
    num_samples: int
    warnings: tuple = ()


@dataclass(frozen=True)
class CoverageResult:
    d_cov_m: float
    target_rate_bps: float
    percentile: float
    iterations: int
    converged: bool
    # bracketing certificate: rate(d_cov) >= target > rate(upper_m)
    rate_at_d_cov: float
    upper_m: float
    rate_at_upper: float
    saturated: bool = False
    link: str = "DL"
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "d_cov_m": self.d_cov_m,
            "d_cov_km": self.d_cov_m / 1e3,
            "target_rate_bps": self.target_rate_bps,
            "percentile": self.percentile,
            "link": self.link,
            "iterations": self.iterations,
            "converged": self.converged,
            "saturated": self.saturated,
            "certificate": {
                "lower_m": self.d_cov_m,
                "rate_at_lower_bps": self.rate_at_d_cov,
                "upper_m": self.upper_m,
                "rate_at_upper_bps": self.rate_at_upper,
            },
            "warnings": list(self.warnings),
        }


def worker_count() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def drop_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def drop(rng: np.random.Generator, ensemble: DropEnsemble, num_users: int, user_height_m: float = 8.0):
    """K users uniform over the annulus [min_radius, disk_radius] by area."""
    r_min, r_max = ensemble.min_radius_m, ensemble.disk_radius_m
    u = rng.random(num_users)
    az = rng.uniform(-np.pi, np.pi, num_users)
    r = np.sqrt(u * (r_max**2 - r_min**2) + r_min**2)
    return channel.UserDrop(r, az, user_height_m)


def percentile_rate(rates, percentile: float = 5.0) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest value."""
    x = np.sort(np.asarray(rates, dtype=float).ravel())
    if x.size == 0:
        raise EmptyPool("no rates to summarise")
    rank = max(1, math.ceil(percentile / 100.0 * x.size))
    return float(x[min(rank, x.size) - 1])


def summarize(rates, warnings=()) -> RateSummary:
    x = np.asarray(rates, dtype=float).ravel()
    return RateSummary(
        percentile_rate(x, 5),
        percentile_rate(x, 50),
        percentile_rate(x, 95),
        float(x.mean()),
        int(x.size),
        tuple(sorted(set(warnings))),
    )


def _run_drops(fn: Callable[[int], tuple], num_drops: int, workers: int | None):
    workers = workers or worker_count()
    if workers <= 1:
        return [fn(i) for i in range(num_drops)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(num_drops)))  # map keeps index order


def _ul_drop_rates(scenario, ensemble, layout, sigma2, eirps_w, index):
    rng = drop_rng(ensemble.master_seed, index)
    users = drop(rng, ensemble, scenario.num_users, scenario.user_height_m)
    ch = channel.generate(rng, scenario, users, layout)
    share = uplink.ul_share(scenario)
    out = []
    for pmax in eirps_w:
        power = uplink.power_control(ch.large_scale, pmax, scenario.power_ratio_delta_db)
        v = uplink.rzf_combiner(ch, power, sigma2)
        out.append(uplink.rate(uplink.sinr(ch, v, power, sigma2), scenario, share).rate_bps)
    return out, ch.warnings


def ul_rate_experiment_multi(
    scenario: Scenario,
    ensemble: DropEnsemble,
    eirps_dbm: Sequence[float],
    d_eval_m: float | None = None,
    workers: int | None = None,
) -> list[RateSummary]:
    """Uplink rate summaries for several EIRP caps on shared channel draws."""
    if d_eval_m is not None:
        ensemble = replace(ensemble, disk_radius_m=d_eval_m)
    layout = build_layout(scenario.array, scenario.wavelength_m)
    sigma2 = noise_power(scenario)
    eirps_w = [dbm_to_watt(e) for e in eirps_dbm]

    def one(i):
        return _ul_drop_rates(scenario, ensemble, layout, sigma2, eirps_w, i)

    results = _run_drops(one, ensemble.num_drops, workers)
    warnings = [w for _, ws in results for w in ws]
    return [
        summarize(np.concatenate([r[j] for r, _ in results]), warnings) for j in range(len(eirps_w))
    ]


def ul_rate_experiment(
    scenario: Scenario, ensemble: DropEnsemble, d_eval_m: float | None = None, workers: int | None = None
) -> RateSummary:
    """Pooled uplink rate statistics at the scenario's EIRP cap."""
    return ul_rate_experiment_multi(scenario, ensemble, [scenario.eirp_max_dbm], d_eval_m, workers)[0]


def _dl_drop_rates(scenario, ensemble, layout, sigma2, total_w, index):
    rng = drop_rng(ensemble.master_seed, index)
    users = drop(rng, ensemble, scenario.num_users, scenario.user_height_m)
    ch = channel.generate(rng, scenario, users, layout)
    pre = downlink.dl_precoder(ch, sigma2, total_w)
    return downlink.dl_rate(ch, pre, scenario, sigma2).rate_bps, ch.warnings


def pooled_rates(
    scenario: Scenario, ensemble: DropEnsemble, link: str = "UL", workers: int | None = None
) -> tuple[np.ndarray, tuple]:
    """All per-user rates across drops for one link, plus channel warnings."""
    layout = build_layout(scenario.array, scenario.wavelength_m)
    sigma2 = noise_power(scenario)
    if link.upper() == "DL":
        downlink.dl_share(scenario)  # fail fast on an infeasible FDD frame
        total = dbm_to_watt(scenario.dl_tx_power_dbm)
        fn = lambda i: _dl_drop_rates(scenario, ensemble, layout, sigma2, total, i)  # noqa: E731
    else:
        pmax = [dbm_to_watt(scenario.eirp_max_dbm)]

        def fn(i):
            r, w = _ul_drop_rates(scenario, ensemble, layout, sigma2, pmax, i)
            return r[0], w

    results = _run_drops(fn, ensemble.num_drops, workers)
    rates = np.concatenate([r for r, _ in results])
    return rates, tuple(sorted({w for _, ws in results for w in ws}))


def bisect_coverage(
    rate_at: Callable[[float], float],
    target: float,
    lo_m: float,
    hi_m: float,
    rel_tol: float = 0.02,
    max_iter: int = 100,
) -> CoverageResult:
    """Largest radius whose percentile rate still meets ``target``.

    ``rate_at`` maps a radius to a percentile rate and is assumed
    nonincreasing. Bisection is geometric because brackets span decades.
    """
    r_lo = rate_at(lo_m)
    if r_lo < target:
        raise TargetUnreachable(
            f"percentile rate {r_lo:.4g} bps at {lo_m:.4g} m already below target {target:.4g} bps"
        )
    r_hi = rate_at(hi_m)
    if r_hi >= target:
        return CoverageResult(hi_m, target, float("nan"), 0, False, r_hi, hi_m, r_hi, saturated=True,
                              warnings=("NoUpperBracket: target met at the maximum search radius",))
    it = 0
    while hi_m / lo_m - 1.0 >= rel_tol and it < max_iter:
        mid = math.sqrt(lo_m * hi_m)
        r_mid = rate_at(mid)
        if r_mid >= target:
            lo_m, r_lo = mid, r_mid
        else:
            hi_m, r_hi = mid, r_mid
        it += 1
    return CoverageResult(lo_m, target, float("nan"), it, hi_m / lo_m - 1.0 < rel_tol, r_lo, hi_m, r_hi)


def coverage_search(
    scenario: Scenario,
    ensemble: DropEnsemble,
    target_rate_bps: float,
    percentile: float = 5.0,
    link: str = "DL",
    rel_tol: float = 0.02,
    min_search_m: float | None = None,
    max_search_m: float = MAX_SEARCH_RADIUS_M,
    workers: int | None = None,
) -> CoverageResult:
    """Coverage distance: the disk radius at which the given percentile of
    pooled per-user rates just meets ``target_rate_bps``."""
    link = link.upper()
    if min_search_m is None:
        min_search_m = max(100.0, 2 * ensemble.min_radius_m)
    warnings_at: dict[float, tuple] = {}

    def rate_at(radius):
        rates, w = pooled_rates(scenario, replace(ensemble, disk_radius_m=radius), link, workers)
        warnings_at[radius] = w
        return percentile_rate(rates, percentile)

    res = bisect_coverage(rate_at, target_rate_bps, min_search_m, max_search_m, rel_tol)
    # only the reported radius's channel warnings are relevant to the caller
    warnings = set(res.warnings) | set(warnings_at.get(res.d_cov_m, ()))
    return replace(res, percentile=percentile, link=link, warnings=tuple(sorted(warnings)))


# --- sweeps -----------------------------------------------------------------

CSV_HEADER = (
    "bs_type", "K", "fc_mhz", "W_mhz", "duplex", "eirp_dbm", "d_eval_km",
    "rate_p5_mbps", "rate_p50_mbps", "rate_p95_mbps", "rate_mean_mbps", "dcov_km", "warnings",
)


def _sig3(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.3g}"


@dataclass
class SweepGrid:
    """Cartesian grid of tower type x K x band x EIRP on top of a base document.

    ``bands`` entries carry carrier_frequency_mhz, bandwidth_mhz and duplex.
    ``distance_km`` is either one radius for every cell or a mapping keyed
    ``"<bs_type>/<K>/<fc_mhz>"``; families without a distance get one from a
    downlink coverage search when ``coverage`` is set.
    """

    base: dict
    bs_types: list
    num_users: list
    bands: list
    eirps_dbm: list
    distance_km: object = None
    coverage: bool = False
    target_dl_mbps: float = 10.0
    percentile: float = 5.0
    num_drops: int = 200
    master_seed: int = 0

    @classmethod
    def from_document(cls, doc: dict) -> "SweepGrid":
        g = doc.get("grid", {})
        sweep = doc.get("sweep", {})
        return cls(
            base=dict(doc.get("base", {})),
            bs_types=list(g.get("bs_type", ["HTBS"])),
            num_users=list(g.get("num_users", [20])),
            bands=list(g.get("band", [])),
            eirps_dbm=list(g.get("eirp_max_dbm", [23.0])),
            distance_km=doc.get("distance_km", sweep.get("distance_km")),
            coverage=bool(sweep.get("coverage", False)),
            target_dl_mbps=float(sweep.get("target_dl_mbps", 10.0)),
            percentile=float(sweep.get("percentile", 5.0)),
            num_drops=int(sweep.get("drops", 200)),
            master_seed=int(sweep.get("master_seed", 0)),
        )

    def families(self):
        for bs in self.bs_types:
            for k in self.num_users:
                for band in self.bands:
                    yield bs, k, band

    def distance_for(self, bs, k, fc_mhz):
        d = self.distance_km
        if d is None:
            return None
        if isinstance(d, (int, float)):
            return float(d)
        return d.get(f"{bs}/{k}/{fc_mhz:g}")


def family_seed(master_seed: int, bs_type: str, k: int, fc_mhz: float) -> int:
    tag = f"{master_seed}|{bs_type}|{k}|{fc_mhz:g}".encode()
    return int.from_bytes(hashlib.sha256(tag).digest()[:8], "little")


@dataclass
class SweepRow:
    bs_type: str
    k: int
    fc_mhz: float
    w_mhz: float
    duplex: str
    eirp_dbm: float
    d_eval_km: float | None = None
    summary: RateSummary | None = None
    dcov_km: float | None = None
    warnings: list = field(default_factory=list)

    def cells(self) -> list[str]:
        s = self.summary
        mb = (lambda x: _sig3(x / 1e6)) if s else (lambda x: "")
        return [
            self.bs_type, str(self.k), f"{self.fc_mhz:g}", f"{self.w_mhz:g}", self.duplex,
            f"{self.eirp_dbm:g}", _sig3(self.d_eval_km),
            mb(s.p5) if s else "", mb(s.p50) if s else "", mb(s.p95) if s else "",
            mb(s.mean) if s else "", _sig3(self.dcov_km), ";".join(self.warnings),
        ]


def sweep(grid: SweepGrid, workers: int | None = None) -> list[SweepRow]:
    """One uplink experiment per grid cell; errors are recorded per row.

    Cells of one (tower, K, band) family share their seed, so the EIRP
    columns are evaluated on identical channels.
    """
    rows: list[SweepRow] = []
    for bs, k, band in grid.families():
        fc = float(band["carrier_frequency_mhz"])
        fam_rows = [
            SweepRow(bs, k, fc, float(band["bandwidth_mhz"]), str(band["duplex"]), float(e))
            for e in grid.eirps_dbm
        ]
        rows.extend(fam_rows)
        seed = family_seed(grid.master_seed, bs, k, fc)
        try:
            doc = {**grid.base, **band, "bs_type": bs, "num_users": k,
                   "eirp_max_dbm": float(max(grid.eirps_dbm)), "seed": seed}
            scen = validate(doc)
            d_km = grid.distance_for(bs, k, fc)
            dcov = None
            if grid.coverage:
                ens = DropEnsemble(grid.num_drops, MAX_SEARCH_RADIUS_M, master_seed=seed)
                cov = coverage_search(scen, ens, grid.target_dl_mbps * 1e6, grid.percentile, "DL",
                                      workers=workers)
                dcov = cov.d_cov_m / 1e3
                for r in fam_rows:
                    r.dcov_km = dcov
                    r.warnings.extend(cov.warnings)
            if d_km is None:
                d_km = dcov
            if d_km is None:
                raise ValueError("no evaluation distance and coverage search disabled")
            ens = DropEnsemble(grid.num_drops, d_km * 1e3, master_seed=seed)
            sums = ul_rate_experiment_multi(scen, ens, grid.eirps_dbm, workers=workers)
            for r, s in zip(fam_rows, sums):
                r.d_eval_km = d_km
                r.summary = s
                r.warnings.extend(w for w in s.warnings if w not in r.warnings)
        except Exception as exc:  # recorded per cell, the sweep goes on
            for r in fam_rows:
                r.warnings.append(f"error: {type(exc).__name__}: {exc}".replace("\n", " "))
    return rows


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()
