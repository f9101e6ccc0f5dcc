"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[ACC nn] PASS|FAIL ...`` line (visible even when
pytest captures output) and asserts the criterion at its stated tolerance and
runtime budget. Run ``pytest tests/test_acceptance.py -v`` or execute this
file directly.
"""

import math
import sys
import time

import numpy as np
import pytest

from conftest import BASELINE_HTBS, crandn
from ruralmimo import channel, econ, geodata, montecarlo, uplink
from ruralmimo.scenario import validate

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def report(num, name, ok, detail, elapsed, budget_s):
        ok = bool(ok) and elapsed < budget_s
        line = f"[ACC {num:02d}] {'PASS' if ok else 'FAIL'} {name}: {detail} ({elapsed:.2f} s / {budget_s:g} s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


HTBS_700_UL = {
    20: {40: 12.5, 33: 4.5, 30: 2.5, 23: 0.85},
    50: {40: 16.5, 33: 7.0, 30: 4.5, 23: 1.55},
    100: {40: 22.0, 33: 10.0, 30: 6.5, 23: 2.5},
}


def test_01_traffic_rates(verdict):
    t0 = time.perf_counter()
    t = econ.TrafficModel()
    ul, dl = econ.avg_user_rate(t, "UL"), econ.avg_user_rate(t, "DL")
    ok = abs(ul / 7.41e3 - 1) <= 0.005 and abs(dl / 37.0e3 - 1) <= 0.005
    verdict(1, "traffic rates", ok, f"UL {ul / 1e3:.3f} kbps, DL {dl / 1e3:.3f} kbps", time.perf_counter() - t0, 1)


def test_02_econ_table(verdict):
    t0 = time.perf_counter()
    expect = {20: (37, 5405, 1.26, 4300, 30), 50: (21, 13513, 9.75, 1385, 30), 100: (12.5, 27027, 55, 490, 23)}
    ok, parts = True, []
    for k, (d, n, rho, area, eirp) in expect.items():
        r = econ.econ_report(d, k, 10e6, econ.TrafficModel(), {e: v * 1e6 for e, v in HTBS_700_UL[k].items()})
        row_ok = (r.n_cov == n and abs(r.rho_cov / rho - 1) <= 0.005 and abs(r.a_cov / area - 1) <= 0.005
                  and r.min_eirp_dbm == eirp)
        if k == 100:
            row_ok &= abs(r.required_ul_capacity_bps / 200e6 - 1) <= 0.005
        ok &= row_ok
        parts.append(f"K={k}: N={r.n_cov} rho={r.rho_cov:.3g} A={r.a_cov:.0f} EIRP={r.min_eirp_dbm:g}")
    verdict(2, "econ table", ok, "; ".join(parts), time.perf_counter() - t0, 1)


def test_03_activity_ratio(verdict):
    t0 = time.perf_counter()
    r = econ.econ_report(12.5, 100, 10e6, econ.TrafficModel(), {23: 2.5e6})
    pct = 100 * r.activity_ratio
    verdict(3, "activity ratio", abs(pct - 0.37) <= 0.01, f"{pct:.4f} %", time.perf_counter() - t0, 1)


def test_04_rzf_optimality(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = np.inf
    for _ in range(100):
        h = crandn(rng, 32, 8)
        p = np.ones(8)
        s2 = 10 ** rng.uniform(-1.5, 1.5)
        best = uplink.sinr(h, uplink.rzf_combiner(h, p, s2), p, s2)
        for comb in (uplink.mr_combiner(h), uplink.zf_combiner(h)):
            worst = min(worst, np.min(best - uplink.sinr(h, comb, p, s2)))
    verdict(4, "RZF optimality", worst >= -1e-9, f"min SINR margin {worst:.3e}", time.perf_counter() - t0, 10)


def test_05_rzf_limits(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    h = crandn(rng, 32, 8)
    v = uplink.rzf_combiner(h, np.ones(8), 1e-12).v
    g = np.abs(v.conj().T @ h)
    leak = np.max((g - np.diag(np.diag(g))) / np.diag(g)[:, None])
    h1 = crandn(rng, 32, 1)
    v1 = uplink.rzf_combiner(h1, np.array([1.0]), 0.5).v
    cos = abs(np.vdot(v1[:, 0], h1[:, 0])) / (np.linalg.norm(v1) * np.linalg.norm(h1))
    ok = leak < 1e-6 and abs(1 - cos) < 1e-9
    verdict(5, "RZF limits", ok, f"leakage {leak:.2e}, K=1 |cos|-1 {cos - 1:.1e}", time.perf_counter() - t0, 5)


def _naive_sinr(h, v, p, s2):
    k = h.shape[1]
    out = np.empty(k)
    for a in range(k):
        num = p[a] * abs(np.vdot(v[:, a], h[:, a])) ** 2
        den = sum(p[i] * abs(np.vdot(v[:, a], h[:, i])) ** 2 for i in range(k) if i != a)
        den += s2 * np.sum(np.abs(v[:, a]) ** 2)
        out[a] = num / den
    return out


def test_06_sinr_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 9))
        k = int(rng.integers(1, m + 1))
        h = crandn(rng, m, k)
        p = rng.uniform(0.01, 2, k)
        s2 = 10 ** rng.uniform(-2, 1)
        v = uplink.rzf_combiner(h, p, s2).v if rng.random() < 0.5 else crandn(rng, m, k)
        ref = _naive_sinr(h, v, p, s2)
        worst = max(worst, np.max(np.abs(uplink.sinr(h, v, p, s2) - ref) / ref))
    verdict(6, "SINR oracle", worst <= 1e-10, f"max rel err {worst:.2e}", time.perf_counter() - t0, 10)


def test_07_power_control(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    worst_spread, worst_cap = 0.0, 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 101))
        lg = rng.uniform(-16, -10, k)
        lg[:2] = -16, -10  # exactly 60 dB
        beta = 10**lg
        pmax = 10 ** rng.uniform(-2, 1)
        pa = uplink.power_control(beta, pmax, 20)
        rx = pa.p * beta
        worst_spread = max(worst_spread, 10 * np.log10(rx.max() / rx.min()))
        worst_cap = max(worst_cap, np.max(pa.p / pmax))
    ok = worst_spread <= 20 + 1e-9 and worst_cap <= 1.0
    verdict(7, "power control", ok, f"max spread {worst_spread:.12f} dB, max p/pmax {worst_cap}",
            time.perf_counter() - t0, 5)


def test_08_channel_normalization(verdict):
    t0 = time.perf_counter()
    scen = validate({**BASELINE_HTBS, "m_horizontal": 8, "m_vertical": 4})
    legacy = validate({**BASELINE_HTBS, "bs_type": "Legacy", "m_horizontal": 8, "m_vertical": 4})
    d = channel.UserDrop(np.array([300.0, 2000.0, 9000.0]), np.array([0.1, 1.5, -2.5]))
    worst = 0.0
    for s, seed in ((scen, 81), (legacy, 82)):
        rng = np.random.default_rng(seed)
        acc = np.zeros(3)
        for _ in range(1000):
            ch = channel.generate(rng, s, d)
            acc += np.sum(np.abs(ch.h) ** 2, axis=0) / (64 * ch.large_scale.beta)
        worst = max(worst, np.max(np.abs(acc / 1000 - 1)))
    verdict(8, "channel normalization", worst <= 0.05, f"max |ratio-1| {worst:.4f} (LoS and NLoS)",
            time.perf_counter() - t0, 30)


def test_09_coverage_ratio(verdict):
    t0 = time.perf_counter()
    base = dict(carrier_frequency_mhz=700, bandwidth_mhz=10, duplex="FDD", num_users=20,
                m_horizontal=16, m_vertical=4, eirp_max_dbm=40, seed=7)
    dcov = {}
    for bs in ("HTBS", "Legacy"):
        s = validate({**base, "bs_type": bs})
        res = montecarlo.coverage_search(s, montecarlo.DropEnsemble(100, 1000.0, master_seed=7), 10e6, 5, "DL")
        assert res.rate_at_d_cov >= 10e6 > res.rate_at_upper
        dcov[bs] = res.d_cov_m
    ratio = dcov["HTBS"] / dcov["Legacy"]
    verdict(9, "coverage ratio", ratio >= 4,
            f"HTBS {dcov['HTBS'] / 1e3:.2f} km / Legacy {dcov['Legacy'] / 1e3:.2f} km = {ratio:.2f}",
            time.perf_counter() - t0, 600)


def test_10_ul_rate_soft_check(verdict):
    t0 = time.perf_counter()
    s = validate({**BASELINE_HTBS, "num_users": 100, "seed": 2023})
    ens = montecarlo.DropEnsemble(200, 12_500.0, master_seed=2023)
    eirps = [40, 33, 30, 23]
    sums = montecarlo.ul_rate_experiment_multi(s, ens, eirps)
    p5 = [x.p5 / 1e6 for x in sums]
    ok = 1.25 <= p5[-1] <= 5.0 and all(a > b for a, b in zip(p5, p5[1:]))
    detail = ", ".join(f"{e} dBm: {v:.3g}" for e, v in zip(eirps, p5)) + " Mbps (5th pct)"
    verdict(10, "UL rate soft check", ok, detail, time.perf_counter() - t0, 900)


def test_11_sweep_determinism(verdict, monkeypatch):
    t0 = time.perf_counter()
    doc = {
        "sweep": {"drops": 4, "master_seed": 11, "distance_km": 6.0},
        "base": {"m_horizontal": 8, "m_vertical": 4},
        "grid": {
            "bs_type": ["Legacy", "HTBS"], "num_users": [10, 20], "eirp_max_dbm": [40, 33, 30, 23],
            "band": [{"carrier_frequency_mhz": 700, "bandwidth_mhz": 10, "duplex": "FDD"},
                     {"carrier_frequency_mhz": 3500, "bandwidth_mhz": 100, "duplex": "TDD"}],
        },
    }
    outs = []
    for threads in ("1", "4", "1"):
        monkeypatch.setenv(montecarlo.THREADS_ENV, threads)
        outs.append(montecarlo.rows_to_csv(montecarlo.sweep(montecarlo.SweepGrid.from_document(doc))).encode())
    ok = outs[0] == outs[1] == outs[2] and len(outs[0].splitlines()) == 33
    verdict(11, "sweep determinism", ok, f"3 runs (1/4/1 threads), {len(outs[0])} bytes each",
            time.perf_counter() - t0, 120)


def test_12_geodata(verdict):
    t0 = time.perf_counter()
    uni = geodata.PopulationRaster(35, 36, 10.5, 11.75, 0.01, np.full((125, 100), 55.0))
    got = geodata.evaluate_site(uni, (35.5, 11.1), 12.5).covered_persons
    exact = 55 * math.pi * 12.5**2
    err_uniform = abs(got / exact - 1)

    rng = np.random.default_rng(12)
    r = geodata.PopulationRaster(35, 36, 10.5, 11.75, 0.01, rng.exponential(30, (125, 100)))
    total = 0.0
    for rs in (slice(0, 40), slice(40, 90), slice(90, 125)):
        for cs in (slice(0, 50), slice(50, 100)):
            tile = r.subraster(rs, cs)
            c = ((tile.lon_min + tile.lon_max) / 2, (tile.lat_min + tile.lat_max) / 2)
            span = math.hypot(tile.lon_max - tile.lon_min, tile.lat_max - tile.lat_min) * geodata.KM_PER_DEG_LAT
            total += geodata.evaluate_site(tile, c, span).covered_persons
    err_tiling = abs(total / r.total_population() - 1)
    ok = err_uniform <= 0.01 and err_tiling <= 0.01
    verdict(12, "geodata", ok, f"uniform {got:.0f} vs {exact:.0f} ({err_uniform:.2e}), tiling err {err_tiling:.2e}",
            time.perf_counter() - t0, 30)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
