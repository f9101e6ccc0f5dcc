"""Downlink coverage distance of an HTBS versus a legacy tower and their ratio.

    python scripts/coverage_ratio.py --m-h 16 --m-v 4 --drops 100
"""

import argparse

from ruralmimo import montecarlo
from ruralmimo.scenario import validate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fc-mhz", type=float, default=700)
    ap.add_argument("--bw-mhz", type=float, default=10)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--m-h", type=int, default=16)
    ap.add_argument("--m-v", type=int, default=4)
    ap.add_argument("--drops", type=int, default=100)
    ap.add_argument("--target-mbps", type=float, default=10)
    ap.add_argument("--percentile", type=float, default=5)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    base = dict(carrier_frequency_mhz=args.fc_mhz, bandwidth_mhz=args.bw_mhz, duplex="FDD", num_users=args.k,
                m_horizontal=args.m_h, m_vertical=args.m_v, eirp_max_dbm=40, seed=args.seed)
    d = {}
    for bs in ("HTBS", "Legacy"):
        scen = validate({**base, "bs_type": bs})
        ens = montecarlo.DropEnsemble(args.drops, 1000.0, master_seed=args.seed)
        res = montecarlo.coverage_search(scen, ens, args.target_mbps * 1e6, args.percentile, "DL")
        d[bs] = res.d_cov_m / 1e3
        print(f"{bs:>6}: d_cov = {d[bs]:.2f} km  (bracket up to {res.upper_m / 1e3:.2f} km, "
              f"{res.iterations} steps{', ' + ';'.join(res.warnings) if res.warnings else ''})")
    r = d["HTBS"] / d["Legacy"]
    print(f"ratio {r:.2f}, area ratio {r * r:.1f}")


if __name__ == "__main__":
    main()
