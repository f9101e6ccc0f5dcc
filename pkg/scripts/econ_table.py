"""Covered users, density, area and minimum EIRP for the HTBS 700 MHz rows.

By default the per-user UL rates are the reference 5th-percentile values;
pass --ul-table with a sweep CSV to use simulated ones instead.
"""

import argparse

from ruralmimo import cli, econ

PUBLISHED = {
    20: (37.0, {40: 12.5, 33: 4.5, 30: 2.5, 23: 0.85}),
    50: (21.0, {40: 16.5, 33: 7.0, 30: 4.5, 23: 1.55}),
    100: (12.5, {40: 22.0, 33: 10.0, 30: 6.5, 23: 2.5}),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ul-table", help="CSV with K, fc_mhz, eirp_dbm and rate_p5_mbps columns")
    args = ap.parse_args()

    traffic = econ.TrafficModel()
    print("   K |  d_cov |   N_cov |     rho | EIRP |   A_cov")
    for k, (d, table) in PUBLISHED.items():
        if args.ul_table:
            rates = cli.read_ul_table(args.ul_table, k, 700.0, "HTBS")
        else:
            rates = {e: v * 1e6 for e, v in table.items()}
        try:
            print(econ.econ_report(d, k, 10e6, traffic, rates).table_row())
        except econ.NoFeasibleEirp as exc:
            print(f"{k:>4d} | infeasible: {exc}")


if __name__ == "__main__":
    main()
