"""Uplink rate grid with tower x K x band rows and EIRP columns.

    python scripts/run_ul_sweep.py --drops 50 --out results/ul_grid.csv
"""

import argparse
from pathlib import Path

from ruralmimo import cli, montecarlo
from ruralmimo.scenario import load_document

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", default=ROOT / "configs" / "ul_rate_grid.toml")
    ap.add_argument("--drops", type=int)
    ap.add_argument("--out", default="ul_grid.csv")
    args = ap.parse_args()

    grid = montecarlo.SweepGrid.from_document(load_document(args.grid))
    if args.drops:
        grid.num_drops = args.drops
    rows = montecarlo.sweep(grid)
    body = montecarlo.rows_to_csv(rows)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    cli.write_csv(args.out, body, "scripts/run_ul_sweep", cli.file_digest(args.grid, extra=[grid.num_drops]),
                  grid.master_seed, [w for r in rows for w in r.warnings])

    # pivot: one line per family, 5th-percentile rate per EIRP
    fams = {}
    for r in rows:
        fams.setdefault((r.bs_type, r.k, r.fc_mhz), {})[r.eirp_dbm] = r.summary.p5 / 1e6 if r.summary else float("nan")
    eirps = sorted(grid.eirps_dbm, reverse=True)
    print(f"{'type':>6} {'K':>4} {'fc':>5} | " + " ".join(f"{e:>6g}" for e in eirps) + "   (dBm; Mbps)")
    for (bs, k, fc), vals in fams.items():
        print(f"{bs:>6} {k:>4} {fc:>5g} | " + " ".join(f"{vals[e]:>6.3g}" for e in eirps))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
