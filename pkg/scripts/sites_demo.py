"""Site search on a synthetic raster over the 35-36 E, 10.5-11.75 N window.

Three Gaussian settlements on a sparse background; prints the best sites for
the densities of the K=20 and K=100 HTBS cells and writes the raster.
"""

import argparse

import numpy as np

from ruralmimo import geodata


def synthetic(seed=0, cell=0.01):
    rng = np.random.default_rng(seed)
    lon = 35 + (np.arange(100) + 0.5) * cell
    lat = 11.75 - (np.arange(125) + 0.5) * cell
    lo, la = np.meshgrid(lon, lat)
    dens = 1.0 + rng.exponential(0.3, lo.shape)
    for clon, clat, peak, width in ((35.25, 11.5, 120, 0.08), (35.7, 10.8, 60, 0.12), (35.75, 11.4, 20, 0.2)):
        dens += peak * np.exp(-((lo - clon) ** 2 + (la - clat) ** 2) / (2 * width**2))
    return geodata.PopulationRaster(35, 36, 10.5, 11.75, cell, dens)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--write", help="save the raster to this path")
    args = ap.parse_args()

    raster = synthetic(args.seed)
    if args.write:
        with open(args.write, "w") as fh:
            fh.write(raster.to_text())
    print(f"total population {raster.total_population():,.0f}")
    for rho, radius in ((1.26, 37.0), (55.0, 12.5)):
        print(f"target {rho} persons/km^2, radius {radius} km")
        for i, s in enumerate(geodata.find_sites(raster, rho, radius), 1):
            print(f"  {i}. ({s.center[0]:.3f} E, {s.center[1]:.3f} N) density {s.mean_density:.3g}, "
                  f"{s.covered_persons:,.0f} persons{' (partial)' if s.partial else ''}")


if __name__ == "__main__":
    main()
