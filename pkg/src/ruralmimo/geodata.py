"""Population-density rasters and candidate tower sites.

Raster files are plain text::

    lon_min lon_max lat_min lat_max cell_size_deg
    <densities of the northernmost row, persons/km^2>
    ...
    <densities of the southernmost row>

``NA`` marks a missing cell; it counts as zero and is tallied in
``PopulationRaster.missing``. Distances use a local equirectangular
projection, which is accurate to well under 1% over a degree or two.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

KM_PER_DEG_LAT = 111.32
SUBSAMPLES = 4  # per axis, for cells cut by the disk boundary


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InconsistentDimensions(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


@dataclass(frozen=True)
class PopulationRaster:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float
    cell_size_deg: float
    densities: np.ndarray  # (rows, cols), row 0 is the northern edge
    missing: int = 0

    @property
    def bounds(self):
        return (self.lon_min, self.lon_max, self.lat_min, self.lat_max)

    @property
    def shape(self):
        return self.densities.shape

    def cell_centers(self):
        rows, cols = self.shape
        lons = self.lon_min + (np.arange(cols) + 0.5) * self.cell_size_deg
        lats = self.lat_max - (np.arange(rows) + 0.5) * self.cell_size_deg
        return lons, lats

    def cell_areas_km2(self) -> np.ndarray:
        _, lats = self.cell_centers()
        side = self.cell_size_deg * KM_PER_DEG_LAT
        per_row = side * side * np.cos(np.deg2rad(lats))
        return np.broadcast_to(per_row[:, None], self.shape)

    def total_population(self) -> float:
        return float(np.sum(self.densities * self.cell_areas_km2()))

    def subraster(self, rows: slice, cols: slice) -> "PopulationRaster":
        """Rectangular tile with bounds snapped to the parent's cell edges."""
        r0, r1, _ = rows.indices(self.shape[0])
        c0, c1, _ = cols.indices(self.shape[1])
        cs = self.cell_size_deg
        return PopulationRaster(
            self.lon_min + c0 * cs,
            self.lon_min + c1 * cs,
            self.lat_max - r1 * cs,
            self.lat_max - r0 * cs,
            cs,
            self.densities[r0:r1, c0:c1].copy(),
        )

    def to_text(self) -> str:
        head = f"{self.lon_min:g} {self.lon_max:g} {self.lat_min:g} {self.lat_max:g} {self.cell_size_deg:g}"
        body = "\n".join(" ".join(f"{v:g}" for v in row) for row in self.densities)
        return head + "\n" + body + "\n"


def parse_raster(text: str) -> PopulationRaster:
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError(1, "empty raster file")
    hline, header = lines[0]
    try:
        lon_min, lon_max, lat_min, lat_max, cs = (float(t) for t in header.split())
    except ValueError:
        raise ParseError(hline, "header must be 'lon_min lon_max lat_min lat_max cell_size_deg'") from None
    if cs <= 0 or lon_max <= lon_min or lat_max <= lat_min:
        raise ParseError(hline, "degenerate bounds or cell size")
    cols = round((lon_max - lon_min) / cs)
    rows = round((lat_max - lat_min) / cs)
    if not (math.isclose(cols * cs, lon_max - lon_min, rel_tol=1e-6)
            and math.isclose(rows * cs, lat_max - lat_min, rel_tol=1e-6)):
        raise InconsistentDimensions("bounds are not a whole number of cells")

    data = np.zeros((rows, cols))
    missing = 0
    body = lines[1:]
    if len(body) != rows:
        raise InconsistentDimensions(f"header implies {rows} rows, file has {len(body)}")
    for r, (lineno, ln) in enumerate(body):
        toks = ln.replace(",", " ").split()
        if len(toks) != cols:
            raise InconsistentDimensions(f"line {lineno}: expected {cols} columns, got {len(toks)}")
        for c, t in enumerate(toks):
            if t.upper() == "NA":
                missing += 1
                continue
            try:
                v = float(t)
            except ValueError:
                raise ParseError(lineno, f"not a number: {t!r}") from None
            if not math.isfinite(v) or v < 0:
                raise ParseError(lineno, f"density must be finite and >= 0, got {t}")
            data[r, c] = v
    return PopulationRaster(lon_min, lon_max, lat_min, lat_max, cs, data, missing)


def load_raster(path) -> PopulationRaster:
    return parse_raster(Path(path).read_text())


@dataclass(frozen=True)
class SiteEvaluation:
    center: tuple  # (lon, lat)
    radius_km: float
    covered_persons: float
    mean_density: float
    coverage_area_km2: float
    partial: bool = False  # disk extends past the raster


def _overlap_fractions(raster: PopulationRaster, center, radius_km: float) -> np.ndarray:
    lon0, lat0 = center
    kx = KM_PER_DEG_LAT * math.cos(math.radians(lat0))
    ky = KM_PER_DEG_LAT
    lons, lats = raster.cell_centers()
    half = raster.cell_size_deg / 2
    x = (lons - lon0) * kx
    y = (lats - lat0) * ky
    hx, hy = half * kx, half * ky
    dx = np.abs(x)[None, :]
    dy = np.abs(y)[:, None]
    near = np.hypot(np.maximum(dx - hx, 0), np.maximum(dy - hy, 0))
    far = np.hypot(dx + hx, dy + hy)
    frac = np.where(far <= radius_km, 1.0, 0.0)
    cut = (near < radius_km) & (far > radius_km)
    if np.any(cut):
        offs = (np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES * 2 - 1  # in (-1, 1)
        ox, oy = np.meshgrid(offs * hx, offs * hy)
        ri, ci = np.nonzero(cut)
        px = x[ci][:, None, None] + ox[None]
        py = y[ri][:, None, None] + oy[None]
        inside = np.hypot(px, py) <= radius_km
        frac[ri, ci] = inside.mean(axis=(1, 2))
    return frac


def evaluate_site(raster: PopulationRaster, center, radius_km: float) -> SiteEvaluation:
    """Persons within ``radius_km`` of ``center`` (lon, lat)."""
    frac = _overlap_fractions(raster, center, radius_km)
    if not np.any(frac > 0):
        raise OutOfBounds(f"disk at {center} with radius {radius_km} km misses the raster")
    areas = raster.cell_areas_km2() * frac
    persons = float(np.sum(raster.densities * areas))
    area = float(areas.sum())
    disk = math.pi * radius_km**2
    return SiteEvaluation(
        (float(center[0]), float(center[1])),
        float(radius_km),
        persons,
        persons / area if area > 0 else 0.0,
        area,
        partial=area < disk * (1 - 1e-3),
    )


def find_sites(raster: PopulationRaster, target_rho: float, radius_km: float, top_n: int = 3):
    """Rank candidate centres by how close their mean density is to ``target_rho``.

    Candidates sit on a grid with a stride of half the radius; the reported
    sites are kept at least one radius apart.
    """
    if target_rho < 0:
        raise ValueError("target density must be >= 0")
    if raster.densities.size == 0:
        return []
    lat_mid = (raster.lat_min + raster.lat_max) / 2
    step_lat = radius_km / 2 / KM_PER_DEG_LAT
    step_lon = radius_km / 2 / (KM_PER_DEG_LAT * math.cos(math.radians(lat_mid)))
    lats = np.arange(raster.lat_min + step_lat / 2, raster.lat_max, step_lat)
    lons = np.arange(raster.lon_min + step_lon / 2, raster.lon_max, step_lon)
    cands = []
    for lat in lats:
        for lon in lons:
            ev = evaluate_site(raster, (lon, lat), radius_km)
            cands.append((abs(ev.mean_density - target_rho), ev.center[1], ev.center[0], ev))
    cands.sort(key=lambda t: t[:3])

    chosen: list[SiteEvaluation] = []
    for _, lat, lon, ev in cands:
        if all(_distance_km(ev.center, c.center) >= radius_km for c in chosen):
            chosen.append(ev)
            if len(chosen) == top_n:
                break
    return chosen


def _distance_km(a, b) -> float:
    lat0 = (a[1] + b[1]) / 2
    dx = (a[0] - b[0]) * KM_PER_DEG_LAT * math.cos(math.radians(lat0))
    dy = (a[1] - b[1]) * KM_PER_DEG_LAT
    return math.hypot(dx, dy)


def sites_to_csv(sites, path_or_buf) -> None:
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "lon", "lat", "mean_density", "covered_persons", "radius_km"])
        for i, s in enumerate(sites, 1):
            w.writerow([i, f"{s.center[0]:.5f}", f"{s.center[1]:.5f}", f"{s.mean_density:.4g}",
                        f"{s.covered_persons:.1f}", f"{s.radius_km:g}"])
    finally:
        if own:
            fh.close()
