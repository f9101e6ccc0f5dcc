import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ruralmimo import geodata as gd


def uniform(rho, lon=(35.0, 36.0), lat=(10.5, 11.75), cs=0.01):
    rows = round((lat[1] - lat[0]) / cs)
    cols = round((lon[1] - lon[0]) / cs)
    return gd.PopulationRaster(lon[0], lon[1], lat[0], lat[1], cs, np.full((rows, cols), float(rho)))


def test_small_file(tmp_path):
    p = tmp_path / "r.txt"
    p.write_text("0 2 0 2 1\n1 2\nNA 4\n")
    r = gd.load_raster(p)
    assert r.densities.size == 4 and r.missing == 1
    assert r.densities[1, 0] == 0 and r.densities[0, 1] == 2


def test_inconsistent_columns():
    with pytest.raises(gd.InconsistentDimensions):
        gd.parse_raster("0 3 0 1 1\n1 2\n")


def test_parse_error_line_number():
    with pytest.raises(gd.ParseError) as exc:
        gd.parse_raster("0 2 0 1 1\n1 x\n")
    assert exc.value.line == 2


def test_fig2_bounds_round_trip():
    r = gd.parse_raster(uniform(3.0, cs=0.05).to_text())
    assert r.bounds == (35.0, 36.0, 10.5, 11.75)
    assert r.shape == (25, 20)


def test_uniform_disk_count():
    ev = gd.evaluate_site(uniform(55.0), (35.5, 11.1), 12.5)
    assert ev.covered_persons == pytest.approx(55 * math.pi * 12.5**2, rel=0.01)
    assert ev.covered_persons == pytest.approx(ev.mean_density * ev.coverage_area_km2)
    assert not ev.partial


def test_zero_raster():
    assert gd.evaluate_site(uniform(0.0), (35.5, 11.1), 10).covered_persons == 0.0


def test_half_plane():
    r = uniform(0.0)
    lons, _ = r.cell_centers()
    d = r.densities.copy()
    d[:, lons < 35.5] = 40.0
    r = gd.PopulationRaster(*r.bounds, r.cell_size_deg, d)
    ev = gd.evaluate_site(r, (35.5, 11.1), 15.0)
    assert ev.covered_persons == pytest.approx(40 * math.pi * 15**2 / 2, rel=0.01)


def test_out_of_bounds_and_partial():
    r = uniform(1.0)
    with pytest.raises(gd.OutOfBounds):
        gd.evaluate_site(r, (40.0, 11.0), 5)
    assert gd.evaluate_site(r, (35.0, 11.0), 5).partial


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1, 20), st.floats(1.01, 2))
def test_radius_monotone(seed, radius, grow):
    rng = np.random.default_rng(seed)
    r = gd.PopulationRaster(35, 36, 10.5, 11.75, 0.05, rng.exponential(10, (25, 20)))
    a = gd.evaluate_site(r, (35.5, 11.1), radius).covered_persons
    b = gd.evaluate_site(r, (35.5, 11.1), radius * grow).covered_persons
    assert b >= a


def test_tiling_conserves_mass():
    rng = np.random.default_rng(8)
    r = gd.PopulationRaster(35, 36, 10.5, 11.75, 0.01, rng.exponential(20, (125, 100)))
    total = 0.0
    for rs in (slice(0, 60), slice(60, 125)):
        for cs in (slice(0, 50), slice(50, 100)):
            tile = r.subraster(rs, cs)
            assert tile.total_population() > 0
            c = ((tile.lon_min + tile.lon_max) / 2, (tile.lat_min + tile.lat_max) / 2)
            w = (tile.lon_max - tile.lon_min) * gd.KM_PER_DEG_LAT
            h = (tile.lat_max - tile.lat_min) * gd.KM_PER_DEG_LAT
            total += gd.evaluate_site(tile, c, math.hypot(w, h)).covered_persons
    assert total == pytest.approx(r.total_population(), rel=0.01)


def test_find_sites_tie_break():
    sites = gd.find_sites(uniform(55.0, cs=0.05), 55.0, 10.0, top_n=3)
    assert len(sites) == 3
    key = [(s.center[1], s.center[0]) for s in sites]
    assert key[0] == min(key)
    assert all(abs(s.mean_density - 55) < 1e-9 for s in sites)


def test_find_sites_single_cell():
    r = gd.PopulationRaster(35, 36, 10.5, 11.5, 0.25, np.zeros((4, 4)))
    d = r.densities.copy()
    d[1, 2] = 30.0
    r = gd.PopulationRaster(*r.bounds, 0.25, d)
    best = gd.find_sites(r, 30.0, 20.0, top_n=1)[0]
    lon, lat = best.center
    assert 35.5 <= lon <= 35.75 and 11.0 <= lat <= 11.25


def test_find_sites_two_blobs():
    d = np.full((50, 40), 0.0)
    d[:, :20] = 1.26
    d[:, 20:] = 55.0
    r = gd.PopulationRaster(35, 36, 10.5, 11.75, 0.025, d)
    for target, side in ((1.26, "west"), (55.0, "east")):
        sites = gd.find_sites(r, target, 10.0, top_n=3)
        for s in sites:
            assert (s.center[0] < 35.5) == (side == "west")
            assert s.mean_density == pytest.approx(target, rel=1e-6)


def test_find_sites_separation_and_csv(tmp_path):
    rng = np.random.default_rng(1)
    r = gd.PopulationRaster(35, 36, 10.5, 11.75, 0.05, rng.exponential(20, (25, 20)))
    sites = gd.find_sites(r, 20.0, 12.0, top_n=5)
    for i, a in enumerate(sites):
        for b in sites[i + 1:]:
            assert gd._distance_km(a.center, b.center) >= 12.0
    gd.sites_to_csv(sites, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "rank,lon,lat,mean_density,covered_persons,radius_km"
    assert len(lines) == len(sites) + 1


def test_find_sites_rejects_negative_target():
    with pytest.raises(ValueError):
        gd.find_sites(uniform(1.0, cs=0.25), -1.0, 10.0)
