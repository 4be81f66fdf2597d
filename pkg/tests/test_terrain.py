"""Terrain model: DEM parsing and sampling, panorama rendering, peaks."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snowwatch import synthetic as syn
from snowwatch.config import RenderConfig
from snowwatch.terrain import (
    EARTH_RADIUS_M,
    REFRACTION_K,
    DemGrid,
    DemParseError,
    GeoPoint,
    Peak,
    Viewpoint,
    curvature_drop,
    load_dem,
    load_peaks,
    panorama_sidecar,
    panorama_to_png,
    peak_bearing,
    project_peaks,
    render_panorama,
    sample_elevation,
    save_dem,
)
from snowwatch.vision import decode_image


def small_grid(values, origin=GeoPoint(0.0, 0.0), cell=0.001, nodata=-9999.0):
    arr = np.asarray(values, dtype=np.float64)
    return DemGrid(origin, arr.shape[0], arr.shape[1], cell, nodata, arr)


# ---------------------------------------------------------------------------
# Curvature and validation
# ---------------------------------------------------------------------------


def test_curvature_drop_closed_form():
    for d in (0.0, 100.0, 2700.0, 50_000.0):
        expected = d * d * (1.0 - REFRACTION_K) / (2.0 * EARTH_RADIUS_M)
        assert curvature_drop(d) == pytest.approx(expected, rel=1e-12)


@given(st.floats(min_value=0, max_value=1e6), st.floats(min_value=0, max_value=1e6))
def test_curvature_drop_monotone(d1, d2):
    lo, hi = sorted((d1, d2))
    assert curvature_drop(lo) <= curvature_drop(hi)


@pytest.mark.parametrize("lat,lon", [(91.0, 0.0), (-90.5, 0.0), (0.0, 180.0), (0.0, -181.0)])
def test_geopoint_rejects_out_of_range(lat, lon):
    with pytest.raises(ValueError):
        GeoPoint(lat, lon)


def test_geopoint_rejects_bad_altitude():
    with pytest.raises(ValueError):
        GeoPoint(0.0, 0.0, -600.0)
    with pytest.raises(ValueError):
        GeoPoint(0.0, 0.0, 9500.0)


@pytest.mark.parametrize("eye", [0.0, -1.0, 101.0])
def test_viewpoint_rejects_bad_eye_height(eye):
    with pytest.raises(ValueError):
        Viewpoint(GeoPoint(0.0, 0.0), eye)


def test_demgrid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        DemGrid(GeoPoint(0, 0), 2, 2, 0.001, -9999.0, np.zeros(3))
    with pytest.raises(ValueError):
        DemGrid(GeoPoint(0, 0), 2, 2, 0.0, -9999.0, np.zeros(4))
    with pytest.raises(ValueError):
        DemGrid(GeoPoint(0, 0), 1, 1, 0.001, -9999.0, np.array([9500.0]))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def test_bilinear_sampling_at_cell_centres_and_midpoint():
    dem = small_grid([[1.0, 2.0], [3.0, 4.0]])
    assert sample_elevation(dem, GeoPoint(0.0, 0.0)) == 1.0
    assert sample_elevation(dem, GeoPoint(0.0, 0.001)) == 2.0
    assert sample_elevation(dem, GeoPoint(0.001, 0.0)) == 3.0
    assert sample_elevation(dem, GeoPoint(0.0005, 0.0005)) == pytest.approx(2.5)
    assert sample_elevation(dem, GeoPoint(0.01, 0.0)) is None


def test_sampling_nodata_infects_its_stencil_only():
    dem = small_grid([[1.0, 2.0, -9999.0], [3.0, 4.0, 5.0], [6.0, 7.0, 8.0]])
    assert sample_elevation(dem, GeoPoint(0.0005, 0.0015)) is None
    assert sample_elevation(dem, GeoPoint(0.0015, 0.0005)) == pytest.approx(5.0)


def test_contains_matches_cell_centre_bounds():
    dem = small_grid([[1.0, 2.0], [3.0, 4.0]])
    assert dem.contains(GeoPoint(0.0, 0.0))
    assert dem.contains(GeoPoint(0.001, 0.001))
    assert not dem.contains(GeoPoint(-0.0001, 0.0))
    assert not dem.contains(GeoPoint(0.0011, 0.0))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(min_value=0, max_value=3000), min_size=35, max_size=35),
    st.floats(min_value=0, max_value=4.0),
    st.floats(min_value=0, max_value=6.0),
)
def test_bilinear_matches_scalar_oracle(cells, fy, fx):
    dem = small_grid(np.array(cells).reshape(5, 7))
    lat = fy * 0.001
    lon = fx * 0.001
    y0, x0 = min(int(fy), 3), min(int(fx), 5)
    ty, tx = fy - y0, fx - x0
    e = dem.elevations
    expected = (
        e[y0, x0] * (1 - ty) * (1 - tx)
        + e[y0, x0 + 1] * (1 - ty) * tx
        + e[y0 + 1, x0] * ty * (1 - tx)
        + e[y0 + 1, x0 + 1] * ty * tx
    )
    got = sample_elevation(dem, GeoPoint(lat, lon))
    assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def test_dem_save_load_roundtrip(tmp_path, dem):
    path = tmp_path / "dem.asc"
    save_dem(dem, path)
    back = load_dem(path)
    assert back.n_rows == dem.n_rows and back.n_cols == dem.n_cols
    assert back.cell_size == dem.cell_size
    assert back.origin.lat == pytest.approx(dem.origin.lat, abs=1e-12)
    assert back.origin.lon == pytest.approx(dem.origin.lon, abs=1e-12)
    assert np.allclose(back.elevations, dem.elevations, equal_nan=True)


def test_load_dem_reports_bad_header_line(tmp_path):
    path = tmp_path / "bad.asc"
    path.write_text("ncols 2\nxllcorner 0\n")
    with pytest.raises(DemParseError) as err:
        load_dem(path)
    assert "line 2" in str(err.value)


def test_load_dem_reports_bad_cell_value(tmp_path):
    path = tmp_path / "bad.asc"
    path.write_text(
        "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0.001\n"
        "nodata_value -9999\n1.0 oops\n"
    )
    with pytest.raises(DemParseError):
        load_dem(path)


def test_peaks_csv_roundtrip(tmp_path, peaks):
    path = tmp_path / "peaks.csv"
    path.write_text(syn.peaks_csv(peaks))
    back = load_peaks(path)
    assert [p.name for p in back] == [p.name for p in peaks]
    for a, b in zip(back, peaks):
        assert a.position.lat == pytest.approx(b.position.lat, abs=1e-12)
        assert a.position.alt == b.position.alt


def test_peak_requires_altitude():
    with pytest.raises(ValueError):
        Peak("No Alt", GeoPoint(0.0, 0.0))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def test_fixture_eye_elevation_exact(pano):
    assert pano.eye_elevation == 1002.0


def test_fixture_skyline_apex_near_closed_form(pano):
    expected = syn.apparent_elevation_deg(syn.APEX_ALT, pano.eye_elevation, 2700.0)
    assert pano.skyline_at(90.0) == pytest.approx(expected, abs=0.1)


def test_skyline_stays_inside_elevation_window(pano):
    finite = pano.skyline[np.isfinite(pano.skyline)]
    assert finite.size == pano.n_cols  # fixture has terrain all around
    assert finite.min() >= -25.0 and finite.max() <= 25.0


def test_flat_dem_skyline_is_the_horizon_dip():
    cfg = RenderConfig(az_res=0.2, el_res=0.1)
    flat = syn.flat_dem(base=0.0)
    fp = render_panorama(flat, Viewpoint(GeoPoint(46.0, 9.0), 2.0), cfg)
    dip = syn.horizon_dip_deg(2.0)
    assert np.max(np.abs(fp.skyline - dip)) < 0.01


def test_render_is_deterministic(dem):
    cfg = RenderConfig(az_res=0.5, el_res=0.25)
    a = render_panorama(dem, syn.fixture_viewpoint(), cfg)
    b = render_panorama(dem, syn.fixture_viewpoint(), cfg)
    assert np.array_equal(a.skyline, b.skyline, equal_nan=True)
    assert np.array_equal(a.kind, b.kind)


def test_skyline_at_interpolates_cyclically(pano):
    assert pano.skyline_at(0.0) == pano.skyline[0]
    assert pano.skyline_at(360.0) == pano.skyline[0]
    mid = pano.skyline_at(360.0 - pano.az_res / 2.0)
    lo, hi = sorted((pano.skyline[-1], pano.skyline[0]))
    assert lo - 1e-9 <= mid <= hi + 1e-9


def test_panorama_cells_expose_attributes(pano):
    col = int(round(90.0 / pano.az_res))
    sky_row = pano.n_rows - 1
    assert pano.cell(sky_row, col).distance is None
    ground_row = int((0.0 - pano.el_min) / pano.el_res)
    cell = pano.cell(ground_row, col)
    assert cell.distance is not None and cell.distance > 0
    assert cell.ground is not None


def test_peak_bearing_due_east(dem):
    vp = syn.fixture_viewpoint()
    bearing, el, dist = peak_bearing(vp, 1002.0, syn.fixture_peaks()[0])
    assert bearing == pytest.approx(90.0, abs=1e-9)
    assert dist == pytest.approx(2700.0, abs=1e-6)
    assert el == pytest.approx(
        syn.apparent_elevation_deg(syn.APEX_ALT, 1002.0, 2700.0), abs=1e-9
    )


def test_project_peaks_finds_visible_hides_occluded(pano, peaks):
    cfg = RenderConfig()
    marks = project_peaks(pano, peaks, cfg)
    names = [m[0].name for m in marks]
    assert "Cone Peak" in names and "Ridge Point" in names
    assert "Hidden Knoll" not in names
    cone = next(m for m in marks if m[0].name == "Cone Peak")
    assert cone[1] == pytest.approx(90.0, abs=1e-6)


def test_panorama_exports(pano):
    sidecar = panorama_sidecar(pano)
    assert sidecar["az_res"] == pano.az_res
    assert len(sidecar["skyline"]) == pano.n_cols
    png = panorama_to_png(pano)
    img = decode_image(png)
    assert (img.height, img.width) == (pano.n_rows, pano.n_cols)
