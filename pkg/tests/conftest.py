"""Shared fixtures: the synthetic DEM, rendered panoramas, a trained
mountain classifier, and a factory for self-contained service configs."""

from __future__ import annotations

import json

import pytest

from snowwatch import synthetic as syn
from snowwatch.config import RenderConfig, load_service_config
from snowwatch.terrain import render_panorama, save_dem
from snowwatch.vision import save_model

# 2 * atan(18 / 36): the FOV prior read back from a 36 mm-equivalent lens.
F35_HFOV = 53.13010235415598


@pytest.fixture(scope="session")
def dem():
    return syn.fixture_dem()


@pytest.fixture(scope="session")
def pano(dem):
    """Panorama from the valley-centre viewpoint (the webcam spot)."""
    return render_panorama(dem, syn.fixture_viewpoint(), RenderConfig())


@pytest.fixture(scope="session")
def ridge_pano(dem):
    """Panorama from the ridge crest (the photographer spot)."""
    return render_panorama(dem, syn.ridge_viewpoint(), RenderConfig())


@pytest.fixture(scope="session")
def peaks():
    return syn.fixture_peaks()


@pytest.fixture(scope="session")
def model(pano, ridge_pano):
    return syn.fixture_classifier([pano, ridge_pano])


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory, dem, peaks, model):
    """Immutable on-disk fixture assets shared by every service config."""
    d = tmp_path_factory.mktemp("assets")
    save_dem(dem, d / "dem.asc")
    (d / "peaks.csv").write_text(syn.peaks_csv(peaks))
    save_model(model, d / "classifier.json")
    return d


@pytest.fixture
def make_config(fixture_dir, tmp_path):
    """Build a ServiceConfig with a fresh data dir per call."""
    counter = {"n": 0}

    def _make(webcams: list[dict] | None = None, **overrides):
        counter["n"] += 1
        root = tmp_path / f"svc{counter['n']}"
        (root / "data").mkdir(parents=True)
        raw = {
            "dem_path": str(fixture_dir / "dem.asc"),
            "peaks_path": str(fixture_dir / "peaks.csv"),
            "classifier_path": str(fixture_dir / "classifier.json"),
            "data_dir": str(root / "data"),
            "region": {
                "lat_min": -0.5,
                "lat_max": 0.5,
                "lon_min": 8.5,
                "lon_max": 9.5,
                "min_photographer_alt": 1200.0,
                "name": "fixture",
            },
            "webcams": webcams or [],
        }
        raw.update(overrides)
        path = root / "config.json"
        path.write_text(json.dumps(raw))
        return load_service_config(str(path))

    return _make


@pytest.fixture
def announce(capsys):
    """Print one always-visible pass/fail line per acceptance criterion."""

    def _announce(criterion: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        suffix = f": {detail}" if detail else ""
        with capsys.disabled():
            print(f"\n[ACCEPTANCE] {status} {criterion}{suffix}", flush=True)

    return _announce
