#!/usr/bin/env python3
"""Generate the standard synthetic fixture set into a directory.

Writes the valley/cone/ridge DEM, the 3-entry peak catalog, a trained
mountain classifier, a service config, a handful of geotagged photos and
one day of webcam frames. The result is a self-contained data directory
that `snowwatch serve --config <dir>/config.json` can run against.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from snowwatch import synthetic as syn
from snowwatch.alignment import CameraPose
from snowwatch.config import RenderConfig
from snowwatch.terrain import render_panorama, save_dem
from snowwatch.vision import save_model


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="fixtures", help="output directory")
    args = ap.parse_args()
    out = Path(args.out)
    (out / "photos").mkdir(parents=True, exist_ok=True)
    (out / "webcam").mkdir(parents=True, exist_ok=True)
    (out / "data").mkdir(parents=True, exist_ok=True)

    dem = syn.fixture_dem()
    save_dem(dem, out / "dem.asc")
    (out / "peaks.csv").write_text(syn.peaks_csv(syn.fixture_peaks()))

    ridge_view = syn.ridge_viewpoint()
    ridge_lat = ridge_view.position.lat
    ridge_lon = ridge_view.position.lon
    pano = render_panorama(dem, syn.fixture_viewpoint(), RenderConfig())
    ridge_pano = render_panorama(dem, ridge_view, RenderConfig())
    model = syn.fixture_classifier([pano, ridge_pano])
    save_model(model, out / "classifier.json")

    hfov = 53.13010235415598  # EXIF prior for a 36 mm-equivalent lens
    photos = []
    img = syn.synth_photo(ridge_pano, CameraPose(10.0, 8.0, hfov), 480, 640)
    photos.append(img)
    snowy = syn.synth_photo(ridge_pano, CameraPose(0.0, 5.0, hfov), 480, 640)
    block = np.zeros((640, 480), dtype=bool)
    block[:, 200:380] = True
    photos.append(syn.paint_pixels(snowy, block))
    photos.append(syn.uniform_frame(480, 640, 140))  # fog: classifier rejects
    for i, img in enumerate(photos):
        data = syn.exif_jpeg(
            img, lat=ridge_lat, lon=ridge_lon, alt=1792.0,
            taken_at=datetime(2026, 8, 10, 9 + i, 0, tzinfo=timezone.utc),
            focal_35mm=36,
        )
        (out / "photos" / f"photo_{i}.jpg").write_bytes(data)

    # One day of webcam frames: clear morning, foggy afternoon.
    cam_pose = CameraPose(90.0, 10.0, 50.0)
    base = syn.synth_photo(pano, cam_pose, 400, 300)
    frames = [
        ("frame_0900.jpg", base),
        ("frame_1100.jpg", syn.corrupt_columns(base, [(50, 90)])),
        ("frame_1400.jpg", syn.uniform_frame(400, 300, 128)),
    ]
    for i, (name, img) in enumerate(frames):
        path = out / "webcam" / name
        path.write_bytes(syn.plain_png(img))
        ts = datetime(2026, 8, 10, 9 + 2 * i, 0, tzinfo=timezone.utc).timestamp()
        os.utime(path, (ts, ts))

    config = {
        "dem_path": str(out / "dem.asc"),
        "peaks_path": str(out / "peaks.csv"),
        "data_dir": str(out / "data"),
        "classifier_path": str(out / "classifier.json"),
        "region": {
            "lat_min": -0.5, "lat_max": 0.5,
            "lon_min": 8.5, "lon_max": 9.5,
            "min_photographer_alt": 1200.0,
            "name": "fixture",
        },
        "webcams": [{
            "id": "cam1",
            "lat": 0.0, "lon": 9.0, "eye_height": 2.0,
            "yaw": 90.0, "pitch": 10.0, "hfov": 50.0,
            "frame_width": 400, "frame_height": 300,
            "source": str(out / "webcam"),
            "poll_interval": 60.0,
        }],
        "port": 8000,
        "workers": 2,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2))
    print(f"fixtures written to {out.resolve()}")
    print(f"  serve with: snowwatch serve --config {out / 'config.json'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
