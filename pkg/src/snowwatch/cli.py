"""Command line harness over the pipeline stages.

Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

from . import alignment as al
from . import snowcover as sc
from . import vision as vis
from .config import (
    AlignConfig,
    MaskConfig,
    RegionConfig,
    RenderConfig,
    ServiceConfig,
    VisionConfig,
    load_service_config,
)
from .terrain import (
    GeoPoint,
    Viewpoint,
    export_panorama,
    load_dem,
    load_peaks,
    project_peaks,
    render_panorama,
)


def _render(args: argparse.Namespace) -> int:
    dem = load_dem(args.dem)
    vp = Viewpoint(GeoPoint(args.lat, args.lon), args.eye_height)
    pano = render_panorama(dem, vp, RenderConfig())
    if args.peaks:
        project_peaks(pano, load_peaks(args.peaks), RenderConfig())
    out = Path(args.out)
    export_panorama(pano, out, out.with_suffix(".json"))
    print(json.dumps({"png": str(out), "sidecar": str(out.with_suffix('.json')),
                      "peaks": [p.name for p, _, _ in pano.peak_marks]}))
    return 0


def _align(args: argparse.Namespace) -> int:
    dem = load_dem(args.dem)
    data = Path(args.photo).read_bytes()
    img = vis.decode_image(data)
    from .ingestion import hfov_prior, read_exif

    exif = read_exif(data)
    geo = exif.geotag()
    if geo is None:
        if args.lat is None or args.lon is None:
            print("photo has no geotag; pass --lat/--lon", file=sys.stderr)
            return 1
        lat, lon = args.lat, args.lon
    else:
        lat, lon = geo.lat, geo.lon
    vp = Viewpoint(GeoPoint(lat, lon), args.eye_height)
    pano = render_panorama(dem, vp, RenderConfig())
    profile = vis.extract_skyline(img, VisionConfig())
    prior = al.CameraPose(0.0, 0.0, hfov_prior(exif))
    result = al.estimate_pose(profile, pano, prior, AlignConfig())
    print(json.dumps(result.to_json(), indent=2))
    return 0


def _mask(args: argparse.Namespace) -> int:
    dem = load_dem(args.dem)
    data = Path(args.photo).read_bytes()
    img = vis.decode_image(data)
    pose = al.CameraPose(args.yaw, args.pitch, args.hfov)
    vp = Viewpoint(GeoPoint(args.lat, args.lon), args.eye_height)
    pano = render_panorama(dem, vp, RenderConfig())
    mapping = al.build_mapping(pose, img.width, img.height)
    mask = sc.build_mask(img, mapping, pano, MaskConfig())
    Path(args.out).write_bytes(sc.mask_to_png(mask))
    rec = sc.snow_index(mask, MaskConfig(), Path(args.photo).stem,
                        datetime.now().astimezone())
    print(json.dumps({"mask": str(args.out), "snow_index": rec.snow_index,
                      "eligible_pixels": rec.eligible_pixels,
                      "class_counts": mask.class_counts()}))
    return 0


def _pipeline_from(args: argparse.Namespace):
    from .pipeline import Pipeline

    cfg = load_service_config(args.config)
    return Pipeline(cfg)


def _ingest(args: argparse.Namespace) -> int:
    pipe = _pipeline_from(args)
    reports = pipe.ingest_folder(args.folder)
    for r in reports:
        print(json.dumps({"id": r.media_id, "state": r.state, "reason": r.reason,
                          "snow_index": r.snow_index}))
    return 0


def _webcam_poll(args: argparse.Namespace) -> int:
    pipe = _pipeline_from(args)
    reports = pipe.poll_webcams()
    for r in reports:
        print(json.dumps({"id": r.media_id, "state": r.state, "reason": r.reason}))
    return 0


def _index(args: argparse.Namespace) -> int:
    pipe = _pipeline_from(args)
    if args.webcam:
        day = datetime.strptime(args.date, "%Y-%m-%d").date()
        rec = pipe.run_daily_webcam_job(args.webcam, day)
        if rec is None:
            print(json.dumps({"webcam": args.webcam, "date": args.date, "record": None}))
        else:
            print(json.dumps({
                "webcam": args.webcam, "date": args.date,
                "record": {"media_id": rec.media_id, "snow_index": rec.snow_index,
                           "eligible_pixels": rec.eligible_pixels},
            }))
        return 0
    records = pipe.store.snow_series(args.region or pipe.cfg.region.name)
    for rec in records:
        print(json.dumps({
            "media_id": rec.media_id,
            "timestamp": rec.timestamp.isoformat(),
            "snow_index": rec.snow_index,
            "eligible_pixels": rec.eligible_pixels,
        }))
    return 0


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app
    from .pipeline import Pipeline

    cfg = load_service_config(args.config)
    if args.port is not None:
        cfg.port = args.port
    app = create_app(cfg, Pipeline(cfg), start_pollers=True)
    uvicorn.run(app, host=args.host, port=cfg.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snowwatch")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a DEM panorama")
    p.add_argument("--dem", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--eye-height", type=float, default=2.0)
    p.add_argument("--peaks")
    p.add_argument("--out", default="panorama.png")
    p.set_defaults(func=_render)

    p = sub.add_parser("align", help="estimate a photo's camera pose")
    p.add_argument("--photo", required=True)
    p.add_argument("--dem", required=True)
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)
    p.add_argument("--eye-height", type=float, default=2.0)
    p.set_defaults(func=_align)

    p = sub.add_parser("mask", help="build an environmental mask")
    p.add_argument("--photo", required=True)
    p.add_argument("--dem", required=True)
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--yaw", type=float, required=True)
    p.add_argument("--pitch", type=float, required=True)
    p.add_argument("--hfov", type=float, required=True)
    p.add_argument("--eye-height", type=float, default=2.0)
    p.add_argument("--out", default="mask.png")
    p.set_defaults(func=_mask)

    p = sub.add_parser("ingest", help="ingest a folder of photos")
    p.add_argument("--config")
    p.add_argument("--folder", required=True)
    p.set_defaults(func=_ingest)

    p = sub.add_parser("webcam-poll", help="poll configured webcams once")
    p.add_argument("--config")
    p.set_defaults(func=_webcam_poll)

    p = sub.add_parser("index", help="run the daily webcam job or list the series")
    p.add_argument("--config")
    p.add_argument("--webcam")
    p.add_argument("--date", help="YYYY-MM-DD, required with --webcam")
    p.add_argument("--region")
    p.set_defaults(func=_index)

    p = sub.add_parser("serve", help="run pollers, workers and the HTTP API")
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.set_defaults(func=_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize other codes
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    if args.command == "index" and args.webcam and not args.date:
        print("error: --date is required with --webcam", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
