#!/usr/bin/env python3
"""End-to-end walkthrough on a throwaway fixture directory.

Generates fixtures, ingests the photo folder, polls the webcam drop folder,
runs the daily aggregation, applies a manual correction to one photo and
prints the snow-index series. Mirrors what the HTTP service does, without
the server.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from datetime import date
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from snowwatch.alignment import CameraPose
from snowwatch.config import load_service_config
from snowwatch.pipeline import Pipeline
from snowwatch.store import MediaQuery


def main() -> int:
    with tempfile.TemporaryDirectory(prefix="snowwatch-demo-") as tmp:
        print("== generating fixtures ==")
        subprocess.run(
            [sys.executable, str(Path(__file__).with_name("make_fixtures.py")), "--out", tmp],
            check=True,
        )
        cfg = load_service_config(Path(tmp) / "config.json")
        pipe = Pipeline(cfg)

        print("\n== ingesting photo folder ==")
        for report in pipe.ingest_folder(str(Path(tmp) / "photos")):
            print(f"  {report.media_id}: {report.state}"
                  + (f" ({report.reason})" if report.reason else "")
                  + (f" snow_index={report.snow_index:.3f}" if report.snow_index is not None else ""))

        print("\n== polling webcam ==")
        for report in pipe.poll_webcams():
            print(f"  {report.media_id}: {report.state}"
                  + (f" ({report.reason})" if report.reason else ""))

        print("\n== daily webcam aggregation ==")
        rec = pipe.run_daily_webcam_job("cam1", date(2026, 8, 10))
        if rec is None:
            print("  no usable frame")
        else:
            print(f"  clearest frame {rec.media_id}: snow_index={rec.snow_index}")

        print("\n== manual correction ==")
        masked, _ = pipe.store.query(MediaQuery(kind="PHOTO", state="MASKED", limit=1))
        if masked:
            media_id = masked[0].id
            auto = pipe.store.alignment(media_id)
            pose = CameraPose((auto.pose.yaw + 1.0) % 360.0, auto.pose.pitch, auto.pose.hfov)
            result, record = pipe.submit_manual_alignment(media_id, pose)
            print(f"  {media_id}: MANUAL yaw={result.pose.yaw:.2f} "
                  f"score={result.score:.3f} new snow_index={record.snow_index}")

        print("\n== snow index series ==")
        for r in pipe.store.snow_series(cfg.region.name):
            print(f"  {r.timestamp.isoformat()}  {r.media_id}  "
                  f"index={'-' if r.snow_index is None else f'{r.snow_index:.3f}'} "
                  f"eligible={r.eligible_pixels}")

        print(json.dumps({"items": pipe.store.count()}, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
