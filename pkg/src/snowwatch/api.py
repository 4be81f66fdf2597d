"""HTTP JSON API: thin adapters over the store and pipeline.

Handlers are stateless; uploads enqueue work for a small pool of worker
threads started with the app. Every error is an `{code, message}` envelope
with status in {400, 404, 409, 422, 500}.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from contextlib import asynccontextmanager
from datetime import datetime, time as dtime, timezone

from fastapi import FastAPI, File, Form, Query, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from . import alignment as al
from . import ingestion as ing
from . import vision as vis
from .config import ServiceConfig
from .pipeline import Pipeline
from .store import MediaQuery, NotFoundError, item_to_json

logger = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _parse_bbox(raw: str) -> tuple[float, float, float, float]:
    try:
        parts = [float(x) for x in raw.split(",")]
    except ValueError:
        parts = []
    if len(parts) != 4:
        raise ApiError(400, "bad_request", "bbox must be 'lat_min,lon_min,lat_max,lon_max'")
    lat0, lon0, lat1, lon1 = parts
    if lat0 > lat1 or lon0 > lon1:
        raise ApiError(400, "bad_request", "bbox coordinates out of order")
    return lat0, lon0, lat1, lon1


def _parse_ts(raw: str, name: str) -> datetime:
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise ApiError(400, "bad_request", f"{name} must be an ISO date/datetime")
    return ts if ts.tzinfo else ts.replace(tzinfo=timezone.utc)


def _snow_json(rec) -> dict:
    return {
        "media_id": rec.media_id,
        "timestamp": rec.timestamp.astimezone(timezone.utc).isoformat(),
        "region": rec.region,
        "snow_index": rec.snow_index,
        "eligible_pixels": rec.eligible_pixels,
    }


def _worker_loop(pipe: Pipeline, jobs: "queue.Queue[str]", stop: threading.Event) -> None:
    while not stop.is_set():
        try:
            media_id = jobs.get(timeout=0.2)
        except queue.Empty:
            continue
        try:
            pipe.process_item(media_id)
        except Exception:
            logger.exception("worker failed on %s", media_id)
        finally:
            jobs.task_done()


def _poller_loop(pipe: Pipeline, stop: threading.Event) -> None:
    interval = min((cam.poll_interval for cam in pipe.cfg.webcams), default=60.0)
    while not stop.wait(interval):
        try:
            pipe.poll_webcams()
        except Exception:
            logger.exception("webcam poll failed")


def create_app(cfg: ServiceConfig, pipeline: Pipeline | None = None,
               start_pollers: bool = False) -> FastAPI:
    pipe = pipeline if pipeline is not None else Pipeline(cfg)
    jobs: "queue.Queue[str]" = queue.Queue()
    stop = threading.Event()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        threads = [
            threading.Thread(target=_worker_loop, args=(pipe, jobs, stop), daemon=True)
            for _ in range(max(1, cfg.workers))
        ]
        if start_pollers and cfg.webcams:
            threads.append(threading.Thread(target=_poller_loop, args=(pipe, stop), daemon=True))
        for t in threads:
            t.start()
        # Recover items stranded in NEW by a previous shutdown.
        for media_id in pipe.store.all_ids():
            if pipe.store.get(media_id).state == "NEW":
                jobs.put(media_id)
        try:
            yield
        finally:
            stop.set()
            for t in threads:
                t.join(timeout=5.0)

    app = FastAPI(title="snowwatch", lifespan=lifespan)
    app.state.pipeline = pipe
    app.state.jobs = jobs

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={"code": "validation_error", "message": str(exc.errors())})

    @app.exception_handler(Exception)
    async def unhandled_handler(_request: Request, exc: Exception):
        logger.exception("unhandled error")
        return JSONResponse(status_code=500, content={"code": "internal", "message": str(exc)})

    def get_item(media_id: str) -> ing.MediaItem:
        try:
            return pipe.store.get(media_id)
        except NotFoundError:
            raise ApiError(404, "not_found", f"unknown media id {media_id}")

    def artifact_json(media_id: str, name: str):
        path = pipe.store.artifact_path(media_id, name)
        if path is None:
            return None
        return json.loads(path.read_text())

    # -- media ---------------------------------------------------------------

    @app.post("/api/photos", status_code=201)
    async def upload_photo(
        response: Response,
        image: UploadFile = File(...),
        sidecar: str | None = Form(None),
    ):
        data = await image.read()
        meta = None
        if sidecar:
            try:
                meta = json.loads(sidecar)
            except json.JSONDecodeError:
                raise ApiError(422, "sidecar_invalid", "sidecar must be JSON")
            if not isinstance(meta, dict):
                raise ApiError(422, "sidecar_invalid", "sidecar must be a JSON object")
        try:
            item, created = pipe.ingest_photo(data, sidecar=meta, source=ing.UPLOAD)
        except vis.DecodeError as exc:
            raise ApiError(400, "bad_image", str(exc))
        if created:
            jobs.put(item.id)
        else:
            response.status_code = 200
        return {"id": item.id, "state": item.state}

    @app.get("/api/media")
    def list_media(
        kind: str | None = None,
        bbox: str | None = None,
        min_alt: float | None = None,
        time_from: str | None = Query(None, alias="from"),
        time_to: str | None = Query(None, alias="to"),
        peak: str | None = None,
        state: str | None = None,
        offset: int = 0,
        limit: int = 100,
    ):
        if kind is not None and kind not in (ing.PHOTO, ing.WEBCAM_FRAME):
            raise ApiError(400, "bad_request", f"unknown kind {kind}")
        if state is not None and state not in ("NEW", "FILTERED_OUT", "ALIGNED", "MASKED", "FAILED"):
            raise ApiError(400, "bad_request", f"unknown state {state}")
        try:
            q = MediaQuery(
                kind=kind,
                bbox=_parse_bbox(bbox) if bbox else None,
                min_alt=min_alt,
                time_from=_parse_ts(time_from, "from") if time_from else None,
                time_to=_parse_ts(time_to, "to") if time_to else None,
                peak=peak,
                state=state,
                offset=offset,
                limit=limit,
            )
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc))
        items, total = pipe.store.query(q)
        docs = []
        for item in items:
            doc = item_to_json(item)
            doc["peaks"] = pipe.store.peaks_for(item.id)
            rec = pipe.store.latest_snow(item.id)
            doc["snow_index"] = rec.snow_index if rec else None
            docs.append(doc)
        return {"items": docs, "total": total}

    @app.get("/api/media/{media_id}")
    def media_detail(media_id: str):
        item = get_item(media_id)
        doc = item_to_json(item)
        doc["peaks"] = pipe.store.peaks_for(media_id)
        doc["peak_marks"] = artifact_json(media_id, "peaks.json") or []
        active = pipe.store.alignment(media_id)
        doc["alignment"] = active.to_json() if active else None
        rec = pipe.store.latest_snow(media_id)
        doc["snow"] = _snow_json(rec) if rec else None
        doc["attributes"] = artifact_json(media_id, "attributes.json")
        return doc

    @app.get("/api/media/{media_id}/image")
    def media_image(media_id: str):
        get_item(media_id)
        try:
            data = pipe.store.payload(media_id)
        except NotFoundError:
            raise ApiError(404, "not_found", "payload missing")
        mime = "image/png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "image/jpeg"
        return Response(content=data, media_type=mime)

    @app.get("/api/media/{media_id}/mask.png")
    def media_mask(media_id: str):
        get_item(media_id)
        path = pipe.store.artifact_path(media_id, "mask.png")
        if path is None:
            raise ApiError(404, "mask_not_ready", "mask has not been computed yet")
        return Response(content=path.read_bytes(), media_type="image/png")

    # -- alignment ---------------------------------------------------------------

    @app.get("/api/media/{media_id}/alignment")
    def get_alignment(media_id: str):
        get_item(media_id)
        auto = pipe.store.alignment(media_id, al.AUTO)
        manual = pipe.store.alignment(media_id, al.MANUAL)
        active = manual or auto
        return {
            "active": active.to_json() if active else None,
            "auto": auto.to_json() if auto else None,
            "manual": manual.to_json() if manual else None,
        }

    @app.put("/api/media/{media_id}/alignment")
    def put_alignment(media_id: str, body: dict):
        item = get_item(media_id)
        if item.state not in ("ALIGNED", "MASKED"):
            raise ApiError(409, "not_aligned", f"item is in state {item.state}")
        if ("pose" in body) == ("warp" in body):
            raise ApiError(422, "correction_invalid", "body must contain exactly one of pose, warp")
        warp = None
        if "pose" in body:
            raw = body["pose"]
            try:
                pose = al.CameraPose(float(raw["yaw"]), float(raw["pitch"]), float(raw["hfov"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(422, "pose_invalid", f"invalid pose: {exc}")
        else:
            auto = pipe.store.alignment(media_id, al.AUTO)
            if auto is None:
                raise ApiError(409, "not_aligned", "no automatic alignment to warp")
            pose = auto.pose
            try:
                points = tuple(tuple(float(v) for v in p) for p in body["warp"]["points"])
                warp = al.WarpMap(points)
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(422, "warp_invalid", f"invalid warp: {exc}")
        old = pipe.store.latest_snow(media_id)
        result, record = pipe.submit_manual_alignment(media_id, pose, warp)
        return {
            "alignment": result.to_json(),
            "old_index": old.snow_index if old else None,
            "new_index": record.snow_index,
        }

    # -- aggregates ---------------------------------------------------------------

    @app.get("/api/heatmap")
    def heatmap(bbox: str, cell: float):
        box = _parse_bbox(bbox)
        if cell <= 0:
            raise ApiError(400, "bad_request", "cell must be positive")
        grid = pipe.store.heatmap(box, cell)
        cells = [
            [iy, ix, n]
            for iy, row in enumerate(grid["counts"])
            for ix, n in enumerate(row)
            if n > 0
        ]
        return {
            "bbox": grid["bbox"],
            "cell": grid["cell"],
            "rows": grid["rows"],
            "cols": grid["cols"],
            "cells": cells,
        }

    @app.get("/api/webcams")
    def webcams():
        return {
            "webcams": [
                {
                    "id": cam.id,
                    "lat": cam.lat,
                    "lon": cam.lon,
                    "yaw": cam.yaw,
                    "pitch": cam.pitch,
                    "hfov": cam.hfov,
                    "frame_width": cam.frame_width,
                    "frame_height": cam.frame_height,
                    "poll_interval": cam.poll_interval,
                }
                for cam in cfg.webcams
            ]
        }

    @app.get("/api/webcams/{webcam_id}/frames")
    def webcam_frames(webcam_id: str, date: str | None = None):
        if webcam_id not in {cam.id for cam in cfg.webcams}:
            raise ApiError(404, "not_found", f"unknown webcam {webcam_id}")
        t0 = t1 = None
        if date:
            try:
                day = datetime.strptime(date, "%Y-%m-%d").date()
            except ValueError:
                raise ApiError(400, "bad_request", "date must be YYYY-MM-DD")
            t0 = datetime.combine(day, dtime.min, tzinfo=timezone.utc)
            t1 = datetime.combine(day, dtime.max, tzinfo=timezone.utc)
        items, _ = pipe.store.query(MediaQuery(
            kind=ing.WEBCAM_FRAME, time_from=t0, time_to=t1, limit=10_000,
        ))
        frames = []
        for item in sorted(
            (i for i in items if i.webcam_id == webcam_id),
            key=lambda i: (i.taken_at or datetime.fromtimestamp(0, tz=timezone.utc), i.id),
        ):
            weather = artifact_json(item.id, "weather.json") or {}
            rec = pipe.store.latest_snow(item.id)
            frames.append({
                "id": item.id,
                "taken_at": item.taken_at.astimezone(timezone.utc).isoformat() if item.taken_at else None,
                "state": item.state,
                "visibility": weather.get("visibility"),
                "usable": weather.get("usable"),
                "snow_index": rec.snow_index if rec else None,
            })
        return {"webcam_id": webcam_id, "frames": frames}

    @app.get("/api/snowindex")
    def snowindex(region: str | None = None,
                  time_from: str | None = Query(None, alias="from"),
                  time_to: str | None = Query(None, alias="to")):
        records = pipe.store.snow_series(
            region or cfg.region.name,
            _parse_ts(time_from, "from") if time_from else None,
            _parse_ts(time_to, "to") if time_to else None,
        )
        return {"records": [_snow_json(r) for r in records]}

    @app.get("/api/peaks")
    def peaks(bbox: str | None = None):
        box = _parse_bbox(bbox) if bbox else None
        out = []
        for peak in pipe.peaks:
            p = peak.position
            if box is not None and not (box[0] <= p.lat <= box[2] and box[1] <= p.lon <= box[3]):
                continue
            out.append({"name": peak.name, "lat": p.lat, "lon": p.lon, "alt": p.alt})
        return {"peaks": out}

    return app
