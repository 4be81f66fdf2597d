"""Processing pipeline: NEW media through filtering, alignment and masking.

The pipeline owns a panorama cache (viewpoints rounded to ~100 m collapse
to one render) and drives every state transition through the store, so a
crash mid-step is recoverable from the journal: a retry resumes from the
state the item actually reached.
"""

from __future__ import annotations

import json
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from datetime import date, datetime, time as dtime, timezone
from pathlib import Path

import numpy as np

from . import alignment as al
from . import ingestion as ing
from . import snowcover as sc
from . import vision as vis
from .config import ServiceConfig, WebcamEntry
from .store import MediaQuery, MediaStore
from .terrain import (
    TERRAIN as PANO_TERRAIN,
    DemGrid,
    GeoPoint,
    Panorama,
    Peak,
    Viewpoint,
    load_dem,
    load_peaks,
    project_peaks,
    render_panorama,
)

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
_PANO_CACHE_SIZE = 8

TERMINAL_STATES = ("FILTERED_OUT", "FAILED", "MASKED")


class PipelineError(Exception):
    pass


@dataclass
class ProcessReport:
    media_id: str
    state: str
    reason: str | None = None
    snow_index: float | None = None


def _default_model() -> vis.ClassifierModel:
    """Accept-everything fallback when no trained classifier is configured."""
    weights = np.array([0.0] * vis.N_FEATURES + [1.0])
    return vis.ClassifierModel(weights, vis.FEATURE_VERSION)


class Pipeline:
    def __init__(self, cfg: ServiceConfig, store: MediaStore | None = None,
                 dem: DemGrid | None = None, peaks: list[Peak] | None = None) -> None:
        self.cfg = cfg
        self.dem = dem if dem is not None else load_dem(cfg.dem_path)
        self.peaks = peaks if peaks is not None else load_peaks(cfg.peaks_path)
        self.store = store if store is not None else MediaStore(cfg.data_dir)
        if cfg.classifier_path and Path(cfg.classifier_path).exists():
            self.model = vis.load_model(cfg.classifier_path)
        else:
            self.model = _default_model()
        self._pano_cache: OrderedDict[tuple, Panorama] = OrderedDict()
        self._webcams = {cam.id: cam for cam in cfg.webcams}

    # -- panorama cache -----------------------------------------------------

    def panorama_for(self, lat: float, lon: float, eye_height: float) -> Panorama:
        key = (round(lat, 3), round(lon, 3), round(eye_height, 2))
        cached = self._pano_cache.get(key)
        if cached is not None:
            self._pano_cache.move_to_end(key)
            return cached
        vp = Viewpoint(GeoPoint(lat, lon), eye_height)
        pano = render_panorama(self.dem, vp, self.cfg.render)
        project_peaks(pano, self.peaks, self.cfg.render)
        self._pano_cache[key] = pano
        while len(self._pano_cache) > _PANO_CACHE_SIZE:
            self._pano_cache.popitem(last=False)
        return pano

    # -- ingestion ------------------------------------------------------------

    def ingest_photo(self, data: bytes, sidecar: dict | None = None,
                     source: str = ing.UPLOAD) -> tuple[ing.MediaItem, bool]:
        """Decode, read EXIF and create a NEW photo item; duplicate payloads
        return the existing item with created=False."""
        vis.decode_image(data)  # raise DecodeError before anything is stored
        exif = ing.read_exif(data, sidecar)
        item = ing.MediaItem(
            id=ing.new_media_id(),
            kind=ing.PHOTO,
            source=source,
            geotag=exif.geotag(),
            taken_at=exif.taken_at or datetime.now(timezone.utc),
            exif=exif,
        )
        ext = "png" if data[:8] == b"\x89PNG\r\n\x1a\n" else "jpg"
        return self.store.add_item(item, data, ext)

    def ingest_folder(self, folder: str) -> list[ProcessReport]:
        reports = []
        for entry in ing.FilesystemSource(folder).list_entries():
            if entry.identity in self.store.seen_identities:
                continue
            self.store.mark_identity(entry.identity)
            try:
                data = entry.fetch()
                item, created = self.ingest_photo(data, source=ing.CRAWL)
            except (vis.DecodeError, OSError) as exc:
                logger.warning("skipping %s: %s", entry.name, exc)
                continue
            if created:
                reports.append(self.process_item(item.id))
        return reports

    # -- processing ------------------------------------------------------------

    def process_item(self, media_id: str) -> ProcessReport:
        """Drive one item to a terminal state with bounded retries.

        Each retry resumes from the journaled state, so a failure after the
        ALIGNED transition re-runs only the masking step.
        """
        last_error: Exception | None = None
        for attempt in range(1, MAX_ATTEMPTS + 1):
            try:
                return self._process_once(media_id)
            except Exception as exc:
                last_error = exc
                logger.warning("processing %s attempt %d failed: %s", media_id, attempt, exc)
        item = self.store.get(media_id)
        if (item.state, "FAILED") in ing.STATE_TRANSITIONS:
            self.store.transition(media_id, "FAILED", reason=str(last_error))
            return ProcessReport(media_id, "FAILED", str(last_error))
        return ProcessReport(media_id, item.state, str(last_error))

    def _process_once(self, media_id: str) -> ProcessReport:
        item = self.store.get(media_id)
        if item.state in TERMINAL_STATES:
            return ProcessReport(media_id, item.state, item.reason)
        data = self.store.payload(media_id)
        img = vis.decode_image(data)

        if item.kind == ing.WEBCAM_FRAME:
            if item.state != "NEW":
                return ProcessReport(media_id, item.state, item.reason)
            return self._process_frame(item, img)

        if item.state == "NEW":
            reason = ing.filter_photo(item, img, self.dem, self.cfg.region, self.model)
            if reason is not None:
                self.store.transition(media_id, "FILTERED_OUT", reason=reason, expect="NEW")
                return ProcessReport(media_id, "FILTERED_OUT", reason)

            geo = item.geotag
            assert geo is not None  # filter_photo guarantees it
            pano = self.panorama_for(geo.lat, geo.lon, self.cfg.eye_height)
            profile = vis.extract_skyline(img, self.cfg.vision)
            prior = al.CameraPose(0.0, 0.0, ing.hfov_prior(item.exif))
            try:
                result = al.estimate_pose(profile, pano, prior, self.cfg.align)
            except al.AlignmentError as exc:
                self.store.transition(media_id, "FAILED", reason=str(exc), expect="NEW")
                return ProcessReport(media_id, "FAILED", str(exc))
            self.store.set_alignment(media_id, result)
            self._record_peaks(media_id, pano)
            self.store.transition(media_id, "ALIGNED", expect="NEW")
            item = self.store.get(media_id)

        # state == ALIGNED: mask with the active alignment
        geo = item.geotag
        if geo is None:
            self.store.transition(media_id, "FAILED", reason="no geotag", expect="ALIGNED")
            return ProcessReport(media_id, "FAILED", "no geotag")
        pano = self.panorama_for(geo.lat, geo.lon, self.cfg.eye_height)
        result = self.store.alignment(media_id)
        if result is None:
            self.store.transition(media_id, "FAILED", reason="no alignment", expect="ALIGNED")
            return ProcessReport(media_id, "FAILED", "no alignment")
        record = self._mask_item(media_id, img, pano, result)
        self.store.transition(media_id, "MASKED", expect="ALIGNED")
        return ProcessReport(media_id, "MASKED", None, record.snow_index)

    def _process_frame(self, item: ing.MediaItem, img: vis.ImageBuffer) -> ProcessReport:
        """Webcam frames skip relevance filtering; a weather score decides
        whether the frame is usable. Usable frames take the camera's
        calibrated pose and rest at ALIGNED until the daily job masks the
        clearest one."""
        cam = self._webcams.get(item.webcam_id or "")
        if cam is None:
            self.store.transition(item.id, "FAILED", reason="unknown webcam", expect="NEW")
            return ProcessReport(item.id, "FAILED", "unknown webcam")
        expected = self._expected_skyline(cam)
        score = vis.weather_score(img, expected, self.cfg.vision)
        self.store.save_artifact(
            item.id,
            "weather.json",
            json.dumps({"visibility": score.visibility, "usable": score.usable}).encode(),
        )
        if not score.usable:
            self.store.transition(
                item.id, "FILTERED_OUT",
                reason=f"poor visibility ({score.visibility:.2f})", expect="NEW",
            )
            return ProcessReport(item.id, "FILTERED_OUT", "poor visibility")
        pose = al.CameraPose(cam.yaw % 360.0, cam.pitch, cam.hfov)
        result = al.AlignmentResult(pose, 0.0, 1.0, al.AUTO, None, False)
        self.store.set_alignment(item.id, result)
        self._record_peaks(item.id, self.panorama_for(cam.lat, cam.lon, cam.eye_height))
        self.store.transition(item.id, "ALIGNED", expect="NEW")
        return ProcessReport(item.id, "ALIGNED", None)

    def _expected_skyline(self, cam: WebcamEntry) -> list[float | None]:
        if cam.expected_skyline:
            return list(cam.expected_skyline)
        # Derive the expected pixel skyline from the DEM and calibrated pose.
        pano = self.panorama_for(cam.lat, cam.lon, cam.eye_height)
        pose = al.CameraPose(cam.yaw % 360.0, cam.pitch, cam.hfov)
        return expected_skyline_rows(pano, pose, cam.frame_width, cam.frame_height)

    def _record_peaks(self, media_id: str, pano: Panorama) -> None:
        marks = [
            {
                "name": peak.name,
                "azimuth": az,
                "elevation": el,
                "lat": peak.position.lat,
                "lon": peak.position.lon,
                "alt": peak.position.alt,
            }
            for peak, az, el in pano.peak_marks
        ]
        self.store.set_peaks(media_id, [m["name"] for m in marks])
        self.store.save_artifact(media_id, "peaks.json", json.dumps(marks, indent=2).encode())

    def _mask_item(self, media_id: str, img: vis.ImageBuffer, pano: Panorama,
                   result: al.AlignmentResult) -> sc.SnowIndexRecord:
        mapping = al.build_mapping(result.pose, img.width, img.height)
        if result.warp is not None:
            mapping = al.apply_warp(mapping, result.warp)
        mask = sc.build_mask(img, mapping, pano, self.cfg.mask)
        item = self.store.get(media_id)
        record = sc.snow_index(
            mask, self.cfg.mask, media_id,
            item.taken_at or datetime.now(timezone.utc),
            self.cfg.region.name,
        )
        self._save_mask_artifacts(media_id, mask, mapping, pano)
        self.store.record_snow(record)
        return record

    def _save_mask_artifacts(self, media_id: str, mask: sc.EnvironmentalMask,
                             mapping: al.PixelMapping, pano: Panorama) -> None:
        self.store.save_artifact(media_id, "mask.png", sc.mask_to_png(mask))
        self.store.save_artifact(
            media_id, "mask.json", json.dumps(sc.mask_sidecar(mask), indent=2).encode()
        )
        grid = attribute_grid(mapping, pano)
        self.store.save_artifact(media_id, "attributes.json", json.dumps(grid).encode())

    # -- manual correction ------------------------------------------------------

    def submit_manual_alignment(
        self,
        media_id: str,
        pose: al.CameraPose,
        warp: al.WarpMap | None = None,
    ) -> tuple[al.AlignmentResult, sc.SnowIndexRecord]:
        """Store a MANUAL alignment and re-mask the photo with it.

        The manual result supersedes AUTO everywhere the active alignment
        is used; the AUTO record stays retrievable. Returns the stored
        result and the recomputed snow record.
        """
        item = self.store.get(media_id)
        if item.kind != ing.PHOTO:
            raise PipelineError("manual alignment applies to photos only")
        if item.state not in ("ALIGNED", "MASKED"):
            raise PipelineError(f"cannot correct an item in state {item.state}")
        geo = item.geotag
        if geo is None:
            raise PipelineError("item has no geotag")
        data = self.store.payload(media_id)
        img = vis.decode_image(data)
        pano = self.panorama_for(geo.lat, geo.lon, self.cfg.eye_height)

        profile = vis.extract_skyline(img, self.cfg.vision)
        score = manual_score(profile, pano, pose, warp, img.width, img.height)
        result = al.AlignmentResult(
            pose, score, al.confidence_from_score(score, self.cfg.align.score_scale),
            al.MANUAL, warp, False,
        )
        self.store.set_alignment(media_id, result)
        record = self._mask_item(media_id, img, pano, result)
        self.store.transition(media_id, "MASKED", expect=item.state)
        return result, record

    # -- webcams ---------------------------------------------------------------

    def poll_webcams(self) -> list[ProcessReport]:
        reports: list[ProcessReport] = []
        for cam in self.cfg.webcams:
            adapter = ing.source_for(cam.source)
            seen = self.store.seen_identities
            before = set(seen)
            fetched = ing.poll_webcam(cam, adapter, seen)
            for identity in seen - before:
                self.store.mark_identity(identity)
            for item, data in fetched:
                stored, created = self.store.add_item(item, data, "jpg")
                if created:
                    reports.append(self.process_item(stored.id))
        return reports

    def run_daily_webcam_job(self, webcam_id: str, day: date) -> sc.SnowIndexRecord | None:
        """Pick the clearest usable frame of `day` and record its snow index.

        Returns None (and records nothing) when no usable frame exists.
        Re-running after a pick is already masked reproduces the same
        record rather than promoting a lesser frame.
        """
        cam = self._webcams.get(webcam_id)
        if cam is None:
            raise PipelineError(f"unknown webcam {webcam_id}")
        t0 = datetime.combine(day, dtime.min, tzinfo=timezone.utc)
        t1 = datetime.combine(day, dtime.max, tzinfo=timezone.utc)
        frames = []
        for state in ("ALIGNED", "MASKED"):
            items, _ = self.store.query(MediaQuery(
                kind=ing.WEBCAM_FRAME, time_from=t0, time_to=t1, state=state, limit=10_000,
            ))
            for item in items:
                if item.webcam_id != webcam_id:
                    continue
                weather_path = self.store.artifact_path(item.id, "weather.json")
                if weather_path is None:
                    continue
                w = json.loads(weather_path.read_text())
                score = vis.WeatherScore(w["visibility"], w["usable"])
                img = vis.decode_image(self.store.payload(item.id))
                frames.append((item.id, img, score, item.taken_at))
        if not frames:
            return None
        pano = self.panorama_for(cam.lat, cam.lon, cam.eye_height)
        pose = al.CameraPose(cam.yaw % 360.0, cam.pitch, cam.hfov)
        mapping = al.build_mapping(pose, cam.frame_width, cam.frame_height)
        record = sc.daily_webcam_index(frames, mapping, pano, self.cfg.mask, self.cfg.region.name)
        if record is None:
            return None
        picked = next(f for f in frames if f[0] == record.media_id)
        mask = sc.build_mask(picked[1], mapping, pano, self.cfg.mask)
        self._save_mask_artifacts(record.media_id, mask, mapping, pano)
        self.store.record_snow(record)
        state = self.store.get(record.media_id).state
        self.store.transition(record.media_id, "MASKED", expect=state)
        return record


MAX_ATTRIBUTE_COLS = 256


def attribute_grid(mapping: al.PixelMapping, pano: Panorama) -> dict:
    """Downsampled per-pixel terrain attributes for hover readouts.

    Pixels are sampled on a square stride chosen so the grid has at most
    MAX_ATTRIBUTE_COLS columns; each cell is [distance_m, altitude_m] or
    null where the pixel maps to sky.
    """
    h, w = mapping.height, mapping.width
    stride = max(1, math.ceil(w / MAX_ATTRIBUTE_COLS))
    rs = np.arange(0, h, stride)
    cs = np.arange(0, w, stride)
    az = np.mod(mapping.azimuth[np.ix_(rs, cs)], 360.0)
    el = mapping.elevation[np.ix_(rs, cs)]
    col = np.mod(np.rint(az / pano.az_res).astype(np.int64), pano.n_cols)
    row = np.floor((el - pano.el_min) / pano.el_res).astype(np.int64)
    inside = (row >= 0) & (row < pano.n_rows)
    row_c = np.clip(row, 0, pano.n_rows - 1)
    terrain = inside & (pano.kind[row_c, col] == PANO_TERRAIN)
    dist = pano.distance[row_c, col]
    alt = pano.altitude[row_c, col]
    cells: list[list[float] | None] = []
    for r in range(rs.size):
        for c in range(cs.size):
            if terrain[r, c]:
                cells.append([round(float(dist[r, c]), 1), round(float(alt[r, c]), 1)])
            else:
                cells.append(None)
    return {"stride": stride, "rows": int(rs.size), "cols": int(cs.size), "cells": cells}


def expected_skyline_rows(pano: Panorama, pose: al.CameraPose,
                          width: int, height: int) -> list[float | None]:
    """Pixel row of the DEM skyline in each frame column, None off-frame."""
    mapping = al.build_mapping(pose, width, height)
    rows: list[float | None] = []
    vfov = pose.vfov(width, height)
    half = np.tan(np.radians(vfov / 2.0))
    for c in range(width):
        az = mapping.azimuth[0, c] % 360.0
        el = pano.skyline_at(az)
        if el is None:
            rows.append(None)
            continue
        # invert el = pitch - atan(((r - H/2)/(H/2)) * tan(vfov/2))
        y = np.tan(np.radians(pose.pitch - el)) / half
        r = y * (height / 2.0) + height / 2.0
        rows.append(float(r) if 0 <= r < height else None)
    return rows


def manual_score(profile: vis.SkylineProfile, pano: Panorama, pose: al.CameraPose,
                 warp: al.WarpMap | None, width: int, height: int) -> float:
    """Mean absolute skyline error of a manually supplied pose."""
    mapping = al.build_mapping(pose, width, height)
    if warp is not None:
        mapping = al.apply_warp(mapping, warp)
    cols = np.nonzero(profile.defined)[0]
    if cols.size == 0:
        return float("inf")
    # Warp shifts each column's angles by a constant, so the elevation of a
    # fractional skyline row is the pinhole formula plus that column offset.
    base_el0 = al._elevation_offsets(np.array([0.0]), width, height, pose.hfov)[0]
    errs = []
    for c in cols:
        az = mapping.azimuth[0, int(c)] % 360.0
        ref = pano.skyline_at(az)
        if ref is None or math.isnan(ref):
            continue
        off = mapping.elevation[0, int(c)] - (pose.pitch + base_el0)
        el = pose.pitch + off + al._elevation_offsets(
            np.array([profile.rows[int(c)]]), width, height, pose.hfov
        )[0]
        errs.append(abs(el - ref))
    if not errs:
        return float("inf")
    return float(np.mean(errs))
