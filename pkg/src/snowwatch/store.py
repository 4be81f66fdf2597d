"""File-backed media store.

An append-only JSON-lines journal is the source of truth; per-item meta
files are atomic materializations for external inspection. Opening a store
replays the journal, tolerating a truncated final line from a crashed
writer.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .alignment import AUTO, MANUAL, AlignmentResult
from .ingestion import STATE_TRANSITIONS, ExifMeta, MediaItem
from .snowcover import SnowIndexRecord
from .terrain import GeoPoint


class StoreError(Exception):
    pass


class ConflictError(StoreError):
    """Compare-and-set state transition lost or was illegal."""


class NotFoundError(StoreError):
    pass


@dataclass(frozen=True)
class MediaQuery:
    kind: str | None = None
    bbox: tuple[float, float, float, float] | None = None  # lat0, lon0, lat1, lon1
    min_alt: float | None = None
    time_from: datetime | None = None
    time_to: datetime | None = None
    peak: str | None = None
    state: str | None = None
    offset: int = 0
    limit: int = 100

    def __post_init__(self) -> None:
        if self.offset < 0 or self.limit < 1:
            raise ValueError("offset must be >= 0 and limit >= 1")
        if self.bbox is not None:
            lat0, lon0, lat1, lon1 = self.bbox
            if lat0 > lat1 or lon0 > lon1:
                raise ValueError("bbox must be (lat_min, lon_min, lat_max, lon_max)")


def _iso(ts: datetime | None) -> str | None:
    return None if ts is None else ts.astimezone(timezone.utc).isoformat()


def _parse_ts(s: str | None) -> datetime | None:
    if s is None:
        return None
    ts = datetime.fromisoformat(s)
    return ts if ts.tzinfo else ts.replace(tzinfo=timezone.utc)


def item_to_json(item: MediaItem) -> dict:
    geo = item.geotag
    return {
        "id": item.id,
        "kind": item.kind,
        "source": item.source,
        "state": item.state,
        "reason": item.reason,
        "geotag": None if geo is None else {"lat": geo.lat, "lon": geo.lon, "alt": geo.alt},
        "taken_at": _iso(item.taken_at),
        "exif": {
            "lat": item.exif.lat,
            "lon": item.exif.lon,
            "alt": item.exif.alt,
            "taken_at": _iso(item.exif.taken_at),
            "focal_length_mm": item.exif.focal_length_mm,
            "focal_length_35mm_mm": item.exif.focal_length_35mm_mm,
        },
        "payload_path": item.payload_path,
        "content_hash": item.content_hash,
        "webcam_id": item.webcam_id,
    }


def item_from_json(d: dict) -> MediaItem:
    geo = d.get("geotag")
    exif = d.get("exif") or {}
    return MediaItem(
        id=d["id"],
        kind=d["kind"],
        source=d["source"],
        state=d.get("state", "NEW"),
        reason=d.get("reason"),
        geotag=None if geo is None else GeoPoint(geo["lat"], geo["lon"], geo.get("alt")),
        taken_at=_parse_ts(d.get("taken_at")),
        exif=ExifMeta(
            lat=exif.get("lat"),
            lon=exif.get("lon"),
            alt=exif.get("alt"),
            taken_at=_parse_ts(exif.get("taken_at")),
            focal_length_mm=exif.get("focal_length_mm"),
            focal_length_35mm_mm=exif.get("focal_length_35mm_mm"),
        ),
        payload_path=d.get("payload_path", ""),
        content_hash=d.get("content_hash", ""),
        webcam_id=d.get("webcam_id"),
    )


def _snow_to_json(rec: SnowIndexRecord) -> dict:
    return {
        "media_id": rec.media_id,
        "timestamp": _iso(rec.timestamp),
        "region": rec.region,
        "snow_index": rec.snow_index,
        "eligible_pixels": rec.eligible_pixels,
    }


def _snow_from_json(d: dict) -> SnowIndexRecord:
    return SnowIndexRecord(
        media_id=d["media_id"],
        timestamp=_parse_ts(d["timestamp"]),
        region=d["region"],
        snow_index=d["snow_index"],
        eligible_pixels=d["eligible_pixels"],
    )


def atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


@dataclass
class _Record:
    item: MediaItem
    alignments: dict[str, AlignmentResult] = field(default_factory=dict)
    peaks: list[str] = field(default_factory=list)


class MediaStore:
    """All mutation goes through the journal; in-memory indexes and meta
    files are derived. Thread-safe for use from API worker threads."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root)
        self.media_dir = self.root / "media"
        self.journal_path = self.root / "journal.jsonl"
        self.media_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._records: dict[str, _Record] = {}
        self._by_hash: dict[str, str] = {}
        self._snow: list[SnowIndexRecord] = []
        self._seen_identities: set[str] = set()
        self._seq = 0
        self._replay()
        self._journal = open(self.journal_path, "a", encoding="utf-8")

    # -- journal ----------------------------------------------------------

    def _replay(self) -> None:
        if not self.journal_path.exists():
            return
        with open(self.journal_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    # Torn tail from an interrupted append; everything
                    # before it is intact.
                    break
                self._apply(entry)
                self._seq = max(self._seq, entry.get("seq", 0))

    def _apply(self, entry: dict) -> None:
        op = entry["op"]
        payload = entry.get("payload") or {}
        media_id = entry.get("id")
        if op == "create":
            item = item_from_json(payload)
            self._records[item.id] = _Record(item=item)
            if item.content_hash:
                self._by_hash[item.content_hash] = item.id
        elif op == "state":
            rec = self._records.get(media_id)
            if rec is not None:
                rec.item.state = payload["to"]
                rec.item.reason = payload.get("reason")
        elif op == "alignment":
            rec = self._records.get(media_id)
            if rec is not None:
                result = AlignmentResult.from_json(payload["result"])
                rec.alignments[result.source] = result
        elif op == "peaks":
            rec = self._records.get(media_id)
            if rec is not None:
                rec.peaks = list(payload.get("names", []))
        elif op == "snow":
            self._snow.append(_snow_from_json(payload))
        elif op == "identity":
            self._seen_identities.add(payload["identity"])

    def _append(self, op: str, media_id: str | None, payload: dict) -> None:
        self._seq += 1
        entry = {
            "seq": self._seq,
            "ts": datetime.now(timezone.utc).isoformat(),
            "op": op,
            "id": media_id,
            "payload": payload,
        }
        self._journal.write(json.dumps(entry, separators=(",", ":")) + "\n")
        self._journal.flush()

    def close(self) -> None:
        with self._lock:
            self._journal.close()

    # -- materialization ---------------------------------------------------

    def item_dir(self, media_id: str) -> Path:
        return self.media_dir / media_id

    def _write_meta(self, rec: _Record) -> None:
        d = self.item_dir(rec.item.id)
        d.mkdir(parents=True, exist_ok=True)
        meta = item_to_json(rec.item)
        meta["peaks"] = rec.peaks
        atomic_write(d / "meta.json", json.dumps(meta, indent=2).encode())

    def _write_alignment_meta(self, rec: _Record) -> None:
        d = self.item_dir(rec.item.id)
        d.mkdir(parents=True, exist_ok=True)
        doc = {src: res.to_json() for src, res in rec.alignments.items()}
        atomic_write(d / "alignment.json", json.dumps(doc, indent=2).encode())

    # -- writes -------------------------------------------------------------

    def add_item(self, item: MediaItem, payload: bytes, ext: str = "jpg") -> tuple[MediaItem, bool]:
        """Store the payload and create the item; duplicates (same content
        hash) return the existing item with created=False."""
        digest = hashlib.sha256(payload).hexdigest()
        with self._lock:
            existing = self._by_hash.get(digest)
            if existing is not None:
                return self.get(existing), False
            item.content_hash = digest
            item.payload_path = f"media/{item.id}/original.{ext.lstrip('.')}"
            d = self.item_dir(item.id)
            d.mkdir(parents=True, exist_ok=True)
            atomic_write(self.root / item.payload_path, payload)
            self._append("create", item.id, item_to_json(item))
            rec = _Record(item=item)
            self._records[item.id] = rec
            self._by_hash[digest] = item.id
            self._write_meta(rec)
            return replace(item), True

    def transition(self, media_id: str, to_state: str, reason: str | None = None,
                   expect: str | None = None) -> MediaItem:
        """Compare-and-set state change; `expect` pins the state observed by
        the caller. Illegal transitions raise ConflictError."""
        with self._lock:
            rec = self._records.get(media_id)
            if rec is None:
                raise NotFoundError(media_id)
            current = rec.item.state
            if expect is not None and current != expect:
                raise ConflictError(f"{media_id}: state is {current}, expected {expect}")
            if (current, to_state) not in STATE_TRANSITIONS:
                raise ConflictError(f"{media_id}: illegal transition {current} -> {to_state}")
            self._append("state", media_id, {"from": current, "to": to_state, "reason": reason})
            rec.item.state = to_state
            rec.item.reason = reason
            self._write_meta(rec)
            return replace(rec.item)

    def set_alignment(self, media_id: str, result: AlignmentResult) -> None:
        with self._lock:
            rec = self._records.get(media_id)
            if rec is None:
                raise NotFoundError(media_id)
            self._append("alignment", media_id, {"result": result.to_json()})
            rec.alignments[result.source] = result
            self._write_alignment_meta(rec)

    def set_peaks(self, media_id: str, names: list[str]) -> None:
        with self._lock:
            rec = self._records.get(media_id)
            if rec is None:
                raise NotFoundError(media_id)
            self._append("peaks", media_id, {"names": list(names)})
            rec.peaks = list(names)
            self._write_meta(rec)

    def record_snow(self, rec: SnowIndexRecord) -> None:
        """Journal the record and append a row to the snow-index CSV; the
        CSV keeps full history (corrections append, never rewrite)."""
        with self._lock:
            self._append("snow", rec.media_id, _snow_to_json(rec))
            self._snow.append(rec)
            csv_path = self.root / "snowindex.csv"
            new = not csv_path.exists()
            with open(csv_path, "a", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                if new:
                    writer.writerow(
                        ["media_id", "timestamp", "region", "snow_index", "eligible_pixels"]
                    )
                writer.writerow([
                    rec.media_id,
                    _iso(rec.timestamp),
                    rec.region,
                    "" if rec.snow_index is None else repr(rec.snow_index),
                    rec.eligible_pixels,
                ])

    def latest_snow(self, media_id: str) -> SnowIndexRecord | None:
        with self._lock:
            for rec in reversed(self._snow):
                if rec.media_id == media_id:
                    return rec
        return None

    def mark_identity(self, identity: str) -> None:
        with self._lock:
            if identity in self._seen_identities:
                return
            self._append("identity", None, {"identity": identity})
            self._seen_identities.add(identity)

    @property
    def seen_identities(self) -> set[str]:
        with self._lock:
            return set(self._seen_identities)

    def save_artifact(self, media_id: str, name: str, data: bytes) -> Path:
        with self._lock:
            if media_id not in self._records:
                raise NotFoundError(media_id)
            d = self.item_dir(media_id)
            d.mkdir(parents=True, exist_ok=True)
            path = d / name
            atomic_write(path, data)
            return path

    # -- reads ---------------------------------------------------------------

    def get(self, media_id: str) -> MediaItem:
        with self._lock:
            rec = self._records.get(media_id)
            if rec is None:
                raise NotFoundError(media_id)
            return replace(rec.item)

    def peaks_for(self, media_id: str) -> list[str]:
        with self._lock:
            rec = self._records.get(media_id)
            if rec is None:
                raise NotFoundError(media_id)
            return list(rec.peaks)

    def payload(self, media_id: str) -> bytes:
        item = self.get(media_id)
        path = self.root / item.payload_path
        if not item.payload_path or not path.exists():
            raise NotFoundError(f"{media_id}: payload missing")
        return path.read_bytes()

    def artifact_path(self, media_id: str, name: str) -> Path | None:
        path = self.item_dir(media_id) / name
        return path if path.exists() else None

    def alignment(self, media_id: str, source: str | None = None) -> AlignmentResult | None:
        """Per-source lookup, or the active result (MANUAL wins over AUTO)."""
        with self._lock:
            rec = self._records.get(media_id)
            if rec is None:
                raise NotFoundError(media_id)
            if source is not None:
                return rec.alignments.get(source)
            return rec.alignments.get(MANUAL) or rec.alignments.get(AUTO)

    def by_hash(self, digest: str) -> str | None:
        with self._lock:
            return self._by_hash.get(digest)

    def all_ids(self) -> list[str]:
        with self._lock:
            return list(self._records)

    def count(self) -> int:
        with self._lock:
            return len(self._records)

    # -- queries ---------------------------------------------------------------

    def _matches(self, rec: _Record, q: MediaQuery) -> bool:
        item = rec.item
        if q.kind is not None and item.kind != q.kind:
            return False
        if q.state is not None and item.state != q.state:
            return False
        if q.bbox is not None:
            if item.geotag is None:
                return False
            lat0, lon0, lat1, lon1 = q.bbox
            if not (lat0 <= item.geotag.lat <= lat1 and lon0 <= item.geotag.lon <= lon1):
                return False
        if q.min_alt is not None:
            alt = item.geotag.alt if item.geotag is not None else None
            if alt is None or alt < q.min_alt:
                return False
        if q.time_from is not None and (item.taken_at is None or item.taken_at < q.time_from):
            return False
        if q.time_to is not None and (item.taken_at is None or item.taken_at > q.time_to):
            return False
        if q.peak is not None and q.peak not in rec.peaks:
            return False
        return True

    @staticmethod
    def sort_key(item: MediaItem) -> tuple:
        ts = item.taken_at or datetime.fromtimestamp(0, tz=timezone.utc)
        return (ts, item.id)

    def query(self, q: MediaQuery) -> tuple[list[MediaItem], int]:
        """Matching items newest first (taken_at, then id, descending);
        returns the requested page and the total match count."""
        with self._lock:
            matched = [rec.item for rec in self._records.values() if self._matches(rec, q)]
            matched.sort(key=self.sort_key, reverse=True)
            total = len(matched)
            page = matched[q.offset : q.offset + q.limit]
            return [replace(it) for it in page], total

    def heatmap(self, bbox: tuple[float, float, float, float], cell: float) -> dict:
        """Geotagged-item counts on a bbox grid with `cell`-degree bins;
        items on the outer edge land in the last bin."""
        if cell <= 0:
            raise ValueError("cell must be positive")
        lat0, lon0, lat1, lon1 = bbox
        if lat0 > lat1 or lon0 > lon1:
            raise ValueError("bbox must be (lat_min, lon_min, lat_max, lon_max)")
        n_lat = max(1, math.ceil((lat1 - lat0) / cell - 1e-12))
        n_lon = max(1, math.ceil((lon1 - lon0) / cell - 1e-12))
        counts = [[0] * n_lon for _ in range(n_lat)]
        with self._lock:
            for rec in self._records.values():
                geo = rec.item.geotag
                if geo is None:
                    continue
                if not (lat0 <= geo.lat <= lat1 and lon0 <= geo.lon <= lon1):
                    continue
                iy = min(int((geo.lat - lat0) / cell), n_lat - 1)
                ix = min(int((geo.lon - lon0) / cell), n_lon - 1)
                counts[iy][ix] += 1
        return {
            "bbox": list(bbox),
            "cell": cell,
            "rows": n_lat,
            "cols": n_lon,
            "counts": counts,
        }

    def snow_series(self, region: str, time_from: datetime | None = None,
                    time_to: datetime | None = None) -> list[SnowIndexRecord]:
        """Latest record per media item (re-masking supersedes), filtered to
        the region and window, ordered by timestamp then id."""
        with self._lock:
            latest: dict[str, SnowIndexRecord] = {r.media_id: r for r in self._snow}
        out = [
            r
            for r in latest.values()
            if r.region == region
            and (time_from is None or r.timestamp >= time_from)
            and (time_to is None or r.timestamp <= time_to)
        ]
        out.sort(key=lambda r: (r.timestamp, r.media_id))
        return out
