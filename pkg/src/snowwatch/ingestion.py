"""Media acquisition: EXIF metadata, relevance filtering, pluggable media
sources (drop folder, HTTP directory) and webcam polling."""

from __future__ import annotations

import io
import logging
import math
import os
import secrets
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Protocol

from PIL import Image

from .config import RegionConfig, WebcamEntry
from .terrain import DemGrid, GeoPoint, sample_elevation
from .vision import ClassifierModel, ImageBuffer, classify_mountain

logger = logging.getLogger(__name__)

PHOTO = "PHOTO"
WEBCAM_FRAME = "WEBCAM_FRAME"

CRAWL = "CRAWL"
WEBCAM = "WEBCAM"
UPLOAD = "UPLOAD"

# MediaItem state machine; MASKED -> MASKED covers re-masking after a
# manual alignment correction.
STATE_TRANSITIONS = {
    ("NEW", "FILTERED_OUT"),
    ("NEW", "ALIGNED"),
    ("NEW", "FAILED"),
    ("ALIGNED", "MASKED"),
    ("ALIGNED", "FAILED"),
    ("MASKED", "MASKED"),
}

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


def new_media_id(now_ms: int | None = None) -> str:
    """ULID: 48-bit ms timestamp + 80 random bits, Crockford base32; ids sort
    by creation time."""
    ts = int(time.time() * 1000) if now_ms is None else now_ms
    value = (ts << 80) | secrets.randbits(80)
    chars = []
    for _ in range(26):
        chars.append(_CROCKFORD[value & 0x1F])
        value >>= 5
    return "".join(reversed(chars))


@dataclass(frozen=True)
class ExifMeta:
    lat: float | None = None
    lon: float | None = None
    alt: float | None = None
    taken_at: datetime | None = None
    focal_length_mm: float | None = None
    focal_length_35mm_mm: float | None = None

    def __post_init__(self) -> None:
        for f in (self.focal_length_mm, self.focal_length_35mm_mm):
            if f is not None and not 1.0 <= f <= 2000.0:
                raise ValueError(f"focal length out of range: {f}")

    def geotag(self) -> GeoPoint | None:
        if self.lat is None or self.lon is None:
            return None
        try:
            return GeoPoint(self.lat, self.lon, self.alt)
        except ValueError:
            return None


@dataclass
class MediaItem:
    id: str
    kind: str                      # PHOTO | WEBCAM_FRAME
    source: str                    # CRAWL | WEBCAM | UPLOAD
    state: str = "NEW"
    reason: str | None = None
    geotag: GeoPoint | None = None
    taken_at: datetime | None = None
    exif: ExifMeta = field(default_factory=ExifMeta)
    payload_path: str = ""
    content_hash: str = ""
    webcam_id: str | None = None


# ---------------------------------------------------------------------------
# EXIF
# ---------------------------------------------------------------------------

_GPS_IFD = 0x8825
_EXIF_IFD = 0x8769
_TAG_DATETIME_ORIGINAL = 0x9003
_TAG_FOCAL = 0x920A
_TAG_FOCAL_35 = 0xA405


def _rational(v) -> float | None:
    try:
        f = float(v)
    except (TypeError, ValueError, ZeroDivisionError):
        return None
    return f if math.isfinite(f) else None


def _gps_coord(triplet, ref: str | None, negative_ref: str) -> float | None:
    try:
        deg, minutes, seconds = (_rational(x) for x in triplet)
    except (TypeError, ValueError):
        return None
    if deg is None or minutes is None or seconds is None:
        return None
    value = deg + minutes / 60.0 + seconds / 3600.0
    if ref and ref.strip().upper() == negative_ref:
        value = -value
    return value


def read_exif(data: bytes, sidecar: dict | None = None) -> ExifMeta:
    """EXIF GPS / datetime / focal length, with sidecar values overriding
    parsed ones field by field. Unparseable fields are simply absent."""
    fields: dict[str, object] = {}
    try:
        img = Image.open(io.BytesIO(data))
        exif = img.getexif()
    except Exception:
        exif = None
    if exif:
        gps = exif.get_ifd(_GPS_IFD)
        if gps:
            lat = _gps_coord(gps.get(2), gps.get(1), "S")
            lon = _gps_coord(gps.get(4), gps.get(3), "W")
            if lat is not None:
                fields["lat"] = lat
            if lon is not None:
                fields["lon"] = lon
            alt = _rational(gps.get(6))
            if alt is not None:
                ref = gps.get(5)
                if isinstance(ref, (bytes, int)) and (ref in (1, b"\x01")):
                    alt = -alt
                fields["alt"] = alt
        sub = exif.get_ifd(_EXIF_IFD)
        dt = sub.get(_TAG_DATETIME_ORIGINAL)
        if isinstance(dt, str):
            try:
                fields["taken_at"] = datetime.strptime(dt, "%Y:%m:%d %H:%M:%S").replace(
                    tzinfo=timezone.utc
                )
            except ValueError:
                pass
        focal = _rational(sub.get(_TAG_FOCAL))
        if focal is not None:
            fields["focal_length_mm"] = focal
        f35 = _rational(sub.get(_TAG_FOCAL_35))
        if f35 is not None:
            fields["focal_length_35mm_mm"] = f35

    if sidecar:
        mapping = {
            "lat": "lat",
            "lon": "lon",
            "alt": "alt",
            "focal_length_mm": "focal_length_mm",
            "focal_length_35mm_mm": "focal_length_35mm_mm",
        }
        for key, attr in mapping.items():
            if sidecar.get(key) is not None:
                fields[attr] = float(sidecar[key])
        if sidecar.get("taken_at") is not None:
            ts = datetime.fromisoformat(str(sidecar["taken_at"]))
            fields["taken_at"] = ts if ts.tzinfo else ts.replace(tzinfo=timezone.utc)
    try:
        return ExifMeta(**fields)  # type: ignore[arg-type]
    except ValueError:
        # Out-of-range focal lengths are treated as absent, not fatal.
        fields.pop("focal_length_mm", None)
        fields.pop("focal_length_35mm_mm", None)
        return ExifMeta(**fields)  # type: ignore[arg-type]


FULL_FRAME_DIAGONAL_FACTOR = 18.0  # half the 36 mm full-frame width
DEFAULT_CROP_FACTOR = 1.5


def hfov_prior(exif: ExifMeta) -> float:
    """Horizontal FOV prior in degrees from EXIF focal data, default 50."""
    f35 = exif.focal_length_35mm_mm
    if f35 is None and exif.focal_length_mm is not None:
        f35 = exif.focal_length_mm * DEFAULT_CROP_FACTOR
    if f35 is None:
        return 50.0
    hfov = 2.0 * math.degrees(math.atan(FULL_FRAME_DIAGONAL_FACTOR / f35))
    return min(120.0, max(5.0, hfov))


# ---------------------------------------------------------------------------
# Relevance filter
# ---------------------------------------------------------------------------

REASON_NO_GEOTAG = "no geotag"
REASON_OUTSIDE_REGION = "outside region"
REASON_NO_ELEVATION = "no elevation"
REASON_BELOW_ALTITUDE = "below altitude threshold"
REASON_NOT_MOUNTAIN = "no mountain profile"


def filter_photo(
    item: MediaItem,
    img: ImageBuffer,
    dem: DemGrid,
    region: RegionConfig,
    model: ClassifierModel,
) -> str | None:
    """First failing relevance rule, or None when the photo passes.

    Rules in order: geotag present, geotag inside the region bbox,
    photographer altitude (DEM at the geotag) above the threshold,
    mountain classifier accepts.
    """
    if item.geotag is None:
        return REASON_NO_GEOTAG
    p = item.geotag
    if not (region.lat_min <= p.lat <= region.lat_max and region.lon_min <= p.lon <= region.lon_max):
        return REASON_OUTSIDE_REGION
    elev = sample_elevation(dem, p)
    if elev is None:
        return REASON_NO_ELEVATION
    if elev < region.min_photographer_alt:
        return REASON_BELOW_ALTITUDE
    is_mountain, _ = classify_mountain(model, img)
    if not is_mountain:
        return REASON_NOT_MOUNTAIN
    return None


# ---------------------------------------------------------------------------
# Source adapters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceEntry:
    identity: str                   # dedup key, stable across polls
    name: str
    fetch: Callable[[], bytes]
    timestamp: datetime | None = None


class MediaSource(Protocol):
    def list_entries(self) -> list[SourceEntry]: ...


_IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")


class FilesystemSource:
    """Drop-folder adapter; entry identity is path plus mtime."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = Path(root)

    def list_entries(self) -> list[SourceEntry]:
        entries: list[SourceEntry] = []
        if not self.root.is_dir():
            logger.warning("drop folder %s missing", self.root)
            return entries
        for path in sorted(self.root.iterdir()):
            if path.suffix.lower() not in _IMAGE_EXTENSIONS or not path.is_file():
                continue
            try:
                stat = path.stat()
            except OSError as exc:
                logger.warning("skipping %s: %s", path, exc)
                continue
            entries.append(
                SourceEntry(
                    identity=f"{path}:{stat.st_mtime_ns}",
                    name=path.name,
                    fetch=lambda p=path: p.read_bytes(),
                    timestamp=datetime.fromtimestamp(stat.st_mtime, tz=timezone.utc),
                )
            )
        return entries


class _HrefCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__()
        self.hrefs: list[str] = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag == "a":
            for key, value in attrs:
                if key == "href" and value:
                    self.hrefs.append(value)


class HttpDirectorySource:
    """HTTP directory-listing adapter; identity is URL plus ETag (falling
    back to Last-Modified). One failing entry never aborts the batch."""

    def __init__(self, url: str, session=None) -> None:
        import requests

        self.url = url.rstrip("/") + "/"
        self.session = session or requests.Session()

    def list_entries(self) -> list[SourceEntry]:
        from urllib.parse import urljoin

        try:
            index = self.session.get(self.url, timeout=30)
            index.raise_for_status()
        except Exception as exc:
            logger.warning("webcam index %s unreachable: %s", self.url, exc)
            return []
        parser = _HrefCollector()
        parser.feed(index.text)
        entries: list[SourceEntry] = []
        for href in parser.hrefs:
            if not href.lower().endswith(_IMAGE_EXTENSIONS):
                continue
            url = urljoin(self.url, href)
            try:
                head = self.session.head(url, timeout=30)
                head.raise_for_status()
            except Exception as exc:
                logger.warning("skipping %s: %s", url, exc)
                continue
            tag = head.headers.get("ETag") or head.headers.get("Last-Modified") or ""
            ts = None
            lm = head.headers.get("Last-Modified")
            if lm:
                try:
                    from email.utils import parsedate_to_datetime

                    ts = parsedate_to_datetime(lm)
                except (TypeError, ValueError):
                    ts = None

            def fetch(u=url) -> bytes:
                resp = self.session.get(u, timeout=60)
                resp.raise_for_status()
                return resp.content

            entries.append(SourceEntry(f"{url}@{tag}", href.rsplit("/", 1)[-1], fetch, ts))
        return entries


def source_for(spec: str) -> MediaSource:
    if spec.startswith(("http://", "https://")):
        return HttpDirectorySource(spec)
    return FilesystemSource(spec)


def poll_webcam(
    cam: WebcamEntry,
    adapter: MediaSource,
    seen: set[str],
) -> list[tuple[MediaItem, bytes]]:
    """Fetch frames not yet seen; `seen` is updated in place. Unreachable
    adapters and failing entries yield fewer items, never an exception."""
    out: list[tuple[MediaItem, bytes]] = []
    try:
        entries = adapter.list_entries()
    except Exception as exc:
        logger.warning("webcam %s poll failed: %s", cam.id, exc)
        return out
    for entry in entries:
        if entry.identity in seen:
            continue
        try:
            data = entry.fetch()
        except Exception as exc:
            logger.warning("webcam %s: skipping %s: %s", cam.id, entry.name, exc)
            continue
        seen.add(entry.identity)
        item = MediaItem(
            id=new_media_id(),
            kind=WEBCAM_FRAME,
            source=WEBCAM,
            geotag=GeoPoint(cam.lat, cam.lon),
            taken_at=entry.timestamp or datetime.now(timezone.utc),
            webcam_id=cam.id,
        )
        out.append((item, data))
    return out
