"""Deterministic synthetic fixtures: DEMs with known closed-form properties,
peak catalogs, and photo/webcam-frame synthesis from rendered panoramas.

The standard fixture is a 200 x 200 cell grid (30 m cells, equatorial so a
lon cell is also 30 m): a flat valley at 1000 m, a conical peak of relief
1200 m with its apex exactly on a cell centre due east of the viewpoint, a
ridge to the south whose crest height varies with longitude, and smooth
hills west and north so every azimuth shows some terrain structure.
"""

from __future__ import annotations

import io
import math
from datetime import datetime, timezone

import numpy as np
from PIL import Image
from PIL.TiffImagePlugin import IFDRational

from .alignment import CameraPose, PixelMapping, _elevation_offsets, build_mapping
from .config import RenderConfig
from .terrain import (
    EARTH_RADIUS_M,
    DemGrid,
    GeoPoint,
    Panorama,
    Peak,
    Viewpoint,
)
from .vision import ImageBuffer, image_from_array

DEG_M = EARTH_RADIUS_M * math.pi / 180.0  # metres per degree of latitude

SKY_RGB = (170, 200, 235)
TERRAIN_RGB = (70, 60, 55)
SNOW_RGB = (255, 255, 255)

# Standard fixture geometry (all distances in metres from the viewpoint).
CELL_M = 30.0
FIXTURE_N = 200
FIXTURE_LAT = 0.0
FIXTURE_LON = 9.0
VALLEY_ALT = 1000.0
APEX_EAST_CELLS = 90            # apex on a cell centre 2700 m due east
APEX_ALT = 2200.0               # relief 1200 m over the valley floor
CONE_SLOPE = 0.48
CONE_RADIUS = (APEX_ALT - VALLEY_ALT) / CONE_SLOPE  # 2500 m, meets the floor
RIDGE_SOUTH_M = 1800.0
RIDGE_SIGMA_M = 150.0


def fixture_cell_deg() -> float:
    return CELL_M / DEG_M


def _grid(n: int, cell_deg: float, lat_c: float, lon_c: float):
    """Cell-centre offsets (metres) on an n x n grid centred at (lat_c, lon_c)."""
    half = (n - 1) / 2.0
    y = (np.arange(n) - half) * cell_deg * DEG_M
    x = (np.arange(n) - half) * cell_deg * DEG_M * math.cos(math.radians(lat_c))
    origin = GeoPoint(lat_c - half * cell_deg, lon_c - half * cell_deg)
    return np.meshgrid(x, y), origin


def flat_dem(base: float = 0.0, n: int = 340, cell_deg: float = 0.0006,
             lat_c: float = 46.0, lon_c: float = 9.0) -> DemGrid:
    """Uniform elevation over roughly +-11 km, enough to contain the distance
    at which the curvature-limited horizon of a 2 m eye is reached (~5.4 km)."""
    half = (n - 1) / 2.0
    origin = GeoPoint(lat_c - half * cell_deg, lon_c - half * cell_deg)
    return DemGrid(origin, n, n, cell_deg, -9999.0, np.full((n, n), base))


def fixture_dem() -> DemGrid:
    """The standard valley / cone / ridge / hills fixture.

    Surfaces combine with max(), so the cone apex altitude is exactly
    APEX_ALT no matter what else is in the scene.
    """
    cell_deg = fixture_cell_deg()
    (x, y), origin = _grid(FIXTURE_N, cell_deg, FIXTURE_LAT, FIXTURE_LON)

    alt = np.full(x.shape, VALLEY_ALT)

    r_cone = np.hypot(x - APEX_EAST_CELLS * CELL_M, y)
    cone = APEX_ALT - CONE_SLOPE * r_cone
    alt = np.maximum(alt, cone)

    # Ridge: east-west wall 1800 m south, crest rising from west to east.
    crest = 1550.0 + x / 10.0
    ridge = VALLEY_ALT + (crest - VALLEY_ALT) * np.exp(-(((y + RIDGE_SOUTH_M) / RIDGE_SIGMA_M) ** 2))
    alt = np.maximum(alt, ridge)

    # A ring of smooth hills with jittered spacing so no 35-degree view is
    # featureless, yet none rises high enough to leave the panorama window.
    # Hills under the cone's footprint vanish in the max() and the apex ray
    # is untouched.
    rng = np.random.default_rng(1234)
    for k in range(12):
        az = math.radians(15.0 + 30.0 * k + rng.uniform(-8.0, 8.0))
        dist = rng.uniform(1500.0, 2600.0)
        cx, cy = dist * math.sin(az), dist * math.cos(az)
        amp = rng.uniform(100.0, 200.0)
        sigma = rng.uniform(220.0, 380.0)
        alt = np.maximum(alt, VALLEY_ALT + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / sigma**2))

    # Snap sub-micron gaussian skirts back to the floor so flat areas (and
    # with them the viewpoint elevation) stay exactly at VALLEY_ALT.
    alt = np.where(alt - VALLEY_ALT < 1e-6, VALLEY_ALT, alt)

    return DemGrid(origin, FIXTURE_N, FIXTURE_N, cell_deg, -9999.0, alt)


def fixture_viewpoint(eye_height: float = 2.0) -> Viewpoint:
    return Viewpoint(GeoPoint(FIXTURE_LAT, FIXTURE_LON), eye_height)


def ridge_viewpoint(eye_height: float = 2.0) -> Viewpoint:
    """A photographer spot on the ridge crest, south-east of the valley
    centre: high enough to pass the altitude filter, with the cone's upper
    flank in view at comfortable elevation angles."""
    lat = FIXTURE_LAT - RIDGE_SOUTH_M / DEG_M
    lon = FIXTURE_LON + 2400.0 / DEG_M
    return Viewpoint(GeoPoint(lat, lon), eye_height)


def apex_position() -> GeoPoint:
    return GeoPoint(FIXTURE_LAT, FIXTURE_LON + APEX_EAST_CELLS * fixture_cell_deg(), APEX_ALT)


def fixture_peaks() -> list[Peak]:
    """Three catalog entries: the cone apex and a ridge point are visible from
    the fixture viewpoint; the low foothill on the cone's flank is occluded."""
    cell = fixture_cell_deg()
    ridge = Peak("Ridge Point", GeoPoint(
        FIXTURE_LAT - RIDGE_SOUTH_M / DEG_M, FIXTURE_LON + 1500.0 / DEG_M, 1700.0
    ))
    hidden = Peak("Hidden Knoll", GeoPoint(FIXTURE_LAT, FIXTURE_LON + 83 * cell, 1200.0))
    return [Peak("Cone Peak", apex_position()), ridge, hidden]


def peaks_csv(peaks: list[Peak]) -> str:
    lines = ["name,lat,lon,alt"]
    for p in peaks:
        lines.append(f"{p.name},{p.position.lat!r},{p.position.lon!r},{p.position.alt!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Photo synthesis
# ---------------------------------------------------------------------------


def skyline_row(pano: Panorama, pose: CameraPose, width: int, height: int,
                col: int) -> float | None:
    """Fractional pixel row of the panorama skyline in one photo column."""
    mapping_az = pose.yaw + math.degrees(math.atan(
        ((col - width / 2.0) / (width / 2.0)) * math.tan(math.radians(pose.hfov / 2.0))
    ))
    el = pano.skyline_at(mapping_az % 360.0)
    if el is None or (isinstance(el, float) and math.isnan(el)):
        return None
    vfov = pose.vfov(width, height)
    y = math.tan(math.radians(pose.pitch - el)) / math.tan(math.radians(vfov / 2.0))
    return y * (height / 2.0) + height / 2.0


def synth_profile(pano: Panorama, pose: CameraPose, width: int, height: int):
    """SkylineProfile with exact fractional rows, as if extraction were perfect.
    Columns whose skyline falls outside the frame are undefined."""
    from .vision import SkylineProfile

    rows = np.full(width, np.nan)
    for c in range(width):
        r = skyline_row(pano, pose, width, height, c)
        if r is not None and 0.0 <= r <= height - 1:
            rows[c] = r
    strength = np.where(np.isfinite(rows), 1.0, 0.0)
    return SkylineProfile(width, height, rows, strength)


def synth_photo(pano: Panorama, pose: CameraPose, width: int, height: int,
                sky=SKY_RGB, terrain=TERRAIN_RGB) -> ImageBuffer:
    """Paint sky above the projected skyline and terrain at or below it."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[:, :] = sky
    for c in range(width):
        r = skyline_row(pano, pose, width, height, c)
        if r is None:
            continue
        start = max(0, math.ceil(r))
        if start < height:
            img[start:, c] = terrain
    return image_from_array(img)


def paint_pixels(img: ImageBuffer, where: np.ndarray, rgb=SNOW_RGB) -> ImageBuffer:
    px = img.pixels.copy()
    px[where] = rgb
    return image_from_array(px)


def corrupt_columns(img: ImageBuffer, blocks: list[tuple[int, int]],
                    shift_px: int = 20, terrain=TERRAIN_RGB) -> ImageBuffer:
    """Displace the detected skyline on exactly the [start, stop) columns.

    Extraction blurs over 3 columns, so painting [start+1, stop-1) smears the
    displaced boundary onto start and stop-1 but no further; blocks must be
    >= 7 columns wide, >= 7 apart and >= 3 from the frame borders for the
    median filter to keep the displaced region intact.
    """
    px = img.pixels.copy()
    h = img.height
    terr = np.all(px == np.array(terrain, dtype=np.uint8), axis=2)
    for start, stop in blocks:
        for c in range(start + 1, stop - 1):
            rows = np.nonzero(terr[:, c])[0]
            top = rows[0] if rows.size else h
            new_top = max(0, top - shift_px)
            px[new_top:, c] = terrain
    return image_from_array(px)


def uniform_frame(width: int, height: int, value: int = 128) -> ImageBuffer:
    return image_from_array(np.full((height, width, 3), value, dtype=np.uint8))


def fixture_classifier(panos: list[Panorama]):
    """Train the standard fixture mountain classifier.

    Positives are synthetic views of the given panoramas, some snow-painted
    so a large bright patch does not read as evidence against terrain;
    negatives are featureless frames at several grey levels plus noise.
    """
    from .vision import train_classifier

    mountains = [
        synth_photo(pano, CameraPose(yaw, 3.0, 50.0), 320, 240)
        for pano in panos
        for yaw in (40.0, 100.0, 200.0, 300.0)
    ]
    for pano in panos:
        for yaw in (0.0, 90.0):
            img = synth_photo(pano, CameraPose(yaw, 5.0, 50.0), 320, 240)
            block = np.zeros((240, 320), dtype=bool)
            block[:, 120:260] = True
            mountains.append(paint_pixels(img, block))
    rng = np.random.default_rng(99)
    flats = [uniform_frame(320, 240, v) for v in (90, 128, 140, 170, 200)]
    noise = image_from_array(rng.integers(0, 256, (240, 320, 3)).astype(np.uint8))
    labeled = [(m, True) for m in mountains] + [(f, False) for f in flats] + [(noise, False)]
    return train_classifier(labeled)


# ---------------------------------------------------------------------------
# EXIF JPEG synthesis
# ---------------------------------------------------------------------------


def _sexagesimal(value: float) -> tuple[IFDRational, IFDRational, IFDRational]:
    v = abs(value)
    deg = int(v)
    minutes = int((v - deg) * 60.0)
    seconds = round((v - deg - minutes / 60.0) * 3600.0 * 10_000)
    return (IFDRational(deg, 1), IFDRational(minutes, 1), IFDRational(seconds, 10_000))


def exif_jpeg(
    img: ImageBuffer,
    lat: float | None = None,
    lon: float | None = None,
    alt: float | None = None,
    taken_at: datetime | None = None,
    focal_mm: float | None = None,
    focal_35mm: int | None = None,
    quality: int = 95,
) -> bytes:
    """Encode a JPEG carrying the given EXIF GPS / time / focal fields."""
    pil = Image.fromarray(img.pixels)
    exif = Image.Exif()
    gps: dict[int, object] = {}
    if lat is not None:
        gps[1] = "S" if lat < 0 else "N"
        gps[2] = _sexagesimal(lat)
    if lon is not None:
        gps[3] = "W" if lon < 0 else "E"
        gps[4] = _sexagesimal(lon)
    if alt is not None:
        gps[5] = bytes([1 if alt < 0 else 0])
        gps[6] = IFDRational(int(round(abs(alt) * 100)), 100)
    if gps:
        exif[0x8825] = gps
    sub: dict[int, object] = {}
    if taken_at is not None:
        sub[0x9003] = taken_at.astimezone(timezone.utc).strftime("%Y:%m:%d %H:%M:%S")
    if focal_mm is not None:
        sub[0x920A] = IFDRational(int(round(focal_mm * 100)), 100)
    if focal_35mm is not None:
        sub[0xA405] = int(focal_35mm)
    if sub:
        exif[0x8769] = sub
    buf = io.BytesIO()
    pil.save(buf, format="JPEG", quality=quality, exif=exif.tobytes())
    return buf.getvalue()


def plain_png(img: ImageBuffer) -> bytes:
    from .vision import encode_png

    return encode_png(img)


# ---------------------------------------------------------------------------
# Closed-form oracles
# ---------------------------------------------------------------------------


def horizon_dip_deg(eye_height: float, k: float = 0.13) -> float:
    """Flat-terrain horizon dip: max over distance of the apparent angle of
    level ground seen from eye_height, with curvature-refraction drop."""
    return -math.degrees(math.sqrt(2.0 * eye_height * (1.0 - k) / EARTH_RADIUS_M))


def apparent_elevation_deg(alt: float, eye_elev: float, d: float, k: float = 0.13) -> float:
    drop = d * d * (1.0 - k) / (2.0 * EARTH_RADIUS_M)
    return math.degrees(math.atan2(alt - eye_elev - drop, d))


def mapping_for(pose: CameraPose, width: int, height: int) -> PixelMapping:
    return build_mapping(pose, width, height)


def elevation_of_row(pose: CameraPose, row: float, width: int, height: int) -> float:
    return pose.pitch + float(_elevation_offsets(np.array([row]), width, height, pose.hfov)[0])
