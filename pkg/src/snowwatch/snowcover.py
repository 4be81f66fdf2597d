"""Environmental mask construction (SKY / NEAR / GROUND / SNOW) and
snow-cover index aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .config import MaskConfig
from .terrain import Panorama, TERRAIN as PANO_TERRAIN
from .vision import ImageBuffer, WeatherScore, snow_pixel_map
from .alignment import PixelMapping

SKY = 0
NEAR = 1
GROUND = 2
SNOW = 3

CLASS_NAMES = {SKY: "SKY", NEAR: "NEAR", GROUND: "GROUND", SNOW: "SNOW"}

# Exact overlay palette, also relied on by the web client.
MASK_PALETTE = {
    SKY: (135, 206, 235),
    NEAR: (128, 128, 128),
    GROUND: (139, 90, 43),
    SNOW: (255, 255, 255),
}


@dataclass(frozen=True)
class EnvironmentalMask:
    width: int
    height: int
    classes: np.ndarray    # uint8 (height, width)
    eligible: np.ndarray   # bool (height, width): counted by the snow index
    params: MaskConfig

    def class_counts(self) -> dict[str, int]:
        return {
            name: int(np.count_nonzero(self.classes == code))
            for code, name in CLASS_NAMES.items()
        }


@dataclass(frozen=True)
class SnowIndexRecord:
    media_id: str
    timestamp: datetime
    region: str
    snow_index: float | None   # None when there are no eligible pixels
    eligible_pixels: int


def build_mask(
    photo: ImageBuffer,
    mapping: PixelMapping,
    pano: Panorama,
    cfg: MaskConfig = MaskConfig(),
) -> EnvironmentalMask:
    """Classify every photo pixel from its mapped panorama cell.

    SKY when the cell is sky or maps above the rendered elevation range;
    NEAR when terrain closer than d_near (or below the range); SNOW when the
    terrain is high enough and the pixel passes the snow test; else GROUND.
    """
    if (mapping.height, mapping.width) != (photo.height, photo.width):
        raise ValueError("mapping dimensions do not match the photo")

    az = np.mod(mapping.azimuth, 360.0)
    col = np.mod(np.rint(az / pano.az_res).astype(np.int64), pano.n_cols)
    row_f = (mapping.elevation - pano.el_min) / pano.el_res
    row = np.floor(row_f).astype(np.int64)
    above = row >= pano.n_rows
    below = row < 0
    row_c = np.clip(row, 0, pano.n_rows - 1)

    cell_terrain = (pano.kind[row_c, col] == PANO_TERRAIN) & ~above & ~below
    dist = np.nan_to_num(pano.distance[row_c, col].astype(np.float64), nan=np.inf)
    alt = np.nan_to_num(pano.altitude[row_c, col].astype(np.float64), nan=-np.inf)

    near = (cell_terrain & (dist < cfg.d_near)) | (below & ~above)
    high = cell_terrain & ~near & (alt >= cfg.alt_threshold)
    snowy = snow_pixel_map(photo, cfg.snow_v_min, cfg.snow_s_max)

    classes = np.full((photo.height, photo.width), SKY, dtype=np.uint8)
    classes[near] = NEAR
    ground_or_snow = cell_terrain & ~near
    classes[ground_or_snow] = GROUND
    classes[high & snowy] = SNOW

    eligible = high  # terrain, beyond d_near, at or above the altitude threshold
    return EnvironmentalMask(photo.width, photo.height, classes, eligible, cfg)


def snow_index(
    mask: EnvironmentalMask,
    cfg: MaskConfig,
    media_id: str,
    timestamp: datetime,
    region: str = "default",
) -> SnowIndexRecord:
    """Snow fraction over eligible pixels; index is None when none exist."""
    if cfg != mask.params:
        raise ValueError("snow_index config differs from the mask's parameters")
    eligible = int(np.count_nonzero(mask.eligible))
    if eligible == 0:
        return SnowIndexRecord(media_id, timestamp, region, None, 0)
    snow = int(np.count_nonzero(mask.classes == SNOW))
    return SnowIndexRecord(media_id, timestamp, region, snow / eligible, eligible)


def daily_webcam_index(
    frames: list[tuple[str, ImageBuffer, WeatherScore, datetime]],
    mapping: PixelMapping,
    pano: Panorama,
    cfg: MaskConfig = MaskConfig(),
    region: str = "default",
) -> SnowIndexRecord | None:
    """Daily aggregate for one webcam: the index of the clearest usable frame
    (ties resolved by earliest timestamp). None when no frame is usable."""
    if not frames:
        return None
    days = {ts.astimezone(timezone.utc).date() for _, _, _, ts in frames}
    if len(days) > 1:
        raise ValueError(f"frames span multiple days: {sorted(map(str, days))}")
    usable = [f for f in frames if f[2].usable]
    if not usable:
        return None
    media_id, frame, _, ts = min(usable, key=lambda f: (-f[2].visibility, f[3]))
    mask = build_mask(frame, mapping, pano, cfg)
    return snow_index(mask, cfg, media_id, ts, region)


def mask_to_png(mask: EnvironmentalMask) -> bytes:
    from .vision import encode_png

    rgb = np.zeros((mask.height, mask.width, 3), dtype=np.uint8)
    for code, color in MASK_PALETTE.items():
        rgb[mask.classes == code] = color
    return encode_png(rgb)


def mask_sidecar(mask: EnvironmentalMask) -> dict:
    return {
        "params": mask.params.as_params(),
        "counts": mask.class_counts(),
        "eligible_pixels": int(np.count_nonzero(mask.eligible)),
    }
