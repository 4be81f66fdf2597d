"""Configuration records for every tunable threshold in the system.

All knobs live in frozen dataclasses so a processing run can record exactly
which parameters produced its outputs. `ServiceConfig` bundles them together
with deployment paths and is what the CLI / HTTP service load from JSON.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

DATA_DIR_ENV = "SNOWWATCH_DATA_DIR"
CONFIG_ENV = "SNOWWATCH_CONFIG"


@dataclass(frozen=True)
class RenderConfig:
    """Panorama rendering and peak projection parameters."""

    az_res: float = 0.05            # degrees per panorama column
    el_res: float = 0.05            # degrees per panorama row
    el_min: float = -25.0
    el_max: float = 25.0
    d_min: float = 100.0            # metres, start of ray march
    d_max: float = 50_000.0         # metres, end of ray march
    vis_tol: float = 0.2            # degrees below skyline a peak may sit and still count

    def __post_init__(self) -> None:
        if self.az_res <= 0 or self.el_res <= 0:
            raise ValueError("angular resolutions must be positive")
        if self.el_min >= self.el_max:
            raise ValueError("el_min must be below el_max")
        if not (0 < self.d_min < self.d_max):
            raise ValueError("need 0 < d_min < d_max")


@dataclass(frozen=True)
class VisionConfig:
    """Thresholds for skyline extraction, snow test and weather scoring."""

    g_min: float = 24 / 255         # min vertical gradient for a boundary candidate
    b_min: float = 10 / 255         # sky-over-terrain luma contrast margin
    contrast_window: int = 9        # rows inspected around a candidate boundary
    median_window: int = 7          # columns for the skyline median filter
    v_min: float = 0.65             # min HSV value for a snow pixel
    s_max: float = 0.25             # max HSV saturation for a snow pixel
    tol_px: float = 8.0             # skyline agreement tolerance for weather scoring
    weather_threshold: float = 0.6  # visibility above which a frame is usable
    min_detect_frac: float = 0.25   # below this skyline coverage a frame scores 0


@dataclass(frozen=True)
class AlignConfig:
    """Search grid and refinement settings for camera pose estimation."""

    yaw_step_cols: int = 2          # yaw grid step in panorama columns
    pitch_min: float = -10.0        # grid candidates pick the best pitch in
    pitch_max: float = 10.0         # this range exactly (median residual)
    fov_factors: tuple[float, ...] = (0.9, 1.0, 1.1)
    default_hfov: float = 50.0      # used when no prior is available
    min_defined_frac: float = 0.2   # of photo columns with a detected skyline
    min_usable_frac: float = 0.2    # of photo columns usable by a candidate
    refine_rounds: int = 3
    refine_step: float = 0.04       # degrees; halved each round down to refine_floor
    refine_floor: float = 0.01
    score_scale: float = 0.5        # degrees; confidence = exp(-score / score_scale)
    ambiguity_gap: float = 0.02     # best-vs-median score gap marking a degenerate fit


@dataclass(frozen=True)
class MaskConfig:
    """Environmental mask classification parameters.

    Snow thresholds are duplicated from VisionConfig defaults so a mask
    records the exact values it was built with.
    """

    alt_threshold: float = 1500.0   # metres; terrain below is never snow-eligible
    d_near: float = 300.0           # metres; closer terrain is NEAR, not eligible
    snow_v_min: float = 0.65
    snow_s_max: float = 0.25

    def as_params(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class RegionConfig:
    """Geographic region of interest plus the photographer-altitude filter."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    min_photographer_alt: float = 500.0
    name: str = "default"

    def __post_init__(self) -> None:
        if self.lat_min >= self.lat_max or self.lon_min >= self.lon_max:
            raise ValueError("degenerate region bounding box")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return (self.lat_min, self.lon_min, self.lat_max, self.lon_max)


@dataclass(frozen=True)
class WebcamEntry:
    """One calibrated webcam: fixed viewpoint, pose and expected skyline."""

    id: str
    lat: float
    lon: float
    eye_height: float
    yaw: float
    pitch: float
    hfov: float
    frame_width: int
    frame_height: int
    source: str                     # drop directory path or HTTP directory URL
    poll_interval: float = 60.0
    expected_skyline: tuple[float | None, ...] = ()

    def __post_init__(self) -> None:
        if self.poll_interval < 60:
            raise ValueError("poll_interval must be >= 60 s")
        if self.expected_skyline and len(self.expected_skyline) != self.frame_width:
            raise ValueError("expected_skyline width must equal frame width")


@dataclass
class ServiceConfig:
    """Deployment configuration: paths, region, thresholds, webcams, server."""

    dem_path: str
    peaks_path: str
    data_dir: str
    region: RegionConfig
    classifier_path: str | None = None
    render: RenderConfig = field(default_factory=RenderConfig)
    vision: VisionConfig = field(default_factory=VisionConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    webcams: list[WebcamEntry] = field(default_factory=list)
    port: int = 8000
    workers: int = 2
    eye_height: float = 2.0


def _build(cls: type, raw: dict[str, Any]) -> Any:
    known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**raw)


def load_service_config(path: str | os.PathLike[str] | None = None) -> ServiceConfig:
    """Load a ServiceConfig from JSON, honouring SNOWWATCH_* env overrides."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
        if path is None:
            raise ValueError(f"no config path given and {CONFIG_ENV} unset")
    raw = json.loads(Path(path).read_text())
    data_dir = os.environ.get(DATA_DIR_ENV) or raw.get("data_dir")
    if not data_dir:
        raise ValueError(f"data_dir missing (set it in the config or via {DATA_DIR_ENV})")
    webcams = [
        _build(WebcamEntry, {**w, "expected_skyline": tuple(w.get("expected_skyline") or ())})
        for w in raw.get("webcams", [])
    ]
    return ServiceConfig(
        dem_path=raw["dem_path"],
        peaks_path=raw["peaks_path"],
        data_dir=data_dir,
        region=_build(RegionConfig, raw["region"]),
        classifier_path=raw.get("classifier_path"),
        render=_build(RenderConfig, raw.get("render", {})),
        vision=_build(VisionConfig, raw.get("vision", {})),
        align=_build(AlignConfig, raw.get("align", {})),
        mask=_build(MaskConfig, raw.get("mask", {})),
        webcams=webcams,
        port=int(raw.get("port", 8000)),
        workers=int(raw.get("workers", 2)),
        eye_height=float(raw.get("eye_height", 2.0)),
    )
