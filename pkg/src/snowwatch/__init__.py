"""SnowWatch: snow-cover monitoring from community photos and webcams.

Terrain rendering, skyline-based camera alignment, environmental masking
and snow statistics, plus the ingestion pipeline, file store, HTTP API and
CLI that tie them into a service.
"""

from .config import (
    AlignConfig,
    MaskConfig,
    RegionConfig,
    RenderConfig,
    ServiceConfig,
    VisionConfig,
    WebcamEntry,
    load_service_config,
)
from .terrain import (
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
from .vision import (
    ClassifierModel,
    ImageBuffer,
    SkylineProfile,
    WeatherScore,
    classify_mountain,
    decode_image,
    extract_skyline,
    snow_pixel,
    train_classifier,
    weather_score,
)
from .alignment import (
    AlignmentResult,
    CameraPose,
    WarpMap,
    apply_warp,
    build_mapping,
    estimate_pose,
)
from .snowcover import (
    EnvironmentalMask,
    SnowIndexRecord,
    build_mask,
    daily_webcam_index,
    snow_index,
)
from .ingestion import ExifMeta, MediaItem, filter_photo, hfov_prior, read_exif
from .store import MediaQuery, MediaStore
from .pipeline import Pipeline

__version__ = "0.1.0"

__all__ = [
    "AlignConfig",
    "AlignmentResult",
    "CameraPose",
    "ClassifierModel",
    "DemGrid",
    "EnvironmentalMask",
    "ExifMeta",
    "GeoPoint",
    "ImageBuffer",
    "MaskConfig",
    "MediaItem",
    "MediaQuery",
    "MediaStore",
    "Panorama",
    "Peak",
    "Pipeline",
    "RegionConfig",
    "RenderConfig",
    "ServiceConfig",
    "SkylineProfile",
    "SnowIndexRecord",
    "Viewpoint",
    "VisionConfig",
    "WarpMap",
    "WeatherScore",
    "WebcamEntry",
    "apply_warp",
    "build_mapping",
    "build_mask",
    "classify_mountain",
    "daily_webcam_index",
    "decode_image",
    "estimate_pose",
    "extract_skyline",
    "filter_photo",
    "hfov_prior",
    "load_dem",
    "load_peaks",
    "load_service_config",
    "project_peaks",
    "read_exif",
    "render_panorama",
    "snow_index",
    "snow_pixel",
    "train_classifier",
    "weather_score",
]
