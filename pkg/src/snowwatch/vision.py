"""Image-level analysis: decoding, skyline extraction, snow and weather tests,
and the mountain/non-mountain classifier."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .config import VisionConfig

FEATURE_VERSION = "orient-hist-v1"
N_FEATURES = 18

_LUMA = np.array([0.299, 0.587, 0.114])


class DecodeError(ValueError):
    """Unsupported or truncated image payload."""


class ModelVersionError(ValueError):
    """Classifier model built for a different feature version."""


@dataclass(frozen=True)
class ImageBuffer:
    width: int
    height: int
    pixels: np.ndarray  # uint8 (height, width, 3)

    def __post_init__(self) -> None:
        if self.width < 16 or self.height < 16:
            raise ValueError("images must be at least 16x16")
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError("pixel buffer shape mismatch")


def image_from_array(arr: np.ndarray) -> ImageBuffer:
    a = np.ascontiguousarray(arr, dtype=np.uint8)
    return ImageBuffer(a.shape[1], a.shape[0], a)


def decode_image(data: bytes) -> ImageBuffer:
    """Decode PNG/JPEG bytes to an RGB buffer (alpha dropped, gray expanded)."""
    try:
        img = Image.open(io.BytesIO(data))
        if img.format not in ("PNG", "JPEG"):
            raise DecodeError(f"unsupported format: {img.format}")
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc
    try:
        return image_from_array(arr)
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc


def encode_png(img: ImageBuffer | np.ndarray) -> bytes:
    arr = img.pixels if isinstance(img, ImageBuffer) else img
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, "PNG")
    return buf.getvalue()


def luma(img: ImageBuffer) -> np.ndarray:
    return img.pixels.astype(np.float64) @ _LUMA


# ---------------------------------------------------------------------------
# Skyline extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkylineProfile:
    """Per-column sky/terrain boundary rows. NaN marks columns where none was
    found; `rows[c]` is the last sky row above the boundary."""

    width: int
    height: int
    rows: np.ndarray      # float64 (width,), NaN sentinel
    strength: np.ndarray  # float64 (width,), gradient magnitude in [0, 1]

    def __post_init__(self) -> None:
        if self.rows.shape != (self.width,) or self.strength.shape != (self.width,):
            raise ValueError("profile arrays must have one entry per column")

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.rows)

    @property
    def defined_frac(self) -> float:
        return float(np.isfinite(self.rows).mean())


def _box3_columns(a: np.ndarray) -> np.ndarray:
    """3-column horizontal box filter with edge clamping."""
    p = np.pad(a, ((0, 0), (1, 1)), mode="edge")
    return (p[:, :-2] + p[:, 1:-1] + p[:, 2:]) / 3.0


def extract_skyline(img: ImageBuffer, cfg: VisionConfig = VisionConfig()) -> SkylineProfile:
    """Topmost luma step per column that also looks like bright-sky-over-terrain.

    A boundary candidate at row r (edge between rows r and r+1) qualifies when
    the vertical gradient of the 3-column-smoothed luma exceeds g_min and the
    mean luma of the (up to 5) rows ending at r exceeds the mean of the (up to
    4) rows below by b_min -- a 9-row window centred on r. Accepted rows are
    median-filtered across columns (window 7).
    """
    h, w = img.height, img.width
    ls = _box3_columns(luma(img))
    grad = np.abs(ls[1:] - ls[:-1])  # (h-1, w), edge between rows r, r+1

    half = cfg.contrast_window // 2
    # Prefix sums over rows for fast windowed means: above = rows [r-4, r],
    # below = rows [r+1, r+4] (clamped at the borders).
    csum = np.vstack([np.zeros((1, w)), np.cumsum(ls, axis=0)])
    r = np.arange(h - 1)
    above_lo = np.maximum(0, r - half)
    below_hi = np.minimum(h - 1, r + half)
    above = (csum[r + 1] - csum[above_lo]) / (r - above_lo + 1)[:, None]
    below = (csum[below_hi + 1] - csum[r + 1]) / (below_hi - r)[:, None]

    ok = (grad >= cfg.g_min * 255.0) & (above - below >= cfg.b_min * 255.0)
    any_ok = ok.any(axis=0)
    top = np.argmax(ok, axis=0)  # first qualifying row per column

    rows = np.where(any_ok, top.astype(np.float64), np.nan)

    # Median filter across columns; undefined columns stay undefined.
    mw = cfg.median_window
    filt = rows.copy()
    halfw = mw // 2
    for c in np.nonzero(any_ok)[0]:
        window = rows[max(0, c - halfw): c + halfw + 1]
        vals = np.sort(window[np.isfinite(window)])
        filt[c] = vals[len(vals) // 2]

    strength = np.zeros(w, dtype=np.float64)
    defined = np.isfinite(filt)
    ri = filt[defined].astype(np.int64).clip(0, h - 2)
    strength[defined] = np.clip(grad[ri, np.nonzero(defined)[0]] / 255.0, 0.0, 1.0)
    return SkylineProfile(w, h, filt, strength)


# ---------------------------------------------------------------------------
# Snow pixel test
# ---------------------------------------------------------------------------


def snow_pixel(rgb: tuple[int, int, int], v_min: float = 0.65, s_max: float = 0.25) -> bool:
    """Bright and unsaturated: V = max/255 >= v_min and S = 1 - min/max <= s_max."""
    r, g, b = rgb
    mx = max(r, g, b)
    v = mx / 255.0
    s = 1.0 - min(r, g, b) / mx if mx > 0 else 0.0
    return v >= v_min and s <= s_max


def snow_pixel_map(img: ImageBuffer, v_min: float = 0.65, s_max: float = 0.25) -> np.ndarray:
    """Vectorised snow_pixel over a whole image."""
    px = img.pixels.astype(np.float64)
    mx = px.max(axis=2)
    mn = px.min(axis=2)
    v = mx / 255.0
    s = np.where(mx > 0, 1.0 - mn / np.where(mx > 0, mx, 1.0), 0.0)
    return (v >= v_min) & (s <= s_max)


# ---------------------------------------------------------------------------
# Weather scoring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeatherScore:
    visibility: float
    usable: bool


def weather_score(
    frame: ImageBuffer,
    expected_rows,
    cfg: VisionConfig = VisionConfig(),
) -> WeatherScore:
    """Fraction of columns whose detected skyline sits within tol_px of the
    calibrated expected skyline. Sparse detections (fog) score zero.

    expected_rows may use None or NaN for columns without an expectation."""
    expected = np.array(
        [np.nan if v is None else float(v) for v in expected_rows], dtype=np.float64
    )
    if expected.size != frame.width:
        raise ValueError(f"expected skyline width {expected.size} != frame width {frame.width}")
    prof = extract_skyline(frame, cfg)
    detected = prof.defined
    if detected.mean() < cfg.min_detect_frac:
        return WeatherScore(0.0, False)
    both = detected & np.isfinite(expected)
    if not both.any():
        return WeatherScore(0.0, False)
    hits = np.abs(prof.rows[both] - expected[both]) <= cfg.tol_px
    vis = float(hits.mean())
    return WeatherScore(vis, vis >= cfg.weather_threshold)


# ---------------------------------------------------------------------------
# Mountain classifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassifierModel:
    weights: np.ndarray  # (19,): 18 feature weights + bias
    version: str = FEATURE_VERSION

    def __post_init__(self) -> None:
        if self.weights.shape != (N_FEATURES + 1,) or not np.all(np.isfinite(self.weights)):
            raise ValueError("model needs 19 finite weights")


def _orientation_histogram(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """8-bin histogram of gradient direction over [0, 360), magnitude-weighted
    and L1-normalised (all-zero when there is no gradient)."""
    mag = np.hypot(gx, gy)
    nz = mag > 1e-12
    hist = np.zeros(8, dtype=np.float64)
    if nz.any():
        theta = np.degrees(np.arctan2(gy[nz], gx[nz])) % 360.0
        bins = np.minimum((theta / 45.0).astype(np.int64), 7)
        np.add.at(hist, bins, mag[nz])
        hist /= hist.sum()
    return hist


def mountain_features(img: ImageBuffer, cfg: VisionConfig = VisionConfig()) -> np.ndarray:
    """18 floats: top-half and bottom-half orientation histograms (8 bins each),
    skyline coverage, skyline roughness."""
    lum = luma(img)
    gx = (lum[1:-1, 2:] - lum[1:-1, :-2]) / 2.0  # central differences, interior
    gy = (lum[2:, 1:-1] - lum[:-2, 1:-1]) / 2.0
    interior_rows = np.arange(1, img.height - 1)
    top = interior_rows < img.height // 2
    hist_top = _orientation_histogram(gx[top], gy[top])
    hist_bot = _orientation_histogram(gx[~top], gy[~top])

    prof = extract_skyline(img, cfg)
    coverage = prof.defined_frac
    vals = prof.rows[prof.defined]
    roughness = float(np.diff(vals).std() / img.height) if vals.size >= 2 else 0.0
    return np.concatenate([hist_top, hist_bot, [coverage, roughness]])


def classify_mountain(model: ClassifierModel, img: ImageBuffer, cfg: VisionConfig = VisionConfig()) -> tuple[bool, float]:
    if model.version != FEATURE_VERSION:
        raise ModelVersionError(f"model version {model.version!r} != {FEATURE_VERSION!r}")
    f = mountain_features(img, cfg)
    score = float(model.weights[:N_FEATURES] @ f + model.weights[N_FEATURES])
    return score >= 0.0, score


def train_classifier(
    labeled: list[tuple[ImageBuffer, bool]],
    cfg: VisionConfig = VisionConfig(),
    epochs: int = 200,
    lr0: float = 0.1,
    l2: float = 0.01,
) -> ClassifierModel:
    """Hinge-loss linear classifier fit by sub-gradient descent.

    Deterministic: zero init, examples visited in the given order, learning
    rate 0.1/sqrt(epoch). Mountain label maps to +1.
    """
    if len(labeled) < 2:
        raise ValueError("need at least two training examples")
    ys = {bool(lbl) for _, lbl in labeled}
    if len(ys) < 2:
        raise ValueError("training set must contain both classes")
    feats = np.stack([mountain_features(img, cfg) for img, _ in labeled])
    labels = np.array([1.0 if lbl else -1.0 for _, lbl in labeled])
    w = np.zeros(N_FEATURES)
    b = 0.0
    for epoch in range(1, epochs + 1):
        lr = lr0 / math.sqrt(epoch)
        for x, y in zip(feats, labels):
            if y * (w @ x + b) < 1.0:
                w += lr * (y * x - l2 * w)
                b += lr * y
            else:
                w -= lr * l2 * w
    return ClassifierModel(np.concatenate([w, [b]]))


def save_model(model: ClassifierModel, path) -> None:
    with open(path, "w") as fh:
        json.dump({"version": model.version, "weights": model.weights.tolist()}, fh)


def load_model(path) -> ClassifierModel:
    with open(path) as fh:
        raw = json.load(fh)
    return ClassifierModel(np.asarray(raw["weights"], dtype=np.float64), raw["version"])
