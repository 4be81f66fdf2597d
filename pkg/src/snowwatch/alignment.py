"""Camera orientation estimation by skyline matching, plus manual warp maps.

The matcher compares the photo's detected skyline, converted to angular
coordinates through a pinhole model, against the rendered panorama skyline.
A full yaw sweep with a pitch/FOV grid finds the coarse optimum; coordinate
descent polishes yaw and pitch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import AlignConfig
from .terrain import Panorama
from .vision import SkylineProfile

AUTO = "AUTO"
MANUAL = "MANUAL"


class AlignmentError(ValueError):
    """Alignment could not be attempted (sparse skyline, empty panorama)."""


@dataclass(frozen=True)
class CameraPose:
    yaw: float    # degrees, azimuth of image centre, 0 = north, clockwise
    pitch: float  # degrees, elevation of image centre
    hfov: float   # degrees, horizontal field of view

    def __post_init__(self) -> None:
        if not 0.0 <= self.yaw < 360.0:
            raise ValueError(f"yaw out of range: {self.yaw}")
        if not -20.0 <= self.pitch <= 20.0:
            raise ValueError(f"pitch out of range: {self.pitch}")
        if not 5.0 <= self.hfov <= 120.0:
            raise ValueError(f"hfov out of range: {self.hfov}")

    def vfov(self, width: int, height: int) -> float:
        return self.hfov * height / width


@dataclass(frozen=True)
class WarpMap:
    """Sparse manual correction: photo pixels pinned to panorama angles.

    Points are (photo column px, photo row px, panorama azimuth deg,
    panorama elevation deg) with strictly increasing columns.
    """

    points: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("a warp needs at least two control points")
        cols = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(cols, cols[1:])):
            raise ValueError("warp control columns must be strictly increasing")
        # Azimuth monotone over the covered span (mod 360): successive
        # clockwise deltas must stay within half a turn.
        azs = [p[2] for p in self.points]
        for a, b in zip(azs, azs[1:]):
            if (b - a) % 360.0 > 180.0:
                raise ValueError("warp azimuths must be monotone (clockwise)")


@dataclass(frozen=True)
class AlignmentResult:
    pose: CameraPose
    score: float          # mean absolute skyline error, degrees
    confidence: float     # exp(-score / score_scale)
    source: str           # AUTO | MANUAL
    warp: WarpMap | None = None
    ambiguous: bool = False

    def to_json(self) -> dict:
        return {
            "yaw": self.pose.yaw,
            "pitch": self.pose.pitch,
            "hfov": self.pose.hfov,
            "score": self.score,
            "confidence": self.confidence,
            "source": self.source,
            "warp": {"points": [list(p) for p in self.warp.points]} if self.warp else None,
            "ambiguous": self.ambiguous,
        }

    @staticmethod
    def from_json(raw: dict) -> "AlignmentResult":
        warp = None
        if raw.get("warp"):
            warp = WarpMap(tuple(tuple(p) for p in raw["warp"]["points"]))
        return AlignmentResult(
            CameraPose(raw["yaw"], raw["pitch"], raw["hfov"]),
            raw["score"],
            raw["confidence"],
            raw["source"],
            warp,
            raw.get("ambiguous", False),
        )


def confidence_from_score(score: float, score_scale: float = 0.5) -> float:
    return math.exp(-score / score_scale)


# ---------------------------------------------------------------------------
# Pinhole mapping
# ---------------------------------------------------------------------------


def _azimuth_offsets(cols: np.ndarray, width: int, hfov: float) -> np.ndarray:
    x = (np.asarray(cols, dtype=np.float64) - width / 2.0) / (width / 2.0)
    return np.degrees(np.arctan(x * math.tan(math.radians(hfov / 2.0))))


def _elevation_offsets(rows: np.ndarray, width: int, height: int, hfov: float) -> np.ndarray:
    vfov = hfov * height / width
    y = (np.asarray(rows, dtype=np.float64) - height / 2.0) / (height / 2.0)
    return -np.degrees(np.arctan(y * math.tan(math.radians(vfov / 2.0))))


def photo_skyline_angles(
    profile: SkylineProfile, pose: CameraPose, width: int, height: int
) -> list[tuple[float, float]]:
    """(azimuth, elevation) of the skyline in each defined photo column."""
    if profile.width != width:
        raise ValueError(f"profile width {profile.width} != photo width {width}")
    cols = np.nonzero(profile.defined)[0]
    az = pose.yaw + _azimuth_offsets(cols, width, pose.hfov)
    el = pose.pitch + _elevation_offsets(profile.rows[cols], width, height, pose.hfov)
    return list(zip(az.tolist(), el.tolist()))


@dataclass(frozen=True)
class PixelMapping:
    """Panorama angles for every photo pixel."""

    azimuth: np.ndarray   # float64 (height, width), degrees, not wrapped
    elevation: np.ndarray

    @property
    def height(self) -> int:
        return self.azimuth.shape[0]

    @property
    def width(self) -> int:
        return self.azimuth.shape[1]


def build_mapping(pose: CameraPose, width: int, height: int) -> PixelMapping:
    az = pose.yaw + _azimuth_offsets(np.arange(width), width, pose.hfov)
    el = pose.pitch + _elevation_offsets(np.arange(height), width, height, pose.hfov)
    return PixelMapping(
        np.broadcast_to(az, (height, width)).copy(),
        np.broadcast_to(el[:, None], (height, width)).copy(),
    )


def apply_warp(mapping: PixelMapping, warp: WarpMap) -> PixelMapping:
    """Piecewise-linear column correction: each control point's offset is the
    gap between its target angles and the unwarped mapping at its pixel;
    offsets interpolate linearly between control columns and hold constant
    outside the controlled span."""
    h, w = mapping.height, mapping.width
    cols = np.array([p[0] for p in warp.points])
    if cols.min() < 0 or cols.max() > w - 1:
        raise ValueError("warp control column outside the photo")
    rows = np.array([p[1] for p in warp.points])
    if rows.min() < 0 or rows.max() > h - 1:
        raise ValueError("warp control row outside the photo")
    ci = np.clip(np.rint(cols).astype(np.int64), 0, w - 1)
    ri = np.clip(np.rint(rows).astype(np.int64), 0, h - 1)
    daz = np.array([p[2] for p in warp.points]) - mapping.azimuth[ri, ci]
    del_ = np.array([p[3] for p in warp.points]) - mapping.elevation[ri, ci]
    x = np.arange(w, dtype=np.float64)
    off_az = np.interp(x, cols, daz)  # np.interp holds the end values outside
    off_el = np.interp(x, cols, del_)
    return PixelMapping(mapping.azimuth + off_az[None, :], mapping.elevation + off_el[None, :])


# ---------------------------------------------------------------------------
# Pose search
# ---------------------------------------------------------------------------


def _interp_skyline(sky: np.ndarray, az_res: float, az: np.ndarray) -> np.ndarray:
    """Cyclic linear interpolation; NaN where a neighbour column is sentinel."""
    pos = np.asarray(az, dtype=np.float64) / az_res
    i0 = np.floor(pos).astype(np.int64)
    wfrac = pos - i0
    n = sky.size
    return sky[i0 % n] * (1.0 - wfrac) + sky[(i0 + 1) % n] * wfrac




def estimate_pose(
    profile: SkylineProfile,
    pano: Panorama,
    prior: CameraPose | None = None,
    cfg: AlignConfig = AlignConfig(),
) -> AlignmentResult:
    """Grid search over yaw (full circle), pitch and FOV-around-prior, scored
    by mean absolute skyline elevation error, then coordinate descent."""
    width, height = profile.width, profile.height
    defined = profile.defined
    if defined.mean() < cfg.min_defined_frac:
        raise AlignmentError("skyline too sparse")
    sky = pano.skyline
    if not np.isfinite(sky).any():
        raise AlignmentError("panorama has no terrain")

    cdef = np.nonzero(defined)[0]
    det_rows = profile.rows[cdef]
    az_res = pano.az_res
    n_pano = sky.size
    yaw_step = az_res * cfg.yaw_step_cols
    n_yaw = int(round(360.0 / yaw_step))
    yaws = np.arange(n_yaw) * yaw_step
    base_cols = np.arange(n_yaw, dtype=np.int64) * cfg.yaw_step_cols
    hfov0 = prior.hfov if prior is not None else cfg.default_hfov
    min_usable = max(1, math.ceil(cfg.min_usable_frac * width))

    # Per-hfov best grid candidate: (score, yaw, pitch, dalpha, e_off).
    starts: dict[float, tuple[float, float, float, np.ndarray, np.ndarray]] = {}
    cand_scores: list[np.ndarray] = []

    candidates = sorted({min(120.0, max(5.0, f * hfov0)) for f in cfg.fov_factors})
    for hfov in candidates:
        dalpha = _azimuth_offsets(cdef, width, hfov)
        e_off = _elevation_offsets(det_rows, width, height, hfov)
        # Yaw grid steps are whole panorama columns, so the fractional part of
        # every lookup is fixed per photo column.
        q = dalpha / az_res
        i0 = np.floor(q).astype(np.int64)
        wfrac = q - i0
        idx = (base_cols[:, None] + i0[None, :]) % n_pano  # (n_yaw, n_def)
        m = sky[idx] * (1.0 - wfrac) + sky[(idx + 1) % n_pano] * wfrac
        d = e_off[None, :] - m  # photo elevation (minus pitch) vs panorama

        d_sorted = np.sort(d, axis=1)  # NaNs sort to the end
        valid_n = np.count_nonzero(np.isfinite(d), axis=1)
        prefix = np.zeros((n_yaw, d.shape[1] + 1))
        np.cumsum(np.where(np.isfinite(d_sorted), d_sorted, 0.0), axis=1, out=prefix[:, 1:])
        usable = valid_n >= min_usable

        # Candidate score per yaw, pitch treated as a nuisance parameter: the
        # mean |pitch - d| is minimized exactly by the (clipped) median of the
        # residuals, read straight off the sorted rows. Stepping pitch on a
        # grid instead can strand the later descent in the wrong valley when
        # the window's skyline is near-linear.
        rows_i = np.arange(n_yaw)
        med_idx = np.maximum(valid_n - 1, 0) // 2
        shift = np.clip(-d_sorted[rows_i, med_idx], cfg.pitch_min, cfg.pitch_max)
        k = np.sum(d_sorted < -shift[:, None], axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            opt = (
                (prefix[rows_i, valid_n] - 2.0 * prefix[rows_i, k])
                + shift * (valid_n - 2.0 * k)
            ) / valid_n
        opt[~usable] = np.inf
        cand_scores.append(opt[usable])
        j = int(np.argmin(opt))
        if math.isfinite(opt[j]):
            starts[hfov] = (float(opt[j]), float(yaws[j]), float(shift[j]), dalpha, e_off)

    if not starts:
        raise AlignmentError("no usable alignment candidate")
    finite_scores = np.concatenate(cand_scores)
    finite_scores = finite_scores[np.isfinite(finite_scores)]
    grid_best = float(finite_scores.min())
    # A degenerate (near-featureless) skyline fits comparably well at many
    # yaws, so the median candidate is then about as good as the best one.
    ambiguous = bool(np.median(finite_scores) - grid_best < cfg.ambiguity_gap)

    def evaluate(y: float, dalpha: np.ndarray, e_off: np.ndarray) -> tuple[float, float]:
        """Best (score, pitch) at yaw y; pitch minimized exactly.

        mean |pitch - diff| over columns is minimized by the median, so the
        pitch coordinate needs no stepping. Stepping it instead stalls the
        descent whenever the window's skyline is near-linear (yaw and pitch
        then trade off along a diagonal score valley).
        """
        m = _interp_skyline(sky, az_res, (y + dalpha) % 360.0)
        diff = m - e_off
        finite = diff[np.isfinite(diff)]
        if finite.size < min_usable:
            return math.inf, 0.0
        p = float(np.clip(np.median(finite), -20.0, 20.0))
        return float(np.abs(p - finite).mean()), p

    # The coarse pitch grid can let a mis-scaled FOV win the grid stage on a
    # smooth skyline, so every FOV candidate is polished before choosing.
    best: tuple[float, float, float, float] | None = None  # (score, yaw, pitch, hfov)
    for hfov, (_, yaw, _pitch, dalpha, e_off) in sorted(starts.items()):
        score, pitch = evaluate(yaw, dalpha, e_off)
        step = cfg.refine_step
        for _ in range(cfg.refine_rounds):
            moved = True
            guard = 0
            while moved and guard < 400:
                moved = False
                guard += 1
                for dy in (step, -step):
                    cand, p = evaluate(yaw + dy, dalpha, e_off)
                    if cand < score:
                        yaw, pitch, score = yaw + dy, p, cand
                        moved = True
                        break
            step = max(step / 2.0, cfg.refine_floor)
        key = (score, yaw % 360.0, pitch, hfov)
        if best is None or key < best:
            best = key

    score, yaw, pitch, hfov = best
    pose = CameraPose(yaw, pitch, hfov)
    return AlignmentResult(
        pose, score, confidence_from_score(score, cfg.score_scale), AUTO, None, ambiguous
    )
