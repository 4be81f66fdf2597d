"""Digital elevation model handling and virtual panorama rendering.

The Earth model is a local equirectangular approximation (dx = R*dlon*cos(lat),
dy = R*dlat) combined with a curvature-plus-refraction drop term
drop(d) = d^2 * (1 - k) / (2 R) with k = 0.13, which is adequate for the
sub-50 km sight lines this system deals with.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import RenderConfig

EARTH_RADIUS_M = 6_371_000.0
REFRACTION_K = 0.13

SKY = 0
TERRAIN = 1

# Drop coefficient: metres lost per metre-of-distance squared.
_DROP_COEFF = (1.0 - REFRACTION_K) / (2.0 * EARTH_RADIUS_M)


class DemParseError(ValueError):
    """Raised when a DEM or peak catalog file cannot be parsed."""


class ViewpointError(ValueError):
    """Raised when a render viewpoint falls outside the DEM."""


def curvature_drop(d: float | np.ndarray) -> float | np.ndarray:
    """Apparent height loss (m) of a point at ground distance d (m)."""
    return d * d * _DROP_COEFF


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    alt: float | None = None

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon < 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.alt is not None and not -500.0 <= self.alt <= 9000.0:
            raise ValueError(f"altitude out of range: {self.alt}")


@dataclass(frozen=True)
class Peak:
    name: str
    position: GeoPoint

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("peak name must be non-empty")
        if self.position.alt is None:
            raise ValueError(f"peak {self.name!r} needs an altitude")


@dataclass(frozen=True)
class Viewpoint:
    position: GeoPoint
    eye_height: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.eye_height <= 100.0:
            raise ValueError(f"eye_height out of range: {self.eye_height}")


class DemGrid:
    """Regular lat/lon elevation raster.

    Row 0 of `elevations` is the southernmost row; `origin` is the centre of
    the lower-left (south-west) cell. Nodata cells are stored as NaN.
    """

    def __init__(
        self,
        origin: GeoPoint,
        n_rows: int,
        n_cols: int,
        cell_size: float,
        nodata: float,
        elevations: np.ndarray,
    ) -> None:
        if n_rows <= 0 or n_cols <= 0:
            raise ValueError("grid dimensions must be positive")
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        elev = np.asarray(elevations, dtype=np.float64)
        if elev.size != n_rows * n_cols:
            raise ValueError(f"expected {n_rows * n_cols} cells, found {elev.size}")
        elev = elev.reshape(n_rows, n_cols).copy()
        elev[elev == nodata] = np.nan
        finite = elev[np.isfinite(elev)]
        if finite.size and (finite.min() < -500.0 or finite.max() > 9000.0):
            raise ValueError("elevations outside [-500, 9000] m")
        self.origin = origin
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.cell_size = cell_size
        self.nodata = nodata
        self.elevations = elev
        self.elevations.setflags(write=False)

    @property
    def lat_max(self) -> float:
        return self.origin.lat + (self.n_rows - 1) * self.cell_size

    @property
    def lon_max(self) -> float:
        return self.origin.lon + (self.n_cols - 1) * self.cell_size

    def sample_many(self, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
        """Bilinear elevation at each point; NaN when out of bounds or any
        of the four interpolation neighbours is nodata."""
        fy = (np.asarray(lat, dtype=np.float64) - self.origin.lat) / self.cell_size
        fx = (np.asarray(lon, dtype=np.float64) - self.origin.lon) / self.cell_size
        inside = (fy >= 0) & (fy <= self.n_rows - 1) & (fx >= 0) & (fx <= self.n_cols - 1)
        fy = np.where(inside, fy, 0.0)
        fx = np.where(inside, fx, 0.0)
        # Clamp so the i+1 neighbour exists even on the top/right sampling edge.
        iy = np.minimum(fy.astype(np.int64), self.n_rows - 2) if self.n_rows > 1 else np.zeros_like(fy, np.int64)
        ix = np.minimum(fx.astype(np.int64), self.n_cols - 2) if self.n_cols > 1 else np.zeros_like(fx, np.int64)
        wy = fy - iy
        wx = fx - ix
        e = self.elevations
        if self.n_rows == 1 and self.n_cols == 1:
            out = np.broadcast_to(e[0, 0], fy.shape).copy()
        elif self.n_rows == 1:
            out = e[0, ix] * (1 - wx) + e[0, ix + 1] * wx
        elif self.n_cols == 1:
            out = e[iy, 0] * (1 - wy) + e[iy + 1, 0] * wy
        else:
            out = (
                e[iy, ix] * (1 - wy) * (1 - wx)
                + e[iy, ix + 1] * (1 - wy) * wx
                + e[iy + 1, ix] * wy * (1 - wx)
                + e[iy + 1, ix + 1] * wy * wx
            )
        return np.where(inside, out, np.nan)

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.origin.lat <= p.lat <= self.lat_max
            and self.origin.lon <= p.lon <= self.lon_max
        )


def sample_elevation(dem: DemGrid, p: GeoPoint) -> float | None:
    """Bilinear elevation at p, or None outside the grid / on nodata."""
    v = float(dem.sample_many(np.array([p.lat]), np.array([p.lon]))[0])
    return None if math.isnan(v) else v


# ---------------------------------------------------------------------------
# DEM / peak file formats
# ---------------------------------------------------------------------------

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def load_dem(path) -> DemGrid:
    """Parse the ASCII grid format (ESRI-style header, rows north to south).

    xllcorner/yllcorner give the outer corner of the lower-left cell; the
    grid origin is that corner plus half a cell.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    header: dict[str, float] = {}
    for i, key in enumerate(_HEADER_KEYS):
        if i >= len(lines):
            raise DemParseError(f"line {i + 1}: missing header line '{key}'")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0].lower() != key:
            raise DemParseError(f"line {i + 1}: expected '{key} <value>', found {lines[i]!r}")
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise DemParseError(f"line {i + 1}: non-numeric value {parts[1]!r}") from None
    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    if n_cols <= 0 or n_rows <= 0 or header["ncols"] != n_cols or header["nrows"] != n_rows:
        raise DemParseError("line 1: ncols/nrows must be positive integers")
    cells: list[float] = []
    for lineno, line in enumerate(lines[len(_HEADER_KEYS):], start=len(_HEADER_KEYS) + 1):
        for tok in line.split():
            try:
                cells.append(float(tok))
            except ValueError:
                raise DemParseError(f"line {lineno}: non-numeric cell {tok!r}") from None
    expected = n_rows * n_cols
    if len(cells) != expected:
        raise DemParseError(f"expected {expected} cells, found {len(cells)}")
    # File rows run north to south; flip so row 0 is the southernmost.
    grid = np.array(cells, dtype=np.float64).reshape(n_rows, n_cols)[::-1]
    origin = GeoPoint(
        header["yllcorner"] + header["cellsize"] / 2.0,
        header["xllcorner"] + header["cellsize"] / 2.0,
    )
    return DemGrid(origin, n_rows, n_cols, header["cellsize"], header["nodata_value"], grid)


def save_dem(dem: DemGrid, path) -> None:
    """Inverse of load_dem, mainly for fixture generation."""
    out = [
        f"ncols {dem.n_cols}",
        f"nrows {dem.n_rows}",
        f"xllcorner {dem.origin.lon - dem.cell_size / 2.0!r}",
        f"yllcorner {dem.origin.lat - dem.cell_size / 2.0!r}",
        f"cellsize {dem.cell_size!r}",
        f"nodata_value {dem.nodata}",
    ]
    filled = np.where(np.isfinite(dem.elevations), dem.elevations, dem.nodata)
    for row in filled[::-1]:
        out.append(" ".join(f"{v:.3f}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def load_peaks(path) -> list[Peak]:
    """Parse the peak catalog CSV (header: name,lat,lon,alt)."""
    import csv

    peaks: list[Peak] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DemParseError("line 1: missing header") from None
        if [h.strip().lower() for h in header] != ["name", "lat", "lon", "alt"]:
            raise DemParseError(f"line 1: expected header 'name,lat,lon,alt', found {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DemParseError(f"line {lineno}: expected 4 columns, found {len(row)}")
            name = row[0].strip()
            try:
                lat, lon, alt = (float(c) for c in row[1:])
            except ValueError:
                raise DemParseError(f"line {lineno}: non-numeric coordinate in {row}") from None
            try:
                peaks.append(Peak(name, GeoPoint(lat, lon, alt)))
            except ValueError as exc:
                raise DemParseError(f"line {lineno}: {exc}") from None
    return peaks


# ---------------------------------------------------------------------------
# Panorama rendering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PanoramaCell:
    kind: int
    distance: float | None = None
    altitude: float | None = None
    ground: GeoPoint | None = None


@dataclass
class Panorama:
    """Cylindrical terrain rendering from a viewpoint.

    Column c is centred on azimuth c * az_res (0 = north, clockwise); row 0
    covers elevations [el_min, el_min + el_res). `skyline` holds the exact
    (continuous) maximum apparent elevation angle per column, NaN where no
    terrain is visible inside the elevation window.
    """

    viewpoint: Viewpoint
    az_res: float
    el_res: float
    el_min: float
    el_max: float
    eye_elevation: float                      # viewpoint ground + eye height, metres
    kind: np.ndarray                          # uint8 (rows, cols)
    distance: np.ndarray                      # float32 (rows, cols), NaN on SKY
    altitude: np.ndarray                      # float32 (rows, cols), NaN on SKY
    ground_lat: np.ndarray                    # float32 (rows, cols), NaN on SKY
    ground_lon: np.ndarray                    # float32 (rows, cols), NaN on SKY
    skyline: np.ndarray                       # float64 (cols,), NaN = no terrain
    peak_marks: list[tuple[Peak, float, float]] = field(default_factory=list)

    @property
    def n_cols(self) -> int:
        return self.kind.shape[1]

    @property
    def n_rows(self) -> int:
        return self.kind.shape[0]

    def cell(self, row: int, col: int) -> PanoramaCell:
        if self.kind[row, col] == SKY:
            return PanoramaCell(SKY)
        return PanoramaCell(
            TERRAIN,
            float(self.distance[row, col]),
            float(self.altitude[row, col]),
            GeoPoint(float(self.ground_lat[row, col]), float(self.ground_lon[row, col])),
        )

    def skyline_at(self, az_deg: float | np.ndarray) -> float | np.ndarray:
        """Skyline elevation at an arbitrary azimuth, linearly interpolated
        between columns (cyclic). NaN when either neighbour has no terrain."""
        pos = np.asarray(az_deg, dtype=np.float64) / self.az_res
        i0 = np.floor(pos).astype(np.int64)
        w = pos - i0
        n = self.skyline.size
        v = self.skyline[i0 % n] * (1.0 - w) + self.skyline[(i0 + 1) % n] * w
        return float(v) if np.isscalar(az_deg) else v


def _march_schedule(d_min: float, d_max: float, cell_m: float, az_res_deg: float) -> np.ndarray:
    """Ground distances sampled along every ray: step grows with distance so
    the azimuthal footprint stays below one column."""
    tan_step = math.tan(math.radians(az_res_deg))
    ds = [d_min]
    d = d_min
    while d < d_max:
        d += max(cell_m / 2.0, d * tan_step)
        ds.append(min(d, d_max))
    return np.array(ds, dtype=np.float64)


def render_panorama(dem: DemGrid, vp: Viewpoint, cfg: RenderConfig = RenderConfig()) -> Panorama:
    """Ray-march the DEM from vp and build the panorama grid plus skyline."""
    ground = sample_elevation(dem, vp.position)
    if ground is None:
        raise ViewpointError("viewpoint outside DEM")
    eye_elev = ground + vp.eye_height

    lat0 = math.radians(vp.position.lat)
    lon0 = math.radians(vp.position.lon)
    cos_lat0 = math.cos(lat0)
    n_cols = int(round(360.0 / cfg.az_res))
    n_rows = int(round((cfg.el_max - cfg.el_min) / cfg.el_res))
    az = np.radians(np.arange(n_cols) * cfg.az_res)
    sin_az = np.sin(az)
    cos_az = np.cos(az)

    # No DEM beyond the farthest corner, so cap the march there.
    corner_d = 0.0
    for clat in (dem.origin.lat, dem.lat_max):
        for clon in (dem.origin.lon, dem.lon_max):
            dy = EARTH_RADIUS_M * math.radians(clat - vp.position.lat)
            dx = EARTH_RADIUS_M * math.radians(clon - vp.position.lon) * cos_lat0
            corner_d = max(corner_d, math.hypot(dx, dy))
    cell_m = EARTH_RADIUS_M * math.radians(dem.cell_size) * min(1.0, cos_lat0)
    schedule = _march_schedule(cfg.d_min, min(cfg.d_max, corner_d + cell_m), cell_m, cfg.az_res)
    n_steps = schedule.size

    angles = np.full((n_steps, n_cols), -np.inf, dtype=np.float32)
    heights = np.empty((n_steps, n_cols), dtype=np.float32)
    for i, d in enumerate(schedule):
        plat = np.degrees(lat0 + d * cos_az / EARTH_RADIUS_M)
        plon = np.degrees(lon0 + d * sin_az / (EARTH_RADIUS_M * cos_lat0))
        h = dem.sample_many(plat, plon)
        a = np.degrees(np.arctan2(h - eye_elev - curvature_drop(d), d))
        # Nodata samples are transparent: they never occlude nor hit.
        angles[i] = np.where(np.isnan(h), -np.inf, a)
        heights[i] = h
    np.maximum.accumulate(angles, axis=0, out=angles)

    raw_max = angles[-1].astype(np.float64)
    visible = raw_max >= cfg.el_min
    skyline = np.where(visible, np.minimum(raw_max, cfg.el_max), np.nan)

    # Row r is TERRAIN iff its centre angle is reached by the running max;
    # the covering sample is the first march step whose running max crosses it.
    row_centers = (cfg.el_min + (np.arange(n_rows) + 0.5) * cfg.el_res).astype(np.float32)
    step_idx = np.empty((n_rows, n_cols), dtype=np.int64)
    for c in range(n_cols):
        step_idx[:, c] = np.searchsorted(angles[:, c], row_centers, side="left")
    covered = step_idx < n_steps
    safe = np.minimum(step_idx, n_steps - 1)
    d_sel = schedule[safe]
    h_sel = np.take_along_axis(heights, safe, axis=0)

    kind = np.where(covered, TERRAIN, SKY).astype(np.uint8)
    nanf = np.float32(np.nan)
    distance = np.where(covered, d_sel, nanf).astype(np.float32)
    altitude = np.where(covered, h_sel, nanf).astype(np.float32)
    g_lat = np.degrees(lat0 + d_sel * cos_az[None, :] / EARTH_RADIUS_M)
    g_lon = np.degrees(lon0 + d_sel * sin_az[None, :] / (EARTH_RADIUS_M * cos_lat0))
    ground_lat = np.where(covered, g_lat, nanf).astype(np.float32)
    ground_lon = np.where(covered, g_lon, nanf).astype(np.float32)

    return Panorama(
        viewpoint=vp,
        az_res=cfg.az_res,
        el_res=cfg.el_res,
        el_min=cfg.el_min,
        el_max=cfg.el_max,
        eye_elevation=eye_elev,
        kind=kind,
        distance=distance,
        altitude=altitude,
        ground_lat=ground_lat,
        ground_lon=ground_lon,
        skyline=skyline,
    )


def peak_bearing(vp: Viewpoint, eye_elev: float, peak: Peak) -> tuple[float, float, float]:
    """(azimuth deg, apparent elevation deg, ground distance m) of a peak,
    using the same Earth model as rendering."""
    dy = EARTH_RADIUS_M * math.radians(peak.position.lat - vp.position.lat)
    dx = (
        EARTH_RADIUS_M
        * math.radians(peak.position.lon - vp.position.lon)
        * math.cos(math.radians(vp.position.lat))
    )
    d = math.hypot(dx, dy)
    az = math.degrees(math.atan2(dx, dy)) % 360.0
    el = math.degrees(math.atan2(peak.position.alt - eye_elev - curvature_drop(d), d)) if d > 0 else 90.0
    return az, el, d


def project_peaks(
    pano: Panorama, catalog: list[Peak], cfg: RenderConfig = RenderConfig()
) -> list[tuple[Peak, float, float]]:
    """Peaks visible in the panorama: inside [d_min, d_max] and not more than
    vis_tol below the rendered skyline at their azimuth. Also recorded on
    pano.peak_marks."""
    marks: list[tuple[Peak, float, float]] = []
    for peak in catalog:
        az, el, d = peak_bearing(pano.viewpoint, pano.eye_elevation, peak)
        if not cfg.d_min <= d <= cfg.d_max:
            continue
        sky = pano.skyline_at(az)
        # An open horizon (no rendered terrain) never occludes.
        if not math.isnan(sky) and el < sky - cfg.vis_tol:
            continue
        marks.append((peak, az, el))
    pano.peak_marks = marks
    return marks


# ---------------------------------------------------------------------------
# Debug export
# ---------------------------------------------------------------------------


def panorama_sidecar(pano: Panorama) -> dict:
    return {
        "az_res": pano.az_res,
        "el_res": pano.el_res,
        "el_min": pano.el_min,
        "el_max": pano.el_max,
        "skyline": [None if math.isnan(v) else round(v, 4) for v in pano.skyline.tolist()],
    }


def panorama_to_png(pano: Panorama) -> bytes:
    """SKY in blue, TERRAIN shaded light-to-dark by distance. Top row = el_max."""
    import io

    from PIL import Image

    rows, cols = pano.kind.shape
    rgb = np.zeros((rows, cols, 3), dtype=np.uint8)
    rgb[..., 0], rgb[..., 1], rgb[..., 2] = 60, 120, 220
    terr = pano.kind == TERRAIN
    if terr.any():
        d = pano.distance[terr]
        dmax = float(np.nanmax(d))
        shade = (230.0 - 180.0 * (d / max(dmax, 1.0))).astype(np.uint8)
        for ch in range(3):
            chan = rgb[..., ch]
            chan[terr] = shade
    img = Image.fromarray(rgb[::-1])  # row 0 is el_min; flip for display
    buf = io.BytesIO()
    img.save(buf, "PNG")
    return buf.getvalue()


def export_panorama(pano: Panorama, png_path, sidecar_path=None) -> None:
    with open(png_path, "wb") as fh:
        fh.write(panorama_to_png(pano))
    if sidecar_path is not None:
        with open(sidecar_path, "w") as fh:
            json.dump(panorama_sidecar(pano), fh)
