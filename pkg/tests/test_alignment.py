"""Pose estimation, pinhole mapping, and manual warp maps."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snowwatch import synthetic as syn
from snowwatch.alignment import (
    AlignmentError,
    AlignmentResult,
    CameraPose,
    WarpMap,
    apply_warp,
    build_mapping,
    confidence_from_score,
    estimate_pose,
    photo_skyline_angles,
)
from snowwatch.config import RenderConfig
from snowwatch.terrain import GeoPoint, Viewpoint, render_panorama
from snowwatch.vision import SkylineProfile


def profile_with(width, height, cols, rows):
    r = np.full(width, np.nan)
    for c, row in zip(cols, rows):
        r[c] = row
    return SkylineProfile(width, height, r, np.where(np.isfinite(r), 1.0, 0.0))


def yaw_error(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


# ---------------------------------------------------------------------------
# Pose and warp types
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "yaw,pitch,hfov",
    [(-0.1, 0, 50), (360.0, 0, 50), (0, -20.5, 50), (0, 21, 50), (0, 0, 4.9), (0, 0, 121)],
)
def test_camera_pose_rejects_out_of_range(yaw, pitch, hfov):
    with pytest.raises(ValueError):
        CameraPose(yaw, pitch, hfov)


def test_vfov_scales_with_aspect():
    assert CameraPose(0, 0, 40).vfov(400, 300) == pytest.approx(30.0)
    assert CameraPose(0, 0, 40).vfov(600, 800) == pytest.approx(40.0 * 8 / 6)


def test_warp_map_validation():
    with pytest.raises(ValueError):
        WarpMap(((0.0, 0.0, 10.0, 0.0),))
    with pytest.raises(ValueError):
        WarpMap(((5.0, 0.0, 10.0, 0.0), (5.0, 0.0, 20.0, 0.0)))
    # Clockwise crossing of north is monotone; the reverse is not.
    WarpMap(((0.0, 0.0, 350.0, 0.0), (10.0, 0.0, 5.0, 0.0)))
    with pytest.raises(ValueError):
        WarpMap(((0.0, 0.0, 10.0, 0.0), (10.0, 0.0, 350.0, 0.0)))


def test_alignment_result_json_roundtrip():
    warp = WarpMap(((0.0, 1.0, 10.0, 2.0), (30.0, 2.0, 20.0, 1.0)))
    res = AlignmentResult(CameraPose(123.0, 1.5, 40.0), 0.03, 0.9, "MANUAL", warp, True)
    back = AlignmentResult.from_json(res.to_json())
    assert back == res


# ---------------------------------------------------------------------------
# Pinhole conversions
# ---------------------------------------------------------------------------


def test_photo_skyline_angles_principal_point():
    prof = profile_with(40, 30, [20], [15.0])
    [(az, el)] = photo_skyline_angles(prof, CameraPose(90.0, 0.0, 40.0), 40, 30)
    assert az == pytest.approx(90.0, abs=1e-12)
    assert el == pytest.approx(0.0, abs=1e-12)


def test_photo_skyline_angles_left_edge():
    prof = profile_with(40, 30, [0], [15.0])
    [(az, _)] = photo_skyline_angles(prof, CameraPose(90.0, 0.0, 40.0), 40, 30)
    assert abs(az - 70.0) < 0.2  # atan model meets the linear one at the edge


def test_photo_skyline_angles_empty_and_mismatch():
    empty = profile_with(40, 30, [], [])
    assert photo_skyline_angles(empty, CameraPose(0.0, 0.0, 40.0), 40, 30) == []
    prof = profile_with(40, 30, [1], [2.0])
    with pytest.raises(ValueError):
        photo_skyline_angles(prof, CameraPose(0.0, 0.0, 40.0), 50, 30)


def test_build_mapping_centre_and_corner():
    m = build_mapping(CameraPose(90.0, 5.0, 40.0), 40, 30)
    assert m.azimuth[15, 20] == pytest.approx(90.0, abs=1e-12)
    assert m.elevation[15, 20] == pytest.approx(5.0, abs=1e-12)
    # Corner pixel: tan-corrected offsets for hfov 40 deg, vfov 30 deg.
    daz = math.degrees(math.atan((39 - 20) / 20 * math.tan(math.radians(20))))
    del_ = math.degrees(math.atan((29 - 15) / 15 * math.tan(math.radians(15))))
    assert m.azimuth[29, 39] == pytest.approx(90.0 + daz)
    assert m.elevation[29, 39] == pytest.approx(5.0 - del_)


def test_build_mapping_is_continuous():
    m = build_mapping(CameraPose(10.0, 0.0, 60.0), 200, 150)
    assert np.max(np.diff(m.azimuth[0])) <= 2 * 60.0 / 200 + 1e-9
    assert np.max(np.abs(np.diff(m.elevation[:, 0]))) <= 2 * 45.0 / 150 + 1e-9


# ---------------------------------------------------------------------------
# Warping
# ---------------------------------------------------------------------------


def test_apply_warp_zero_offsets_is_identity():
    m = build_mapping(CameraPose(100.0, 5.0, 50.0), 40, 30)
    pts = tuple(
        (float(c), 10.0, float(m.azimuth[10, c]), float(m.elevation[10, c]))
        for c in (3, 17, 36)
    )
    out = apply_warp(m, WarpMap(pts))
    assert np.array_equal(out.azimuth, m.azimuth)
    assert np.array_equal(out.elevation, m.elevation)


def test_apply_warp_constant_offset():
    m = build_mapping(CameraPose(100.0, 0.0, 50.0), 40, 30)
    pts = (
        (0.0, 5.0, float(m.azimuth[5, 0]) + 2.0, float(m.elevation[5, 0])),
        (39.0, 5.0, float(m.azimuth[5, 39]) + 2.0, float(m.elevation[5, 39])),
    )
    out = apply_warp(m, WarpMap(pts))
    assert np.allclose(out.azimuth, m.azimuth + 2.0)
    assert np.allclose(out.elevation, m.elevation)


def test_apply_warp_linear_interpolation():
    m = build_mapping(CameraPose(100.0, 0.0, 50.0), 41, 30)
    pts = (
        (0.0, 5.0, float(m.azimuth[5, 0]), float(m.elevation[5, 0])),
        (40.0, 5.0, float(m.azimuth[5, 40]) + 4.0, float(m.elevation[5, 40])),
    )
    out = apply_warp(m, WarpMap(pts))
    assert out.azimuth[0, 20] == pytest.approx(m.azimuth[0, 20] + 2.0)


def test_apply_warp_holds_offsets_outside_span():
    m = build_mapping(CameraPose(100.0, 0.0, 50.0), 40, 30)
    pts = (
        (10.0, 5.0, float(m.azimuth[5, 10]) + 1.0, float(m.elevation[5, 10])),
        (20.0, 5.0, float(m.azimuth[5, 20]) + 3.0, float(m.elevation[5, 20])),
    )
    out = apply_warp(m, WarpMap(pts))
    assert out.azimuth[0, 0] == pytest.approx(m.azimuth[0, 0] + 1.0)
    assert out.azimuth[0, 39] == pytest.approx(m.azimuth[0, 39] + 3.0)


def test_apply_warp_rejects_out_of_raster_controls():
    m = build_mapping(CameraPose(100.0, 0.0, 50.0), 40, 30)
    with pytest.raises(ValueError):
        apply_warp(m, WarpMap(((0.0, 0.0, 99.0, 0.0), (45.0, 0.0, 120.0, 0.0))))


# ---------------------------------------------------------------------------
# Confidence
# ---------------------------------------------------------------------------


def test_confidence_of_zero_score_is_one():
    assert confidence_from_score(0.0) == 1.0


@given(
    st.floats(min_value=0, max_value=50),
    st.floats(min_value=1e-6, max_value=50),
)
def test_confidence_strictly_decreasing(s, delta):
    assert confidence_from_score(s + delta) < confidence_from_score(s)


# ---------------------------------------------------------------------------
# Pose estimation
# ---------------------------------------------------------------------------


def test_estimate_recovers_reference_pose(pano):
    pose = CameraPose(123.0, 1.0, 40.0)
    prof = syn.synth_profile(pano, pose, 600, 800)
    res = estimate_pose(prof, pano, prior=CameraPose(0.0, 0.0, 40.0))
    assert yaw_error(res.pose.yaw, 123.0) < 0.2
    assert abs(res.pose.pitch - 1.0) < 0.2
    assert res.score < 0.05
    assert res.source == "AUTO" and res.warp is None
    assert 0.0 < res.confidence <= 1.0


def test_estimate_without_prior_uses_default_fov(pano):
    pose = CameraPose(200.0, -3.0, 50.0)
    prof = syn.synth_profile(pano, pose, 600, 800)
    res = estimate_pose(prof, pano, prior=None)
    assert yaw_error(res.pose.yaw, 200.0) < 0.2
    assert abs(res.pose.pitch + 3.0) < 0.2


def test_estimate_without_prior_wrong_fov_still_returns(pano):
    pose = CameraPose(123.0, 1.0, 40.0)
    prof = syn.synth_profile(pano, pose, 600, 800)
    res = estimate_pose(prof, pano, prior=None)  # searches around 50 deg
    assert math.isfinite(res.score) and res.score >= 0.0


def test_estimate_rejects_sparse_profile(pano):
    rows = np.full(400, np.nan)
    rows[:40] = 100.0
    prof = SkylineProfile(400, 300, rows, np.where(np.isfinite(rows), 1.0, 0.0))
    with pytest.raises(AlignmentError):
        estimate_pose(prof, pano)


def test_estimate_rejects_empty_panorama(pano):
    blank = dataclasses.replace(pano, skyline=np.full_like(pano.skyline, np.nan))
    prof = profile_with(400, 300, range(400), [150.0] * 400)
    with pytest.raises(AlignmentError):
        estimate_pose(prof, blank)


def test_flat_panorama_sets_ambiguity_flag():
    cfg = RenderConfig(az_res=0.2, el_res=0.1)
    flat = render_panorama(syn.flat_dem(base=0.0), Viewpoint(GeoPoint(46.0, 9.0), 2.0), cfg)
    pose = CameraPose(50.0, 2.0, 50.0)
    prof = syn.synth_profile(flat, pose, 400, 300)
    res = estimate_pose(prof, flat, prior=CameraPose(0.0, 0.0, 50.0))
    assert res.ambiguous
    assert res.score < 0.02
    assert 0.0 < res.confidence <= 1.0


def test_roundtrip_within_refinement_step(pano):
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(20):
        pose = CameraPose(
            rng.uniform(0.0, 360.0),
            rng.uniform(-5.0, 5.0),
            float(rng.choice([35.0, 50.0, 65.0])),
        )
        prof = syn.synth_profile(pano, pose, 600, 800)
        defined = prof.defined
        # The guarantee applies to profiles with enough non-flat structure.
        if defined.mean() < 0.3 or np.ptp(prof.rows[defined]) < 5.0:
            continue
        res = estimate_pose(prof, pano, prior=CameraPose(0.0, 0.0, pose.hfov))
        assert yaw_error(res.pose.yaw, pose.yaw) <= 0.02, pose
        assert abs(res.pose.pitch - pose.pitch) <= 0.02, pose
        checked += 1
    assert checked >= 15


def test_returned_score_not_worse_than_grid_candidates(pano):
    pose = CameraPose(77.0, 2.0, 50.0)
    width, height = 600, 800
    prof = syn.synth_profile(pano, pose, width, height)
    res = estimate_pose(prof, pano, prior=CameraPose(0.0, 0.0, 50.0))

    cols = np.nonzero(prof.defined)[0]
    rows = prof.rows[cols]

    def grid_score(yaw, pitch, hfov):
        angles = photo_skyline_angles(prof, CameraPose(yaw, pitch, hfov), width, height)
        errs = []
        for az, el in angles:
            sky = pano.skyline_at(az % 360.0)
            if math.isnan(sky):
                continue
            errs.append(abs(el - sky))
        return sum(errs) / len(errs) if errs else math.inf

    rng = np.random.default_rng(5)
    for _ in range(60):
        yaw = float(rng.integers(0, 3600)) * 0.1
        pitch = float(rng.integers(-20, 21)) * 0.5
        hfov = float(rng.choice([45.0, 50.0, 55.0]))
        assert res.score <= grid_score(yaw, pitch, hfov) + 1e-9
    assert res.score <= grid_score(pose.yaw, pose.pitch, pose.hfov) + 1e-9


def test_yaw_shift_equivariance(pano):
    pose = CameraPose(123.0, 1.0, 40.0)
    prof = syn.synth_profile(pano, pose, 600, 800)
    base = estimate_pose(prof, pano, prior=CameraPose(0.0, 0.0, 40.0))

    k = 777  # columns; az_res 0.05 deg -> a 38.85 deg rotation
    delta = k * pano.az_res
    rolled = dataclasses.replace(
        pano,
        kind=np.roll(pano.kind, k, axis=1),
        distance=np.roll(pano.distance, k, axis=1),
        altitude=np.roll(pano.altitude, k, axis=1),
        ground_lat=np.roll(pano.ground_lat, k, axis=1),
        ground_lon=np.roll(pano.ground_lon, k, axis=1),
        skyline=np.roll(pano.skyline, k),
    )
    res = estimate_pose(prof, rolled, prior=CameraPose(0.0, 0.0, 40.0))
    assert yaw_error(res.pose.yaw, (base.pose.yaw + delta) % 360.0) < 0.05
