import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqloc.camera import (CameraIntrinsics, CameraModel, camera_to_world, fisheye, focal_from_fov,
                           perspective, project, project_points, world_to_camera)
from seqloc.errors import BehindCamera, DegeneratePoint
from seqloc.geometry import Pose, Quaternion, axis_angle_quat, quat_conjugate, quat_multiply
from seqloc.synthdata import generate_scene, generate_trajectory

from conftest import random_unit_quat


def test_focal_examples():
    assert focal_from_fov(perspective(90)) == pytest.approx(320.0, abs=1e-12)
    assert focal_from_fov(fisheye(180)) == pytest.approx(320 / (math.pi / 2), abs=1e-12)
    assert focal_from_fov(fisheye(180)) == pytest.approx(203.718, abs=1e-3)
    assert focal_from_fov(perspective(60)) == pytest.approx(320 * math.sqrt(3), abs=1e-9)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        perspective(180)
    with pytest.raises(ValueError):
        fisheye(0)
    intr = fisheye(180)
    assert (intr.cx, intr.cy) == (320, 240)
    assert CameraIntrinsics.from_dict(intr.to_dict()) == intr


def test_project_on_axis_perspective():
    pr = project(perspective(90), (0, 0, 5))
    assert (pr.u, pr.v) == (320, 240)
    assert pr.in_frame and pr.in_valid_region


def test_project_fisheye_half_fov_hits_right_border():
    theta = math.radians(65)
    pr = project(fisheye(130), (math.sin(theta), 0, math.cos(theta)))
    assert pr.u == pytest.approx(640.0, abs=1e-9)
    assert pr.v == pytest.approx(240.0, abs=1e-9)
    assert not pr.in_frame


def test_project_fisheye_behind():
    pr = project(fisheye(180), (0, 0, -1))
    assert not pr.in_frame and not pr.in_valid_region


def test_project_errors():
    with pytest.raises(BehindCamera):
        project(perspective(90), (0, 0, -1))
    with pytest.raises(BehindCamera):
        project(perspective(90), (1, 0, 0))
    with pytest.raises(DegeneratePoint):
        project(fisheye(130), (0, 0, 0))


@pytest.mark.parametrize("intr", [perspective(60), perspective(90), fisheye(90), fisheye(130), fisheye(180)])
def test_on_axis_point_hits_principal_point(intr):
    pr = project(intr, (0, 0, 3.7))
    assert (pr.u, pr.v) == (intr.cx, intr.cy)


@settings(max_examples=200)
@given(st.floats(0.0, math.radians(45)), st.floats(-math.pi, math.pi),
       st.sampled_from([90.0, 130.0, 180.0]))
def test_equidistant_radius_linear(theta, phi, fov):
    intr = fisheye(fov)
    if 2 * theta > math.radians(fov) / 2:
        return

    def radius(t):
        p = (math.sin(t) * math.cos(phi), math.sin(t) * math.sin(phi), math.cos(t))
        u, v, _, _ = project_points(intr, np.array([p]))
        return math.hypot(u[0] - intr.cx, v[0] - intr.cy)

    assert radius(2 * theta) == pytest.approx(2 * radius(theta), abs=1e-9)


def test_valid_region_implies_in_frame(rng):
    pts = rng.normal(size=(5000, 3)) * [3, 3, 1] + [0, 0, 1]
    for intr in (perspective(90), fisheye(130), fisheye(180)):
        _, _, in_frame, valid = project_points(intr, pts)
        assert not np.any(valid & ~in_frame)


def test_world_to_camera_examples():
    ident = Pose(np.zeros(3), Quaternion(1, 0, 0, 0))
    assert np.allclose(world_to_camera(ident, (1, 2, 3)), (1, 2, 3))
    shifted = Pose(np.array([1.0, 0, 0]), Quaternion(1, 0, 0, 0))
    assert np.allclose(world_to_camera(shifted, (1, 0, 0)), 0)


def test_world_to_camera_matches_sandwich_oracle(rng):
    # 180 deg about y: camera z axis points along world -z
    q = axis_angle_quat((0, 1, 0), math.pi)
    pose = Pose(np.zeros(3), q)
    assert np.allclose(world_to_camera(pose, (0, 0, 1)), (0, 0, -1), atol=1e-12)
    for _ in range(50):
        q = random_unit_quat(rng)
        pos = rng.normal(size=3)
        pt = rng.normal(size=3)
        pose = Pose(pos, Quaternion(*q))
        # inverse rotation via q* v q
        oracle = quat_multiply(quat_multiply(quat_conjugate(q), np.r_[0.0, pt - pos]), q)[1:]
        assert np.allclose(world_to_camera(pose, pt), oracle, atol=1e-12)


def test_world_to_camera_roundtrip(rng):
    for _ in range(50):
        pose = Pose(rng.normal(size=3), Quaternion(*random_unit_quat(rng)))
        pts = rng.normal(size=(10, 3))
        back = camera_to_world(pose, world_to_camera(pose, pts))
        assert np.max(np.abs(back - pts)) <= 1e-9


def test_fov_monotone_in_frame_counts(rng):
    """In-frame counts with the fisheye model never decrease from 90 to 130 to 180 degrees."""
    for seed in range(100):
        scene = generate_scene(seed, 300, (20.0, 20.0, 6.0))
        traj = generate_trajectory(seed, 3, 1.6, 0.2, 10.0, start_xy=(10.0, 10.0))
        for pose in traj.poses:
            pts = world_to_camera(pose, scene.landmarks)
            counts = [int(project_points(fisheye(f), pts)[2].sum()) for f in (90, 130, 180)]
            assert counts == sorted(counts), (seed, counts)
