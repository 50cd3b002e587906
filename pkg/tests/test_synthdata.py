import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqloc.camera import fisheye, perspective, project_points, world_to_camera
from seqloc.errors import DimensionMismatch, TooFewFrames
from seqloc.geometry import Pose, quat_to_rotmat
from seqloc.synthdata import (CAMERA_MOUNT, DataConfig, Dataset, Scene, build_dataset,
                              generate_dataset, generate_scene, generate_trajectory, heading_pose,
                              render_features, split_frames, urban_config)


def small_config(**kw):
    return DataConfig(n_landmarks=200, n_frames=24, **kw)


def test_scene_determinism_and_seed_difference():
    a = generate_scene(1, 50, (20, 20, 6))
    b = generate_scene(1, 50, (20, 20, 6))
    c = generate_scene(2, 50, (20, 20, 6))
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != c.to_bytes()


def test_scene_box_and_descriptor_range():
    s = generate_scene(3, 2000, (10, 8, 4), n_bins=5)
    assert np.all(np.abs(s.landmarks[:, 0]) <= 5) and np.all(np.abs(s.landmarks[:, 1]) <= 4)
    assert np.all((s.landmarks[:, 2] >= 0) & (s.landmarks[:, 2] <= 4))
    assert set(np.unique(s.descriptor_ids)) <= set(range(5))


def test_single_landmark_scene():
    s = generate_scene(1, 1, (1, 1, 1))
    assert s.landmarks.shape == (1, 3)
    with pytest.raises(ValueError):
        generate_scene(1, 0, (1, 1, 1))


def test_single_frame_trajectory():
    traj = generate_trajectory(4, 1, camera_height_m=1.6)
    assert len(traj) == 1
    assert traj.poses[0].position[2] == 1.6


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_trajectory_height_and_step_bound(seed):
    traj = generate_trajectory(seed, 100, 1.6, 0.1, 10.0)
    pos = traj.positions
    assert np.all(pos[:, 2] == 1.6)
    assert np.all(np.linalg.norm(np.diff(pos, axis=0), axis=1) <= 0.1 + 1e-12)


def test_trajectory_turn_bound_and_bounds_box():
    traj = generate_trajectory(7, 400, 1.6, 0.5, 8.0, bounds_xy=((-5, -5), (5, 5)))
    d = np.diff(traj.positions[:, :2], axis=0)
    heading = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    assert np.max(np.abs(np.diff(heading))) <= math.radians(8.0) + 1e-9
    # steering back is turn-rate limited, so the box can be overshot by one turning diameter
    diameter = 0.5 / math.sin(math.radians(8.0) / 2)
    assert np.all(np.abs(traj.positions[:, :2]) <= 5 + diameter)


def test_mount_points_optical_axis_along_heading():
    # camera +z is the optical axis, +x image right, +y image down
    for heading in (0.0, 0.7, -2.1):
        R = quat_to_rotmat(heading_pose([0, 0, 1.6], heading).orientation)
        fwd = np.array([math.cos(heading), math.sin(heading), 0.0])
        left = np.array([-math.sin(heading), math.cos(heading), 0.0])
        np.testing.assert_allclose(R[:, 2], fwd, atol=1e-12)
        np.testing.assert_allclose(R[:, 0], -left, atol=1e-12)
        np.testing.assert_allclose(R[:, 1], [0, 0, -1], atol=1e-12)
    assert tuple(CAMERA_MOUNT) == (0.5, -0.5, 0.5, -0.5)


def test_orientations_are_yaw_only_unit_quaternions():
    traj = generate_trajectory(2, 30)
    for p in traj.poses:
        q = np.asarray(p.orientation)
        assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
        R = quat_to_rotmat(p.orientation)
        assert R[2, 1] == pytest.approx(-1.0, abs=1e-12)  # image down is world down


def _scene(points, ids=None):
    pts = np.asarray(points, dtype=float)
    ids = np.zeros(len(pts), dtype=int) if ids is None else np.asarray(ids)
    return Scene(pts, ids, 0, 8)


FACING_X = heading_pose([0.0, 0.0, 0.0], 0.0)


def test_empty_visible_set_gives_zero_features():
    f = render_features(_scene([[-5.0, 0.0, 0.0]]), FACING_X, perspective(90))
    assert f.mass == 0
    assert np.all(f.features == 0)


def test_single_visible_landmark_gives_one_increment():
    # a point straight ahead lands on the principal point: cell (col 2, row 1)
    f = render_features(_scene([[5.0, 0.0, 0.0]], [3]), FACING_X, perspective(90), 64)
    raw = f.features + 1 / 64
    assert f.mass == 1
    assert np.count_nonzero(np.isclose(raw, 1.0)) == 1
    assert np.argmax(raw) == (1 * 4 + 2) * 8 + 3


def test_feature_dim_too_small():
    with pytest.raises(DimensionMismatch):
        render_features(_scene([[5.0, 0.0, 0.0]]), FACING_X, perspective(90), 63)


def test_zero_padding_beyond_used_bins():
    s = generate_scene(1, 500, (20, 20, 6))
    f = render_features(s, heading_pose([0, 0, 1.6], 0.3), fisheye(130), 100)
    tail = f.features[64:]
    assert np.all(tail == tail[0])
    assert tail[0] == pytest.approx(-f.mass / 100)


def test_mass_equals_valid_projection_count():
    s = generate_scene(5, 800, (20, 20, 6))
    pose = heading_pose([1.0, -2.0, 1.6], 1.0)
    intr = fisheye(130)
    _, _, _, valid = project_points(intr, world_to_camera(pose, s.landmarks))
    assert render_features(s, pose, intr).mass == valid.sum()


def test_fov_90_vs_130_mass():
    s = generate_scene(9, 1000, (20, 20, 6))
    for k, pose in enumerate(generate_trajectory(9, 20).poses):
        assert render_features(s, pose, fisheye(90)).mass <= render_features(s, pose, fisheye(130)).mass


def test_features_are_mean_zero():
    ds = generate_dataset(small_config(feature_noise_std=0.5))
    assert np.max(np.abs(ds.features.mean(axis=1))) <= 1e-6  # float32 storage


@pytest.mark.parametrize("n, ratio, T, n_train, n_test", [
    (60, 0.8, 3, 16, 4),
    (7, 0.5, 3, 1, 1),
    (60, 0.5, 10, 3, 3),
])
def test_split_window_counts(n, ratio, T, n_train, n_test):
    split = split_frames(n, ratio, T)
    assert len(split["train"]) // T == n_train
    assert len(split["test"]) // T == n_test
    assert not set(split["train"]) & set(split["test"])
    assert split["train"] == list(range(n_train * T))


def test_split_errors():
    with pytest.raises(TooFewFrames):
        split_frames(5, 0.5, 3)
    with pytest.raises(TooFewFrames):
        split_frames(10, 0.95, 3)


def test_rewindow_t10_gives_six_sequences():
    ds = generate_dataset(DataConfig(n_frames=60, split_ratio=0.5, n_landmarks=100)).rewindow(10)
    n = sum(ds.windows(s)[0].shape[0] for s in ("train", "test"))
    assert n == 6


def test_windows_shapes():
    ds = generate_dataset(small_config())
    X, Y, idx = ds.windows("train")
    assert X.shape == (6, 3, 64) and Y.shape == (6, 3, 7) and idx.shape == (6, 3)
    np.testing.assert_array_equal(idx.ravel(), np.arange(18))


def test_save_load_roundtrip(tmp_path):
    ds = generate_dataset(small_config(feature_noise_std=0.3), out_dir=tmp_path / "d")
    raw = (tmp_path / "d" / "features.bin").read_bytes()
    assert len(raw) == 24 * 64 * 4
    np.testing.assert_array_equal(np.frombuffer(raw, dtype="<f4").reshape(24, 64), ds.features)
    back = Dataset.load(tmp_path / "d")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.poses, ds.poses)
    assert back.manifest == json.loads(json.dumps(ds.manifest))


def test_poses_csv_format(tmp_path):
    generate_dataset(small_config(), out_dir=tmp_path)
    with open(tmp_path / "poses.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["frame", "px", "py", "pz", "qw", "qx", "qy", "qz"]
    assert len(rows) == 25
    for r in rows[1:]:
        for v in r[1:]:
            assert v == f"{float(v):.9g}"
        q = np.array([float(v) for v in r[4:]])
        assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-8)


def test_bit_identical_regeneration(tmp_path):
    cfg = small_config(feature_noise_std=0.2)
    generate_dataset(cfg, out_dir=tmp_path / "a")
    generate_dataset(cfg, out_dir=tmp_path / "b")
    for name in ("manifest.json", "poses.csv", "features.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        DataConfig.from_dict({"seed": 1, "colour": "red"})
    assert DataConfig.from_dict({"extent_m": [1, 2, 3]}).extent_m == (1.0, 2.0, 3.0)


def test_urban_preset_height():
    ds = generate_dataset(urban_config(seed=3, n_landmarks=300))
    assert np.all(ds.poses[:, 2] == 1.6)
    assert ds.n_frames == 60


def test_build_dataset_too_few_frames():
    s = generate_scene(1, 10, (5, 5, 2))
    with pytest.raises(TooFewFrames):
        build_dataset(s, generate_trajectory(1, 5), fisheye(130), 0.5, 3)
