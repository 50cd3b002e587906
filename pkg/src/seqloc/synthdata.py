"""Synthetic scenes, walking trajectories and landmark-visibility features.

The per-frame feature vector stands in for CNN image features: the image is
split into a grid of spatial cells and every validly projected landmark
increments the (cell, descriptor) bin of a histogram. The histogram is
flattened, zero-padded to ``feature_dim`` and mean-subtracted per frame.

A dataset on disk is a directory holding

* ``manifest.json``: intrinsics, generator config, seeds, splits, T, feature_dim
* ``poses.csv``: ``frame,px,py,pz,qw,qx,qy,qz`` with 9 significant digits
* ``features.bin``: little-endian float32, frame-major, ``n_frames * feature_dim`` values
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .camera import CameraIntrinsics, CameraModel, project_points, world_to_camera
from .errors import DimensionMismatch, TooFewFrames
from .geometry import Pose, Quaternion, normalize, quat_multiply

POSE_HEADER = ["frame", "px", "py", "pz", "qw", "qx", "qy", "qz"]
FEATURE_DTYPE = np.dtype("<f4")

# camera-to-world rotation for heading 0: optical axis -> +x, image right -> -y, image down -> -z
CAMERA_MOUNT = Quaternion(0.5, -0.5, 0.5, -0.5)


class Scene(NamedTuple):
    landmarks: np.ndarray       # (N, 3) metres
    descriptor_ids: np.ndarray  # (N,) ints in [0, n_bins)
    rng_seed: int
    n_bins: int

    def to_bytes(self) -> bytes:
        return self.landmarks.astype("<f8").tobytes() + self.descriptor_ids.astype("<i8").tobytes()


@dataclass
class Trajectory:
    poses: list[Pose]
    frame_rate_hz: float
    camera_height_m: float

    def __len__(self):
        return len(self.poses)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.poses])


class FrameFeatures(NamedTuple):
    features: np.ndarray
    pose: Pose
    mass: float  # histogram sum before mean subtraction


@dataclass(frozen=True)
class DataConfig:
    """Everything needed to regenerate a dataset bit-for-bit."""

    seed: int = 1
    n_landmarks: int = 400
    extent_m: tuple[float, float, float] = (20.0, 20.0, 6.0)
    n_bins: int = 8
    grid_cols: int = 4
    grid_rows: int = 2
    n_frames: int = 60
    camera_height_m: float = 1.6
    max_step_m: float = 0.2
    max_turn_deg: float = 10.0
    turn_bias_deg: float = 0.0
    turn_noise_deg: float | None = None
    start_xy: tuple[float, float] | None = None
    frame_rate_hz: float = 10.0
    model: str = "fisheye_equidistant"
    fov_deg: float = 130.0
    width: int = 640
    height: int = 480
    max_range_m: float | None = None
    split_ratio: float = 0.8
    T: int = 3
    feature_dim: int = 64
    feature_noise_std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "extent_m", tuple(float(e) for e in self.extent_m))
        if self.start_xy is not None:
            object.__setattr__(self, "start_xy", tuple(float(e) for e in self.start_xy))

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(CameraModel(self.model), self.fov_deg, self.width, self.height)

    def replace(self, **changes) -> "DataConfig":
        d = asdict(self)
        d.update(changes)
        return DataConfig(**d)

    @classmethod
    def from_dict(cls, d: dict) -> "DataConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown data config keys: {sorted(unknown)}")
        return cls(**d)


def urban_config(**overrides) -> DataConfig:
    """Street-scale scene: pedestrian at 1.6 m circling a block in 0.5 m steps."""
    base = DataConfig(n_landmarks=3000, extent_m=(200.0, 200.0, 20.0), camera_height_m=1.6,
                      max_step_m=0.5, max_turn_deg=20.0, turn_bias_deg=15.0, turn_noise_deg=3.0,
                      max_range_m=40.0)
    return base.replace(**overrides)


def indoor_config(**overrides) -> DataConfig:
    base = DataConfig(n_landmarks=600, extent_m=(10.0, 10.0, 3.0), camera_height_m=1.1,
                      max_step_m=0.1, max_turn_deg=10.0)
    return base.replace(**overrides)


def generate_scene(seed: int, n_landmarks: int, extent_m, n_bins: int = 8) -> Scene:
    """Landmarks uniform in ``[-ex/2, ex/2] x [-ey/2, ey/2] x [0, ez]`` (ground at z = 0)."""
    if n_landmarks < 1:
        raise ValueError("n_landmarks must be >= 1")
    extent = np.broadcast_to(np.asarray(extent_m, dtype=np.float64), (3,))
    rng = np.random.default_rng([seed, 0])
    pts = (rng.uniform(0.0, 1.0, size=(n_landmarks, 3)) - [0.5, 0.5, 0.0]) * extent
    ids = rng.integers(0, n_bins, size=n_landmarks)
    return Scene(pts, ids, seed, n_bins)


def heading_pose(position, heading_rad: float) -> Pose:
    yaw = Quaternion(math.cos(heading_rad / 2), 0.0, 0.0, math.sin(heading_rad / 2))
    return Pose(np.asarray(position, dtype=np.float64), normalize(quat_multiply(yaw, CAMERA_MOUNT)))


def generate_trajectory(seed: int, n_frames: int, camera_height_m: float = 1.6,
                        max_step_m: float = 0.2, max_turn_deg: float = 10.0, *,
                        turn_bias_deg: float = 0.0, turn_noise_deg: float | None = None,
                        start_xy=(0.0, 0.0),
                        bounds_xy=None, frame_rate_hz: float = 10.0) -> Trajectory:
    """Constant-speed walk with a bounded random heading change per frame.

    The heading change is ``turn_bias_deg`` plus Gaussian noise (std
    ``turn_noise_deg``, default ``max_turn_deg / 2``), clipped to ``max_turn_deg``.
    A nonzero bias makes the walker circle, revisiting earlier places.

    If ``bounds_xy = ((xmin, ymin), (xmax, ymax))`` is given, the walker turns
    toward the box centre (still within ``max_turn_deg``) whenever the next
    step would leave it.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng([seed, 1])
    max_turn = math.radians(max_turn_deg)
    bias = math.radians(turn_bias_deg)
    noise = max_turn / 2 if turn_noise_deg is None else math.radians(turn_noise_deg)
    heading = rng.uniform(-math.pi, math.pi)
    xy = np.array(start_xy, dtype=np.float64)
    poses = [heading_pose([xy[0], xy[1], camera_height_m], heading)]
    for _ in range(n_frames - 1):
        turn = float(np.clip(bias + rng.normal(0.0, noise), -max_turn, max_turn))
        if bounds_xy is not None:
            lo, hi = np.asarray(bounds_xy[0]), np.asarray(bounds_xy[1])
            nxt = xy + max_step_m * np.array([math.cos(heading + turn), math.sin(heading + turn)])
            if np.any(nxt < lo) or np.any(nxt > hi):
                to_centre = math.atan2(*((lo + hi) / 2 - xy)[::-1])
                delta = (to_centre - heading + math.pi) % (2 * math.pi) - math.pi
                turn = float(np.clip(delta, -max_turn, max_turn))
        heading += turn
        xy = xy + max_step_m * np.array([math.cos(heading), math.sin(heading)])
        poses.append(heading_pose([xy[0], xy[1], camera_height_m], heading))
    return Trajectory(poses, frame_rate_hz, camera_height_m)


def visible_mask(scene: Scene, pose: Pose, intr: CameraIntrinsics, max_range_m=None):
    pts_cam = world_to_camera(pose, scene.landmarks)
    u, v, _, valid = project_points(intr, pts_cam)
    if max_range_m is not None:
        valid &= np.linalg.norm(pts_cam, axis=1) <= max_range_m
    return u, v, valid


def render_features(scene: Scene, pose: Pose, intr: CameraIntrinsics, feature_dim: int = 64, *,
                    grid=(4, 2), max_range_m=None, noise_std: float = 0.0, rng=None) -> FrameFeatures:
    cols, rows = grid
    n_used = scene.n_bins * cols * rows
    if feature_dim < n_used:
        raise DimensionMismatch(f"feature_dim={feature_dim} < n_bins*n_cells={n_used}")
    u, v, valid = visible_mask(scene, pose, intr, max_range_m)
    col = np.minimum((u[valid] / intr.width * cols).astype(int), cols - 1)
    row = np.minimum((v[valid] / intr.height * rows).astype(int), rows - 1)
    bins = (row * cols + col) * scene.n_bins + scene.descriptor_ids[valid]
    hist = np.zeros(feature_dim)
    np.add.at(hist, bins, 1.0)
    mass = float(hist.sum())
    if noise_std > 0:
        hist[:n_used] += rng.normal(0.0, noise_std, size=n_used)
    return FrameFeatures(hist - hist.mean(), pose, mass)


def window_indices(indices, T: int) -> list[list[int]]:
    """Non-overlapping windows of length T; the trailing remainder is dropped."""
    n = len(indices) // T
    return [list(indices[k * T:(k + 1) * T]) for k in range(n)]


def split_frames(n_frames: int, split_ratio: float, T: int) -> dict[str, list[int]]:
    if n_frames < 2 * T:
        raise TooFewFrames(f"{n_frames} frames cannot hold two windows of T={T}")
    n_train = int(math.floor(split_ratio * n_frames))
    train = window_indices(list(range(n_train)), T)
    test = window_indices(list(range(n_train, n_frames)), T)
    if not train or not test:
        raise TooFewFrames(f"split {split_ratio} of {n_frames} frames leaves an empty split at T={T}")
    return {"train": [i for w in train for i in w], "test": [i for w in test for i in w]}


def _round9(x) -> np.ndarray:
    return np.array([float(f"{v:.9g}") for v in np.ravel(x)]).reshape(np.shape(x))


class Dataset:
    """Frames, ground truth and split bookkeeping for one rendered trajectory."""

    def __init__(self, manifest: dict, features: np.ndarray, poses: np.ndarray):
        self.manifest = manifest
        self.features = np.asarray(features, dtype=np.float64)
        self.poses = np.asarray(poses, dtype=np.float64)
        if self.features.shape != (manifest["n_frames"], manifest["feature_dim"]):
            raise DimensionMismatch(f"features shape {self.features.shape} disagrees with manifest")

    @property
    def T(self) -> int:
        return self.manifest["T"]

    @property
    def feature_dim(self) -> int:
        return self.manifest["feature_dim"]

    @property
    def n_frames(self) -> int:
        return self.manifest["n_frames"]

    def windows(self, split: str):
        """Return ``(X, Y, idx)`` shaped ``(n_seq, T, D)``, ``(n_seq, T, 7)``, ``(n_seq, T)``."""
        idx = np.asarray(self.manifest["split"][split], dtype=int).reshape(-1, self.T)
        return self.features[idx], self.poses[idx], idx

    def rewindow(self, T: int) -> "Dataset":
        manifest = dict(self.manifest)
        manifest["T"] = T
        manifest["split"] = split_frames(self.n_frames, manifest["split_ratio"], T)
        return Dataset(manifest, self.features, self.poses)

    def save(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")
        with open(out / "poses.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(POSE_HEADER)
            for k, row in enumerate(self.poses):
                w.writerow([k] + [f"{v:.9g}" for v in row])
        self.features.astype(FEATURE_DTYPE).tofile(out / "features.bin")
        return out

    @classmethod
    def load(cls, data_dir) -> "Dataset":
        d = Path(data_dir)
        manifest = json.loads((d / "manifest.json").read_text())
        with open(d / "poses.csv", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if header != POSE_HEADER:
                raise ValueError(f"unexpected poses.csv header {header}")
            rows = [[float(v) for v in r[1:]] for r in reader]
        raw = np.fromfile(d / "features.bin", dtype=FEATURE_DTYPE)
        n, dim = manifest["n_frames"], manifest["feature_dim"]
        if raw.size != n * dim:
            raise DimensionMismatch(f"features.bin holds {raw.size} values, expected {n * dim}")
        return cls(manifest, raw.reshape(n, dim), np.array(rows))


def build_dataset(scene: Scene, trajectory: Trajectory, intr: CameraIntrinsics, split_ratio: float,
                  T: int, feature_dim: int = 64, *, grid=(4, 2), max_range_m=None,
                  noise_std: float = 0.0, noise_seed: int = 0, config: DataConfig | None = None,
                  out_dir=None) -> Dataset:
    split = split_frames(len(trajectory), split_ratio, T)
    rng = np.random.default_rng([noise_seed, 2])
    feats = np.empty((len(trajectory), feature_dim))
    for k, pose in enumerate(trajectory.poses):
        feats[k] = render_features(scene, pose, intr, feature_dim, grid=grid, max_range_m=max_range_m,
                                   noise_std=noise_std, rng=rng).features
    poses = _round9(np.array([p.as_vector() for p in trajectory.poses]))
    manifest = {
        "format_version": 1,
        "intrinsics": intr.to_dict(),
        "scene_seed": int(scene.rng_seed),
        "n_frames": len(trajectory),
        "split_ratio": split_ratio,
        "split": split,
        "T": T,
        "feature_dim": feature_dim,
        "frame_rate_hz": trajectory.frame_rate_hz,
        "camera_height_m": trajectory.camera_height_m,
    }
    if config is not None:
        manifest["generator"] = asdict(config)
    ds = Dataset(manifest, feats.astype(FEATURE_DTYPE), poses)
    if out_dir is not None:
        ds.save(out_dir)
    return ds


def generate_dataset(cfg: DataConfig, out_dir=None) -> Dataset:
    """Scene + trajectory + rendering for one config; deterministic in ``cfg``."""
    scene = generate_scene(cfg.seed, cfg.n_landmarks, cfg.extent_m, cfg.n_bins)
    ex, ey, _ = cfg.extent_m
    start = cfg.start_xy if cfg.start_xy is not None else (0.0, 0.0)
    hx, hy = 0.4 * ex, 0.4 * ey
    traj = generate_trajectory(cfg.seed, cfg.n_frames, cfg.camera_height_m, cfg.max_step_m,
                               cfg.max_turn_deg, turn_bias_deg=cfg.turn_bias_deg, turn_noise_deg=cfg.turn_noise_deg,
                               start_xy=start,
                               bounds_xy=((-hx, -hy), (hx, hy)),
                               frame_rate_hz=cfg.frame_rate_hz)
    return build_dataset(scene, traj, cfg.intrinsics, cfg.split_ratio, cfg.T, cfg.feature_dim,
                         grid=(cfg.grid_cols, cfg.grid_rows), max_range_m=cfg.max_range_m,
                         noise_std=cfg.feature_noise_std, noise_seed=cfg.seed, config=cfg,
                         out_dir=out_dir)
