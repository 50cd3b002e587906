"""Perspective and equidistant fisheye projection, parameterized by horizontal FoV.

Camera frame convention: right-handed, +z is the optical axis, +x points to
image right and +y to image down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import BehindCamera, DegeneratePoint, DimensionMismatch
from .geometry import Pose, quat_to_rotmat

MIN_POINT_NORM = 1e-9


class CameraModel(str, Enum):
    PERSPECTIVE = "perspective"
    FISHEYE_EQUIDISTANT = "fisheye_equidistant"


@dataclass(frozen=True)
class CameraIntrinsics:
    model: CameraModel
    fov_deg: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        object.__setattr__(self, "model", CameraModel(self.model))
        if self.width <= 0 or self.height <= 0:
            raise DimensionMismatch(f"bad image size {self.width}x{self.height}")
        if self.model is CameraModel.PERSPECTIVE:
            ok = 0.0 < self.fov_deg < 180.0
        else:
            ok = 0.0 < self.fov_deg <= 180.0
        if not ok:
            raise ValueError(f"fov_deg={self.fov_deg} out of range for {self.model.value}")

    @property
    def cx(self) -> float:
        return self.width / 2.0

    @property
    def cy(self) -> float:
        return self.height / 2.0

    @property
    def valid_radius(self) -> float:
        return min(self.width, self.height) / 2.0

    def to_dict(self) -> dict:
        return {"model": self.model.value, "fov_deg": self.fov_deg,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(CameraModel(d["model"]), float(d["fov_deg"]), int(d["width"]), int(d["height"]))


def perspective(fov_deg: float = 90.0, width: int = 640, height: int = 480) -> CameraIntrinsics:
    return CameraIntrinsics(CameraModel.PERSPECTIVE, fov_deg, width, height)


def fisheye(fov_deg: float, width: int = 640, height: int = 480) -> CameraIntrinsics:
    return CameraIntrinsics(CameraModel.FISHEYE_EQUIDISTANT, fov_deg, width, height)


class Projection(NamedTuple):
    u: float
    v: float
    in_frame: bool
    in_valid_region: bool


def focal_from_fov(intr: CameraIntrinsics) -> float:
    half_fov = math.radians(intr.fov_deg) / 2.0
    if intr.model is CameraModel.PERSPECTIVE:
        return (intr.width / 2.0) / math.tan(half_fov)
    return (intr.width / 2.0) / half_fov


def project_points(intr: CameraIntrinsics, points_cam) -> tuple[np.ndarray, ...]:
    """Vectorized projection of an ``(N, 3)`` array of camera-frame points.

    Returns ``(u, v, in_frame, in_valid_region)``. Points the model cannot
    image (behind a perspective camera, beyond the fisheye half-FoV, or at the
    origin) get ``nan`` pixel coordinates and both flags False.
    """
    pts = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    f = focal_from_fov(intr)
    norm = np.linalg.norm(pts, axis=1)
    u = np.full(len(pts), np.nan)
    v = np.full(len(pts), np.nan)
    half_fov = math.radians(intr.fov_deg) / 2.0

    if intr.model is CameraModel.PERSPECTIVE:
        ok = (z > 0) & (norm > MIN_POINT_NORM)
        u[ok] = intr.cx + f * x[ok] / z[ok]
        v[ok] = intr.cy + f * y[ok] / z[ok]
    else:
        rho = np.hypot(x, y)
        theta = np.arctan2(rho, z)
        ok = (norm > MIN_POINT_NORM) & (theta <= half_fov)
        r = f * theta
        safe_rho = np.where(rho > 0, rho, 1.0)
        u[ok] = intr.cx + np.where(rho > 0, r * x / safe_rho, 0.0)[ok]
        v[ok] = intr.cy + np.where(rho > 0, r * y / safe_rho, 0.0)[ok]

    with np.errstate(invalid="ignore"):
        in_frame = ok & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
        radius = np.hypot(u - intr.cx, v - intr.cy)
        in_valid = in_frame & (radius <= intr.valid_radius)
    return u, v, in_frame, in_valid


def project(intr: CameraIntrinsics, point_cam) -> Projection:
    p = np.asarray(point_cam, dtype=np.float64).reshape(3)
    if np.linalg.norm(p) <= MIN_POINT_NORM:
        raise DegeneratePoint("point coincides with the camera centre")
    if intr.model is CameraModel.PERSPECTIVE and p[2] <= 0:
        raise BehindCamera(f"z={p[2]:g} is not in front of a perspective camera")
    u, v, in_frame, valid = project_points(intr, p[None, :])
    return Projection(float(u[0]), float(v[0]), bool(in_frame[0]), bool(valid[0]))


def world_to_camera(pose: Pose, point_world) -> np.ndarray:
    """Express world points in the camera frame: ``R(q)^T (p - position)``.

    Accepts a single 3-vector or an ``(N, 3)`` array.
    """
    R = quat_to_rotmat(pose.orientation)
    pts = np.asarray(point_world, dtype=np.float64)
    return (pts - np.asarray(pose.position)) @ R


def camera_to_world(pose: Pose, point_cam) -> np.ndarray:
    R = quat_to_rotmat(pose.orientation)
    return np.asarray(point_cam, dtype=np.float64) @ R.T + np.asarray(pose.position)
