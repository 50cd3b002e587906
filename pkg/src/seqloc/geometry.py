"""Quaternion and pose helpers plus the localization error metrics.

Quaternions are stored scalar-first, ``(w, x, y, z)``.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyList, ZeroQuaternion

ZERO_NORM = 1e-12


class Quaternion(NamedTuple):
    w: float
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


class Pose(NamedTuple):
    """Ground-truth camera pose: position in metres and a unit orientation."""

    position: np.ndarray
    orientation: Quaternion

    @classmethod
    def create(cls, position, orientation) -> "Pose":
        q = normalize(orientation)
        return cls(np.asarray(position, dtype=np.float64).reshape(3), q)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, np.asarray(self.orientation, dtype=np.float64)])


class PosePrediction(NamedTuple):
    """Regressor output. The quaternion is left unnormalized."""

    position: np.ndarray
    raw_orientation: Quaternion

    @classmethod
    def from_vector(cls, vec) -> "PosePrediction":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[:3].copy(), Quaternion(*map(float, vec[3:7])))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, np.asarray(self.raw_orientation, dtype=np.float64)])


def normalize(q) -> Quaternion:
    arr = np.asarray(q, dtype=np.float64)
    n = float(np.linalg.norm(arr))
    if n <= ZERO_NORM:
        raise ZeroQuaternion(f"cannot normalize quaternion with norm {n:g}")
    return Quaternion(*map(float, arr / n))


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product ``a * b``."""
    aw, ax, ay, az = np.asarray(a, dtype=np.float64)
    bw, bx, by, bz = np.asarray(b, dtype=np.float64)
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array([w, -x, -y, -z])


def quat_to_rotmat(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (maps body-frame vectors to the parent frame)."""
    w, x, y, z = np.asarray(normalize(q))
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def axis_angle_quat(axis, angle_rad: float) -> Quaternion:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    s = math.sin(angle_rad / 2.0)
    return Quaternion(math.cos(angle_rad / 2.0), *(s * axis))


def angular_error_deg(q_pred, q_true) -> float:
    """Geodesic angle between two rotations, in degrees.

    Both inputs are normalized first; ``q`` and ``-q`` compare equal.
    """
    a = np.asarray(normalize(q_pred))
    b = np.asarray(normalize(q_true))
    dot = min(1.0, abs(float(np.dot(a, b))))
    return math.degrees(2.0 * math.acos(dot))


def position_error_m(p_pred, p_true) -> float:
    diff = np.asarray(p_pred, dtype=np.float64) - np.asarray(p_true, dtype=np.float64)
    return float(np.linalg.norm(diff))


def median(values: Sequence[float]) -> float:
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise EmptyList("median of an empty list")
    mid = n // 2
    if n % 2:
        return vals[mid]
    return 0.5 * (vals[mid - 1] + vals[mid])
