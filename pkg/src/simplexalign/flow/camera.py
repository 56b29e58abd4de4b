"""Pinhole intrinsics, world-to-camera poses, and the point transforms between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCameraError, NonPositiveDepthError

POSE_CONVENTION = "world_to_camera: p_cam = R @ p_world + t"


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    def as_list(self) -> list[float]:
        return [self.fx, self.fy, self.cx, self.cy]


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform: ``p_cam = R @ p_world + t``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9) or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_record(cls, values) -> "CameraPose":
        """12 reals: row-major R followed by t."""
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (12,):
            raise ValueError(f"pose record needs 12 values, got {v.size}")
        return cls(v[:9].reshape(3, 3), v[9:])

    def to_record(self) -> list[float]:
        return [*self.rotation.ravel().tolist(), *self.translation.tolist()]

    def world_to_camera(self, p_world) -> np.ndarray:
        return np.asarray(p_world, dtype=np.float64) @ self.rotation.T + self.translation

    def camera_to_world(self, p_cam) -> np.ndarray:
        return (np.asarray(p_cam, dtype=np.float64) - self.translation) @ self.rotation

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation


def unproject(pixel, depth, K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame point at optical-axis ``depth`` behind ``pixel`` (u, v)."""
    uv = np.asarray(pixel, dtype=np.float64)
    z = np.asarray(depth, dtype=np.float64)
    if np.any(z <= 0):
        raise NonPositiveDepthError("depth must be positive")
    x = (uv[..., 0] - K.cx) / K.fx * z
    y = (uv[..., 1] - K.cy) / K.fy * z
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def project(point, K: CameraIntrinsics) -> np.ndarray:
    """``(u, v, z)`` for camera-frame point(s) with ``z > 1e-9``."""
    p = np.asarray(point, dtype=np.float64)
    z = p[..., 2]
    if np.any(z <= 1e-9):
        raise BehindCameraError("point is at or behind the camera plane")
    return np.stack([K.fx * p[..., 0] / z + K.cx, K.fy * p[..., 1] / z + K.cy, z], axis=-1)


def to_reference(point_cam, pose_t: CameraPose, pose_ref: CameraPose) -> np.ndarray:
    """Move a point from camera ``t`` coordinates into reference-camera coordinates."""
    return pose_ref.world_to_camera(pose_t.camera_to_world(point_cam))


def look_at(center, target, up=(0.0, -1.0, 0.0)) -> CameraPose:
    """Pose of a camera at ``center`` whose +z axis points at ``target``.

    Camera axes follow the image convention: +x right, +y down, +z forward.
    """
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    r = np.stack([right, down, forward])
    return CameraPose(r, -r @ center)
