"""Screen-aligned 3D flow in a reference camera from tracks, depth, and poses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import (
    DegenerateImageError,
    LengthMismatchError,
    NoValidDepthError,
    OutOfBoundsError,
)
from .camera import CameraIntrinsics, CameraPose, unproject

INVALID_DEPTH = 0.0


@dataclass(frozen=True)
class GridSpec:
    rows: int = 20
    cols: int = 20
    margin: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if not 0.0 <= self.margin < 0.5:
            raise ValueError("margin must lie in [0, 0.5)")


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def _axis(n: int, size: int, margin: float) -> np.ndarray:
    lo = margin * (size - 1)
    hi = (1.0 - margin) * (size - 1)
    if n == 1:
        return _round_half_up([(lo + hi) / 2.0])
    return _round_half_up(np.linspace(lo, hi, n))


def seed_grid(g: GridSpec, width: int, height: int) -> np.ndarray:
    """Keypoints ``(rows*cols, 2)`` as (u, v), row-major, on integer pixels."""
    if width < 2 or height < 2:
        raise DegenerateImageError(f"image must be at least 2x2, got {width}x{height}")
    us = _axis(g.cols, width, g.margin)
    vs = _axis(g.rows, height, g.margin)
    vv, uu = np.meshgrid(vs, us, indexing="ij")
    return np.stack([uu.ravel(), vv.ravel()], axis=1)


@dataclass
class DepthMap:
    """Per-pixel optical-axis depth in meters, shape ``(height, width)``; 0 marks invalid."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("depth map must be 2-D")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("depth values must be finite and non-negative")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def sample_depth(values: np.ndarray, u, v) -> tuple[np.ndarray, np.ndarray]:
    """Validity-aware bilinear depth at subpixel locations.

    Returns ``(depth, ok)``; ``ok`` is False out of bounds or when no valid
    neighbor carries weight.
    """
    h, w = values.shape
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    uc = np.where(inside, u, 0.0)
    vc = np.where(inside, v, 0.0)
    u0 = np.floor(uc).astype(np.intp)
    v0 = np.floor(vc).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = uc - u0
    fv = vc - v0
    num = np.zeros_like(uc)
    den = np.zeros_like(uc)
    for vi, ui, wt in (
        (v0, u0, (1 - fu) * (1 - fv)),
        (v0, u1, fu * (1 - fv)),
        (v1, u0, (1 - fu) * fv),
        (v1, u1, fu * fv),
    ):
        d = values[vi, ui]
        valid = d > INVALID_DEPTH
        num += np.where(valid, wt * d, 0.0)
        den += np.where(valid, wt, 0.0)
    ok = inside & (den > 1e-12)
    depth = np.where(ok, num / np.where(ok, den, 1.0), np.nan)
    return depth, ok


def depth_at(depth_map: DepthMap, u: float, v: float) -> float:
    values = depth_map.values
    h, w = values.shape
    if not (0 <= u <= w - 1 and 0 <= v <= h - 1):
        raise OutOfBoundsError(f"({u}, {v}) outside a {w}x{h} depth map")
    d, ok = sample_depth(values, u, v)
    if not ok[0]:
        raise NoValidDepthError(f"no valid depth around ({u}, {v})")
    return float(d[0])


@dataclass
class Track2D:
    uv: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64).reshape(-1, 2)
        self.visible = np.asarray(self.visible, dtype=bool).reshape(-1)
        if self.uv.shape[0] != self.visible.shape[0]:
            raise LengthMismatchError("uv and visible must share the frame count")

    def __len__(self) -> int:
        return self.uv.shape[0]


@dataclass
class Flow3D:
    """Screen-aligned tracks ``(keypoints, frames, 3)`` in the reference camera.

    Components are reference-image pixel x, pixel y, and optical-axis depth z.
    """

    values: np.ndarray
    valid: np.ndarray
    keypoint_ids: np.ndarray
    ref_idx: int
    dropped: list[dict] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def to_reference_points(self, K: CameraIntrinsics) -> np.ndarray:
        """Reference-camera 3D positions recovered from the screen-aligned triples."""
        return unproject(self.values[..., :2], self.values[..., 2], K)


def build_flow(
    tracks: Sequence[Track2D],
    depths: Sequence[DepthMap],
    poses: Sequence[CameraPose],
    K: CameraIntrinsics,
    ref_idx: int,
) -> Flow3D:
    """Depth lookup, unprojection, reference-camera transform, and reprojection.

    Frames where a keypoint is invisible or has no valid depth carry the last
    valid triple forward (leading gaps take the first valid triple) with the
    validity flag cleared. Keypoints without valid depth at ``ref_idx`` are
    dropped and listed in ``Flow3D.dropped``.
    """
    n_frames = len(depths)
    if len(poses) != n_frames or any(len(t) != n_frames for t in tracks):
        raise LengthMismatchError("tracks, depths and poses must share the frame count")
    if not 0 <= ref_idx < n_frames:
        raise IndexError(f"ref_idx {ref_idx} out of range for {n_frames} frames")
    n_kp = len(tracks)
    uv = np.stack([t.uv for t in tracks]) if n_kp else np.zeros((0, n_frames, 2))
    vis = np.stack([t.visible for t in tracks]) if n_kp else np.zeros((0, n_frames), bool)

    out = np.full((n_kp, n_frames, 3), np.nan)
    ok = np.zeros((n_kp, n_frames), dtype=bool)
    pose_ref = poses[ref_idx]
    # Camera t -> reference camera as one rigid map: R_ref R_t^T (p - t_t) + t_ref.
    for t in range(n_frames):
        d, has_depth = sample_depth(depths[t].values, uv[:, t, 0], uv[:, t, 1])
        good = vis[:, t] & has_depth
        if not np.any(good):
            continue
        p_cam = unproject(uv[good, t], d[good], K)
        p_ref = pose_ref.world_to_camera(poses[t].camera_to_world(p_cam))
        front = p_ref[:, 2] > 1e-9
        idx = np.flatnonzero(good)[front]
        p = p_ref[front]
        out[idx, t, 0] = K.fx * p[:, 0] / p[:, 2] + K.cx
        out[idx, t, 1] = K.fy * p[:, 1] / p[:, 2] + K.cy
        out[idx, t, 2] = p[:, 2]
        ok[idx, t] = True

    keep = ok[:, ref_idx]
    dropped = [
        {"keypoint": int(i), "reason": "no valid depth at reference frame"} for i in np.flatnonzero(~keep)
    ]
    out, ok = out[keep], ok[keep]
    for k in range(out.shape[0]):
        first = int(np.argmax(ok[k]))
        last = out[k, first].copy()
        for t in range(n_frames):
            if ok[k, t]:
                last = out[k, t]
            else:
                out[k, t] = last
    return Flow3D(out, ok, np.flatnonzero(keep), ref_idx, dropped)


def select_reference(visible_counts, window_frac: float = 0.1) -> int:
    """Frame with the most visible keypoints among the first ``ceil(window_frac*T)``."""
    counts = np.asarray(visible_counts)
    n = counts.shape[0]
    if n < 1:
        raise ValueError("need at least one frame")
    if not 0 < window_frac <= 1:
        raise ValueError("window_frac must lie in (0, 1]")
    window = max(1, min(n, math.ceil(window_frac * n - 1e-9)))
    return int(np.argmax(counts[:window]))
