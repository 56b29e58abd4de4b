"""Analytic synthetic scenes with exact tracks, depth, and poses.

Keypoints are seeded on a grid in the reference frame and lifted to world
points at random depths. Every depth map holds the exact depth of a
background plane, with each visible keypoint splatted over the 2x2 pixel
block that bilinear sampling reads at its track location. Sampling depth at
a track therefore returns the keypoint's exact depth, which makes the scene
a noiseless oracle for :func:`build_flow`.

Depths, camera steps, and velocities are multiples of ``2**-10`` so that
translation-only scenes survive a round trip through float32 depth files
without rounding.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .build import DepthMap, GridSpec, Track2D, seed_grid
from .camera import CameraIntrinsics, CameraPose, look_at, unproject

QUANTUM = 2.0**-10
BACKGROUND_Z = 12.0


def _quantize(x):
    return np.round(np.asarray(x, dtype=np.float64) / QUANTUM) * QUANTUM


@dataclass(frozen=True)
class SceneSpec:
    frames: int = 60
    width: int = 320
    height: int = 240
    fx: float = 300.0
    fy: float = 300.0
    grid_rows: int = 20
    grid_cols: int = 20
    grid_margin: float = 0.05
    depth_range: tuple[float, float] = (2.0, 4.0)
    motion: str = "static"  # static | constant-velocity
    camera_path: str = "static"  # static | linear | orbit
    speed: float = 0.005  # meters per frame for points and the linear camera
    orbit_degrees: float = 15.0
    ref_idx: int = 0

    def __post_init__(self):
        object.__setattr__(self, "depth_range", tuple(float(d) for d in self.depth_range))
        if self.motion not in ("static", "constant-velocity"):
            raise ValueError(f"unknown motion model {self.motion!r}")
        if self.camera_path not in ("static", "linear", "orbit"):
            raise ValueError(f"unknown camera path {self.camera_path!r}")
        if self.frames < 1 or not 0 <= self.ref_idx < self.frames:
            raise ValueError("need frames >= 1 and 0 <= ref_idx < frames")

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fy, (self.width - 1) / 2.0, (self.height - 1) / 2.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depth_range"] = list(self.depth_range)
        return d


@dataclass
class SyntheticScene:
    tracks: list[Track2D]
    depths: list[DepthMap]
    poses: list[CameraPose]
    K: CameraIntrinsics
    world: np.ndarray  # (points, frames, 3) ground-truth world positions
    velocity: np.ndarray  # (points, 3) world velocity per frame
    point_ids: np.ndarray  # grid index of each kept point
    excluded: list[dict] = field(default_factory=list)
    spec: SceneSpec | None = None

    @property
    def ref_points(self) -> np.ndarray:
        """Ground-truth positions in the reference camera, ``(points, frames, 3)``."""
        return self.poses[self.spec.ref_idx].world_to_camera(self.world)


def camera_poses(spec: SceneSpec, rng: np.random.Generator) -> list[CameraPose]:
    t = np.arange(spec.frames) - spec.ref_idx
    if spec.camera_path == "static":
        return [CameraPose.identity() for _ in t]
    if spec.camera_path == "linear":
        direction = rng.standard_normal(3)
        direction[2] *= 0.3
        step = _quantize(spec.speed * direction / np.linalg.norm(direction))
        return [CameraPose(np.eye(3), -(k * step)) for k in t]
    target = np.array([0.0, 0.0, float(np.mean(spec.depth_range))])
    radius = target[2]
    total = np.deg2rad(spec.orbit_degrees)
    phis = total * t / max(spec.frames - 1, 1)
    return [look_at(target + radius * np.array([-np.sin(p), 0.0, -np.cos(p)]), target) for p in phis]


def _plane_depth(pose: CameraPose, K: CameraIntrinsics, width: int, height: int) -> np.ndarray:
    """Depth of the world plane ``z = BACKGROUND_Z`` at every pixel."""
    vs, us = np.mgrid[0:height, 0:width].astype(np.float64)
    rays = np.stack([(us - K.cx) / K.fx, (vs - K.cy) / K.fy, np.ones_like(us)], axis=-1)
    dirs = rays @ pose.rotation  # camera ray directions in world coordinates
    center = pose.center
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (BACKGROUND_Z - center[2]) / dirs[..., 2]
    return np.where(np.isfinite(s) & (s > 0), s, 0.0)


def synth_scene(spec: SceneSpec = SceneSpec(), seed: int = 0) -> SyntheticScene:
    rng = np.random.default_rng(seed)
    K = spec.intrinsics
    poses = camera_poses(spec, rng)
    grid = seed_grid(GridSpec(spec.grid_rows, spec.grid_cols, spec.grid_margin), spec.width, spec.height)
    n = grid.shape[0]
    depth0 = _quantize(rng.uniform(*spec.depth_range, size=n))
    world0 = poses[spec.ref_idx].camera_to_world(unproject(grid, depth0, K))
    if spec.motion == "constant-velocity":
        vel = rng.standard_normal((n, 3))
        vel = _quantize(spec.speed * vel / np.linalg.norm(vel, axis=1, keepdims=True))
    else:
        vel = np.zeros((n, 3))
    t = (np.arange(spec.frames) - spec.ref_idx).astype(np.float64)
    world = world0[:, None, :] + t[None, :, None] * vel[:, None, :]

    cam = np.stack([poses[k].world_to_camera(world[:, k]) for k in range(spec.frames)], axis=1)
    behind = np.any(cam[..., 2] <= 1e-6, axis=1)
    excluded = [{"point": int(i), "reason": "behind camera"} for i in np.flatnonzero(behind)]
    keep = ~behind
    world, vel, cam = world[keep], vel[keep], cam[keep]
    ids = np.flatnonzero(keep)
    m = ids.shape[0]

    uv = np.stack([K.fx * cam[..., 0] / cam[..., 2] + K.cx, K.fy * cam[..., 1] / cam[..., 2] + K.cy], axis=-1)
    visible = (uv[..., 0] >= 0) & (uv[..., 0] <= spec.width - 2) & (uv[..., 1] >= 0) & (uv[..., 1] <= spec.height - 2)

    depths = []
    for k in range(spec.frames):
        values = _plane_depth(poses[k], K, spec.width, spec.height)
        owner = np.full(values.shape, -1)
        cols = np.floor(uv[:, k, 0]).astype(int)
        rows = np.floor(uv[:, k, 1]).astype(int)
        # Far to near, so nearer splats overwrite farther ones.
        for i in np.argsort(-cam[:, k, 2]):
            if not visible[i, k]:
                continue
            r, c = rows[i], cols[i]
            values[r : r + 2, c : c + 2] = cam[i, k, 2]
            owner[r : r + 2, c : c + 2] = i
        for i in range(m):
            if visible[i, k]:
                r, c = rows[i], cols[i]
                visible[i, k] = bool(np.all(owner[r : r + 2, c : c + 2] == i))
        depths.append(DepthMap(values))

    tracks = [Track2D(uv[i], visible[i]) for i in range(m)]
    return SyntheticScene(tracks, depths, poses, K, world, vel, ids, excluded, spec)
