"""Compare a built flow against a synthetic scene's ground truth."""

from __future__ import annotations

import numpy as np

from .build import Flow3D
from .camera import CameraIntrinsics, CameraPose


def flow_residuals(
    flow: Flow3D,
    K: CameraIntrinsics,
    pose_ref: CameraPose,
    world: np.ndarray,
    velocity: np.ndarray,
) -> dict:
    """Worst-case discrepancies between ``flow`` and the true geometry.

    ``world`` is ``(tracks, frames, 3)`` in the same order as the tracks the
    flow was built from, so ``flow.keypoint_ids`` index its rows directly.
    """
    rows = np.asarray(flow.keypoint_ids, dtype=np.intp)
    truth = pose_ref.world_to_camera(world[rows])
    vel_ref = velocity[rows] @ pose_ref.rotation.T
    recovered = flow.to_reference_points(K)
    moving = np.any(velocity[rows] != 0, axis=1)

    position = 0.0
    compensation = 0.0
    variance = 0.0
    vel_err = 0.0
    self_err = 0.0
    for k in range(flow.values.shape[0]):
        valid = flow.valid[k]
        if not np.any(valid):
            continue
        position = max(position, float(np.abs(recovered[k, valid] - truth[k, valid]).max()))
        self_err = max(self_err, float(np.abs(recovered[k, flow.ref_idx] - truth[k, flow.ref_idx]).max()))
        if moving[k]:
            idx = np.flatnonzero(valid)
            if idx.size >= 2:
                d = np.diff(recovered[k, idx], axis=0) / np.diff(idx)[:, None]
                vel_err = max(vel_err, float(np.abs(d - vel_ref[k]).max()))
        else:
            trip = flow.values[k, valid]
            compensation = max(compensation, float(np.abs(trip - flow.values[k, flow.ref_idx]).max()))
            variance = max(variance, float(np.var(trip, axis=0).max()))
    return {
        "keypoints": int(flow.values.shape[0]),
        "static_keypoints": int(np.sum(~moving)),
        "moving_keypoints": int(np.sum(moving)),
        "compensation_residual": compensation,
        "static_variance": variance,
        "velocity_error": vel_err,
        "position_error": position,
        "reference_error": self_err,
        "valid_fraction": float(flow.valid.mean()) if flow.valid.size else 0.0,
    }
