"""On-disk flow bundles.

Input bundle: ``manifest.json`` with intrinsics ``[fx, fy, cx, cy]``, one
frame record per frame (depth file name and 12-real pose, row-major R then
t, world-to-camera), and a tracks file. Depth files are little-endian:
``uint32 width, uint32 height`` followed by ``height*width`` float32 values
in row-major order.

Output: ``flow.json`` metadata plus ``flow.bin`` (float64, little-endian,
keypoint-major then frame then component) and ``flow_valid.bin`` (uint8,
keypoint-major then frame).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .build import DepthMap, Flow3D, Track2D
from .camera import POSE_CONVENTION, CameraIntrinsics, CameraPose
from .synth import SyntheticScene

BUNDLE_FORMAT = "simplexalign.flow-bundle"
FLOW_FORMAT = "simplexalign.flow3d"
VERSION = 1


class BundleFormatError(ValueError):
    pass


def write_depth(path, depth: DepthMap) -> None:
    h, w = depth.values.shape
    with open(path, "wb") as f:
        f.write(np.array([w, h], dtype="<u4").tobytes())
        f.write(depth.values.astype("<f4").tobytes())


def read_depth(path) -> DepthMap:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise BundleFormatError(f"{path}: truncated depth header")
    w, h = np.frombuffer(raw[:8], dtype="<u4")
    body = np.frombuffer(raw[8:], dtype="<f4")
    if body.size != int(w) * int(h):
        raise BundleFormatError(f"{path}: expected {w}x{h} values, found {body.size}")
    return DepthMap(body.reshape(int(h), int(w)).astype(np.float64))


def write_bundle(directory, scene: SyntheticScene, ground_truth: bool = True) -> Path:
    """Write a synthetic scene as an input bundle; returns the manifest path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    frames = []
    for k, (depth, pose) in enumerate(zip(scene.depths, scene.poses)):
        name = f"depth_{k:05d}.bin"
        write_depth(out / name, depth)
        frames.append({"depth": name, "pose": pose.to_record()})
    tracks = [
        {"id": int(i), "uv": t.uv.tolist(), "visible": t.visible.astype(int).tolist()}
        for i, t in zip(scene.point_ids, scene.tracks)
    ]
    (out / "tracks.json").write_text(json.dumps(tracks))
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": VERSION,
        "pose_convention": POSE_CONVENTION,
        "depth_encoding": "uint32 width, uint32 height, float32 row-major, little-endian",
        "intrinsics": scene.K.as_list(),
        "frames": frames,
        "tracks": "tracks.json",
    }
    if ground_truth:
        gt = {
            "ref_idx": scene.spec.ref_idx,
            "point_ids": scene.point_ids.tolist(),
            "world": scene.world.tolist(),
            "velocity": scene.velocity.tolist(),
            "scene": scene.spec.to_dict(),
        }
        (out / "ground_truth.json").write_text(json.dumps(gt))
        manifest["ground_truth"] = "ground_truth.json"
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def read_bundle(manifest_path):
    """Returns ``(tracks, depths, poses, K, ground_truth_or_None)``."""
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"{path}: {exc}") from exc
    if manifest.get("format") != BUNDLE_FORMAT:
        raise BundleFormatError(f"{path}: not a {BUNDLE_FORMAT} manifest")
    if manifest.get("pose_convention", POSE_CONVENTION) != POSE_CONVENTION:
        raise BundleFormatError(f"{path}: unsupported pose convention {manifest['pose_convention']!r}")
    root = path.parent
    K = CameraIntrinsics(*manifest["intrinsics"])
    depths = [read_depth(root / fr["depth"]) for fr in manifest["frames"]]
    poses = [CameraPose.from_record(fr["pose"]) for fr in manifest["frames"]]
    records = manifest["tracks"]
    if isinstance(records, str):
        records = json.loads((root / records).read_text())
    tracks = [Track2D(r["uv"], r["visible"]) for r in records]
    gt = None
    if manifest.get("ground_truth"):
        gt = json.loads((root / manifest["ground_truth"]).read_text())
        gt["world"] = np.asarray(gt["world"], dtype=np.float64)
        gt["velocity"] = np.asarray(gt["velocity"], dtype=np.float64)
    return tracks, depths, poses, K, gt


def write_flow(directory, flow: Flow3D, K: CameraIntrinsics, extra: dict | None = None) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "flow.bin").write_bytes(np.ascontiguousarray(flow.values, dtype="<f8").tobytes())
    (out / "flow_valid.bin").write_bytes(np.ascontiguousarray(flow.valid, dtype=np.uint8).tobytes())
    meta = {
        "format": FLOW_FORMAT,
        "version": VERSION,
        "pose_convention": POSE_CONVENTION,
        "components": ["x_ref_px", "y_ref_px", "z_ref_depth_m"],
        "order": "keypoint, frame, component",
        "dtype": "<f8",
        "shape": list(flow.values.shape),
        "payload": "flow.bin",
        "valid_payload": "flow_valid.bin",
        "ref_idx": flow.ref_idx,
        "keypoint_ids": flow.keypoint_ids.tolist(),
        "dropped": flow.dropped,
        "intrinsics": K.as_list(),
        **(extra or {}),
    }
    path = out / "flow.json"
    path.write_text(json.dumps(meta, indent=2))
    return path


def read_flow(meta_path) -> Flow3D:
    path = Path(meta_path)
    meta = json.loads(path.read_text())
    if meta.get("format") != FLOW_FORMAT:
        raise BundleFormatError(f"{path}: not a {FLOW_FORMAT} file")
    shape = tuple(meta["shape"])
    values = np.frombuffer((path.parent / meta["payload"]).read_bytes(), dtype="<f8").reshape(shape)
    valid = np.frombuffer((path.parent / meta["valid_payload"]).read_bytes(), dtype=np.uint8).reshape(shape[:2])
    return Flow3D(values.copy(), valid.astype(bool), np.asarray(meta["keypoint_ids"]), meta["ref_idx"], meta["dropped"])
