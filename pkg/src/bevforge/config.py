"""Desk-scale pipeline defaults: voxel grid, camera rig, range-sensor
pattern, and canonical JSON/config hashing used by checkpoints and CLI
run manifests.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import torch

from .geometry import CameraIntrinsics, Pose, VoxelGridSpec

__all__ = [
    "GridConfig",
    "CameraRigConfig",
    "LidarPatternConfig",
    "default_grid",
    "build_camera_rig",
    "camera_pose",
    "canonical_json",
    "config_hash",
    "to_dict",
]


@dataclass(frozen=True)
class GridConfig:
    min_corner: tuple = (-8.0, -8.0, 0.0)
    max_corner: tuple = (8.0, 8.0, 4.0)
    shape: tuple = (32, 32, 4)

    def spec(self) -> VoxelGridSpec:
        return VoxelGridSpec(
            torch.tensor(self.min_corner, dtype=torch.float64),
            torch.tensor(self.max_corner, dtype=torch.float64),
            self.shape,
        )


@dataclass(frozen=True)
class CameraRigConfig:
    count: int = 6
    width: int = 64
    height: int = 64
    focal: float = 48.0
    radius: float = 0.8
    mount_height: float = 1.6
    pitch_deg: float = 8.0  # downward tilt


@dataclass(frozen=True)
class LidarPatternConfig:
    azimuth_count: int = 128
    elevation_min_deg: float = -22.0
    elevation_max_deg: float = 14.0
    elevation_count: int = 12
    mount_height: float = 1.8

    def elevations(self, dtype=torch.float64) -> torch.Tensor:
        return torch.linspace(
            math.radians(self.elevation_min_deg),
            math.radians(self.elevation_max_deg),
            self.elevation_count,
            dtype=dtype,
        )

    def azimuths(self, dtype=torch.float64) -> torch.Tensor:
        a = self.azimuth_count
        return -math.pi + torch.arange(a, dtype=dtype) * (2 * math.pi / a)


def default_grid() -> VoxelGridSpec:
    return GridConfig().spec()


def camera_pose(yaw: float, pitch: float, position, dtype=torch.float64) -> Pose:
    """World pose of a camera looking along yaw, tilted ``pitch`` rad down.

    Camera frame is +x right, +y down, +z forward.
    """
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    forward = torch.tensor([cp * cy, cp * sy, -sp], dtype=dtype)
    right = torch.tensor([sy, -cy, 0.0], dtype=dtype)
    down = torch.linalg.cross(forward, right)
    r = torch.stack([right, down, forward], dim=1)
    return Pose(r, torch.as_tensor(position, dtype=dtype))


def build_camera_rig(cfg: CameraRigConfig, dtype=torch.float64):
    """Intrinsics and poses of the surround rig, yaw-uniform around +z."""
    intr = CameraIntrinsics(
        fx=cfg.focal,
        fy=cfg.focal,
        cx=cfg.width / 2 - 0.5,
        cy=cfg.height / 2 - 0.5,
        width=cfg.width,
        height=cfg.height,
    )
    pitch = math.radians(cfg.pitch_deg)
    rig = []
    for k in range(cfg.count):
        yaw = 2 * math.pi * k / cfg.count
        pos = [cfg.radius * math.cos(yaw), cfg.radius * math.sin(yaw), cfg.mount_height]
        rig.append((intr, camera_pose(yaw, pitch, pos, dtype=dtype)))
    return rig


def to_dict(obj):
    """Dataclass tree to plain JSON-ready types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): to_dict(v) for k, v in obj.items()}
    if isinstance(obj, torch.Tensor):
        return obj.tolist()
    return obj


def canonical_json(payload) -> str:
    """Deterministic JSON encoding (sorted keys, fixed separators)."""
    return json.dumps(to_dict(payload), sort_keys=True, separators=(",", ":")) + "\n"


def config_hash(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
