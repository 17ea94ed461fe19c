"""bevforge: synthetic driving scenes, a multimodal BEV autoencoder with
SDF volume rendering, and a condition-controlled rectified-flow generator.
"""

__version__ = "0.1.0"

from .geometry import (
    BEVGrid,
    CameraIntrinsics,
    FeatureVolume,
    Pose,
    Rays,
    RaySamples,
    VoxelGridSpec,
    c2s,
    camera_rays,
    depth_to_point,
    lidar_rays,
    s2c,
    sample_along_ray,
    trilinear_sample,
)

__all__ = [
    "BEVGrid",
    "CameraIntrinsics",
    "FeatureVolume",
    "Pose",
    "Rays",
    "RaySamples",
    "VoxelGridSpec",
    "c2s",
    "camera_rays",
    "depth_to_point",
    "lidar_rays",
    "s2c",
    "sample_along_ray",
    "trilinear_sample",
    "__version__",
]
