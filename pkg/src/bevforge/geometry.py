"""Poses, rays, ray sampling, voxel grids, trilinear sampling and the
BEV reshape pair.

Everything here is a pure function over torch tensors and preserves the
dtype of its inputs, so the same code path serves float32 training and
float64 oracle checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

__all__ = [
    "Pose",
    "CameraIntrinsics",
    "Rays",
    "RaySamples",
    "VoxelGridSpec",
    "FeatureVolume",
    "BEVGrid",
    "camera_rays",
    "lidar_rays",
    "depth_to_point",
    "sample_along_ray",
    "trilinear_sample",
    "s2c",
    "c2s",
]

_ORTHO_TOL = 1e-6


def _as_tensor(x, dtype=None) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x if dtype is None else x.to(dtype)
    return torch.as_tensor(x, dtype=dtype or torch.get_default_dtype())


@dataclass(frozen=True)
class Pose:
    """Rigid transform mapping sensor-frame coordinates into the world."""

    rotation: torch.Tensor  # (3, 3), world <- sensor
    translation: torch.Tensor  # (3,), meters

    def __post_init__(self):
        r = _as_tensor(self.rotation)
        t = _as_tensor(self.translation)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"bad pose shapes {tuple(r.shape)}, {tuple(t.shape)}")
        eye = torch.eye(3, dtype=r.dtype)
        if not torch.allclose(r.T @ r, eye, atol=_ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(float(torch.linalg.det(r)) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation must have det +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity(dtype=None) -> "Pose":
        dtype = dtype or torch.get_default_dtype()
        return Pose(torch.eye(3, dtype=dtype), torch.zeros(3, dtype=dtype))

    @staticmethod
    def from_yaw(yaw: float, translation, dtype=None) -> "Pose":
        """Rotation about +z by ``yaw`` radians."""
        dtype = dtype or torch.get_default_dtype()
        c, s = torch.cos(torch.tensor(yaw, dtype=dtype)), torch.sin(torch.tensor(yaw, dtype=dtype))
        r = torch.stack(
            [
                torch.stack([c, -s, torch.zeros((), dtype=dtype)]),
                torch.stack([s, c, torch.zeros((), dtype=dtype)]),
                torch.tensor([0.0, 0.0, 1.0], dtype=dtype),
            ]
        )
        return Pose(r, _as_tensor(translation, dtype))

    def apply(self, points: torch.Tensor) -> torch.Tensor:
        """Transform sensor-frame points (..., 3) into the world frame."""
        r = self.rotation.to(points.dtype)
        t = self.translation.to(points.dtype)
        return points @ r.T + t

    def rotate(self, vectors: torch.Tensor) -> torch.Tensor:
        return vectors @ self.rotation.to(vectors.dtype).T

    def inverse_apply(self, points: torch.Tensor) -> torch.Tensor:
        """Transform world points into the sensor frame."""
        r = self.rotation.to(points.dtype)
        t = self.translation.to(points.dtype)
        return (points - t) @ r


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics of the same camera at ``factor`` times the resolution.

        Pixel centers stay aligned: image pixel (u + 0.5) maps to feature
        pixel (u', u' + 0.5) with u' = (u + 0.5) * factor - 0.5.
        """
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=(self.cx + 0.5) * factor - 0.5,
            cy=(self.cy + 0.5) * factor - 0.5,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
        )


@dataclass(frozen=True)
class Rays:
    """A batch of rays; directions are unit-norm rows."""

    origins: torch.Tensor  # (R, 3)
    directions: torch.Tensor  # (R, 3)

    def __post_init__(self):
        o, d = _as_tensor(self.origins), _as_tensor(self.directions)
        if o.ndim != 2 or o.shape[-1] != 3 or o.shape != d.shape:
            raise ValueError("rays need matching (R, 3) origins/directions")
        norms = torch.linalg.norm(d, dim=-1)
        if not torch.all((norms - 1.0).abs() < 1e-6):
            raise ValueError("ray directions must be unit norm")
        object.__setattr__(self, "origins", o)
        object.__setattr__(self, "directions", d)

    def __len__(self) -> int:
        return self.origins.shape[0]


@dataclass(frozen=True)
class RaySamples:
    distances: torch.Tensor  # (R, N), strictly increasing along the last axis
    positions: torch.Tensor  # (R, N, 3)

    def __post_init__(self):
        t, p = self.distances, self.positions
        if t.ndim != 2 or p.shape != (*t.shape, 3):
            raise ValueError("bad sample shapes")
        if t.shape[1] < 2:
            raise ValueError("need N >= 2 samples")
        if not torch.all(t[:, 1:] > t[:, :-1]):
            raise ValueError("distances must be strictly increasing")


@dataclass(frozen=True)
class VoxelGridSpec:
    min_corner: torch.Tensor  # (3,), meters
    max_corner: torch.Tensor  # (3,), meters
    shape: tuple  # (X, Y, Z)

    def __post_init__(self):
        lo = _as_tensor(self.min_corner, torch.float64)
        hi = _as_tensor(self.max_corner, torch.float64)
        if not torch.all(hi > lo):
            raise ValueError("max_corner must exceed min_corner componentwise")
        if len(self.shape) != 3 or any(int(s) <= 0 for s in self.shape):
            raise ValueError("shape must be three positive integers")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def voxel_size(self) -> torch.Tensor:
        return (self.max_corner - self.min_corner) / torch.tensor(
            self.shape, dtype=torch.float64
        )

    @property
    def diagonal(self) -> float:
        return float(torch.linalg.norm(self.max_corner - self.min_corner))

    def voxel_centers_1d(self, axis: int, dtype=None) -> torch.Tensor:
        dtype = dtype or torch.get_default_dtype()
        n = self.shape[axis]
        lo = float(self.min_corner[axis])
        vs = float(self.voxel_size[axis])
        return lo + (torch.arange(n, dtype=dtype) + 0.5) * vs


@dataclass
class FeatureVolume:
    spec: VoxelGridSpec
    data: torch.Tensor  # (X, Y, Z, C)

    def __post_init__(self):
        if self.data.ndim != 4 or tuple(self.data.shape[:3]) != self.spec.shape:
            raise ValueError(
                f"volume data {tuple(self.data.shape)} does not match grid {self.spec.shape}"
            )
        if not torch.all(torch.isfinite(self.data)):
            raise ValueError("volume contains non-finite values")

    @property
    def channels(self) -> int:
        return self.data.shape[-1]


@dataclass
class BEVGrid:
    data: torch.Tensor  # (X, Y, Z * C)
    z_slices: int
    channels: int

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[-1] != self.z_slices * self.channels:
            raise ValueError("BEV last axis must equal z_slices * channels")
        if not torch.all(torch.isfinite(self.data)):
            raise ValueError("BEV grid contains non-finite values")


def camera_rays(intr: CameraIntrinsics, pose: Pose, pixels: torch.Tensor) -> Rays:
    """Rays through pixel centers of a pinhole camera.

    ``pixels`` is (R, 2) of (u, v); each must satisfy 0 <= u < width,
    0 <= v < height. Camera frame: +x right, +y down, +z forward.
    """
    px = _as_tensor(pixels)
    if px.ndim != 2 or px.shape[-1] != 2:
        raise ValueError("pixels must be (R, 2)")
    u, v = px[:, 0], px[:, 1]
    if torch.any(u < 0) or torch.any(u >= intr.width) or torch.any(v < 0) or torch.any(v >= intr.height):
        raise ValueError("pixel out of bounds")
    x = (u + 0.5 - intr.cx) / intr.fx
    y = (v + 0.5 - intr.cy) / intr.fy
    d_cam = torch.stack([x, y, torch.ones_like(x)], dim=-1)
    d = pose.rotate(d_cam)
    d = d / torch.linalg.norm(d, dim=-1, keepdim=True)
    o = pose.translation.to(px.dtype).expand_as(d)
    return Rays(o, d)


def pixel_grid(width: int, height: int, dtype=None) -> torch.Tensor:
    """All (u, v) pixel coordinates, row-major over rows (v) then columns."""
    dtype = dtype or torch.get_default_dtype()
    v, u = torch.meshgrid(
        torch.arange(height, dtype=dtype), torch.arange(width, dtype=dtype), indexing="ij"
    )
    return torch.stack([u.reshape(-1), v.reshape(-1)], dim=-1)


def lidar_direction(azimuth: torch.Tensor, elevation: torch.Tensor) -> torch.Tensor:
    """Sensor-frame beam direction for azimuth beta and elevation alpha."""
    ca, sa = torch.cos(elevation), torch.sin(elevation)
    cb, sb = torch.cos(azimuth), torch.sin(azimuth)
    return torch.stack([ca * cb, ca * sb, sa], dim=-1)


def lidar_rays(
    azimuths: torch.Tensor,
    elevations: torch.Tensor,
    pose: Pose,
    paired: bool = False,
) -> Rays:
    """Beam rays for a spinning range sensor.

    With ``paired=False`` the full (elevation, azimuth) product is emitted
    row-major: all azimuths of elevation 0 first. With ``paired=True`` the
    two lists are zipped elementwise.
    """
    az = _as_tensor(azimuths).reshape(-1)
    el = _as_tensor(elevations).reshape(-1)
    if az.numel() == 0 or el.numel() == 0:
        raise ValueError("empty angle lists")
    if paired:
        if az.shape != el.shape:
            raise ValueError("paired lists must have equal length")
        a, e = az, el
    else:
        e = el.repeat_interleave(az.numel())
        a = az.repeat(el.numel())
    d = pose.rotate(lidar_direction(a, e))
    d = d / torch.linalg.norm(d, dim=-1, keepdim=True)
    o = pose.translation.to(d.dtype).expand_as(d)
    return Rays(o, d)


def depth_to_point(depth: torch.Tensor, elevation: torch.Tensor, azimuth: torch.Tensor) -> torch.Tensor:
    """Range measurement back to a sensor-frame point; norm equals depth."""
    d = _as_tensor(depth)
    if torch.any(d < 0):
        raise ValueError("depth must be nonnegative")
    return d.unsqueeze(-1) * lidar_direction(_as_tensor(azimuth), _as_tensor(elevation))


def sample_along_ray(
    rays: Rays,
    near: float,
    far: float,
    n: int,
    stratified: bool = False,
    generator: torch.Generator | None = None,
) -> RaySamples:
    """N depths per ray on [near, far]: bin midpoints, or one uniform draw
    per bin when stratified."""
    if not (0 <= near < far):
        raise ValueError("need 0 <= near < far")
    if n < 2:
        raise ValueError("need at least two samples")
    dtype = rays.origins.dtype
    r = len(rays)
    edges = torch.linspace(0.0, 1.0, n + 1, dtype=dtype)
    if stratified:
        u = torch.rand((r, n), generator=generator, dtype=dtype)
    else:
        u = torch.full((r, n), 0.5, dtype=dtype)
    frac = edges[:-1] + u * (edges[1:] - edges[:-1])
    t = near + frac * (far - near)
    pos = rays.origins[:, None, :] + t[..., None] * rays.directions[:, None, :]
    return RaySamples(t, pos)


def trilinear_sample(vol: FeatureVolume, points: torch.Tensor) -> torch.Tensor:
    """8-neighbor trilinear blend on the voxel-center lattice.

    Lattice corners outside the grid contribute zero, and any point outside
    the grid box returns the zero vector. Differentiable w.r.t. vol.data.
    """
    p = points
    if p.ndim == 1:
        return trilinear_sample(vol, p.unsqueeze(0)).squeeze(0)
    if not torch.all(torch.isfinite(p)):
        raise ValueError("non-finite sample positions")
    spec = vol.spec
    dtype = p.dtype
    lo = spec.min_corner.to(dtype)
    vs = spec.voxel_size.to(dtype)
    shape = torch.tensor(spec.shape)
    # continuous lattice coordinate: voxel center i sits at u = i
    u = (p - lo) / vs - 0.5
    inside = torch.all((p >= lo) & (p <= spec.max_corner.to(dtype)), dim=-1)

    i0 = torch.floor(u).long()
    w1 = (u - i0.to(dtype)).clamp(0.0, 1.0)
    w0 = 1.0 - w1

    flat = vol.data.reshape(-1, vol.channels)
    out = torch.zeros(p.shape[0], vol.channels, dtype=vol.data.dtype)
    for bits in range(8):
        off = torch.tensor([(bits >> k) & 1 for k in range(3)])
        idx = i0 + off
        valid = inside & torch.all((idx >= 0) & (idx < shape), dim=-1)
        w = torch.ones(p.shape[0], dtype=dtype)
        for k in range(3):
            w = w * (w1[:, k] if off[k] else w0[:, k])
        lin = (idx[:, 0] * shape[1] + idx[:, 1]) * shape[2] + idx[:, 2]
        lin = torch.where(valid, lin, torch.zeros_like(lin))
        contrib = flat[lin] * (w * valid.to(dtype)).unsqueeze(-1).to(vol.data.dtype)
        out = out + contrib
    return out


def points_in_grid(spec: VoxelGridSpec, points: torch.Tensor) -> torch.Tensor:
    lo = spec.min_corner.to(points.dtype)
    hi = spec.max_corner.to(points.dtype)
    return torch.all((points >= lo) & (points <= hi), dim=-1)


def s2c(vol: FeatureVolume) -> BEVGrid:
    """Flatten the height axis into channels: bev[x, y, z*C + c] = vol[x, y, z, c]."""
    x, y, z, c = vol.data.shape
    return BEVGrid(vol.data.reshape(x, y, z * c), z_slices=z, channels=c)


def c2s(bev: BEVGrid, spec: VoxelGridSpec) -> FeatureVolume:
    """Inverse of s2c; channel count is recovered from bev.z_slices."""
    x, y, zc = bev.data.shape
    z, c = bev.z_slices, bev.channels
    if (x, y, z) != spec.shape or zc != z * c:
        raise ValueError("BEV shape incompatible with grid spec")
    return FeatureVolume(spec, bev.data.reshape(x, y, z, c))
