import math

import pytest
import torch

from bevforge.geometry import (
    BEVGrid,
    CameraIntrinsics,
    FeatureVolume,
    Pose,
    Rays,
    VoxelGridSpec,
    c2s,
    camera_rays,
    depth_to_point,
    lidar_rays,
    s2c,
    sample_along_ray,
    trilinear_sample,
)


def small_grid(dtype=torch.float64):
    return VoxelGridSpec(
        torch.tensor([0.0, 0.0, 0.0], dtype=dtype),
        torch.tensor([4.0, 4.0, 4.0], dtype=dtype),
        (4, 4, 4),
    )


def test_camera_rays_principal_point():
    intr = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)
    rays = camera_rays(intr, Pose.identity(torch.float64), torch.tensor([[49.5, 49.5]], dtype=torch.float64))
    assert torch.allclose(rays.directions[0], torch.tensor([0.0, 0.0, 1.0], dtype=torch.float64), atol=1e-12)


def test_camera_rays_45deg():
    intr = CameraIntrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=200, height=100)
    rays = camera_rays(intr, Pose.identity(torch.float64), torch.tensor([[149.5, 49.5]], dtype=torch.float64))
    expect = torch.tensor([0.7071, 0.0, 0.7071], dtype=torch.float64)
    assert torch.allclose(rays.directions[0], expect, atol=1e-4)


def test_camera_rays_origin_is_camera_center():
    intr = CameraIntrinsics(fx=50.0, fy=50.0, cx=32.0, cy=32.0, width=64, height=64)
    pose = Pose.from_yaw(0.3, [1.0, 2.0, 3.0], dtype=torch.float64)
    rays = camera_rays(intr, pose, torch.tensor([[10.0, 20.0], [5.0, 5.0]], dtype=torch.float64))
    assert torch.allclose(rays.origins, torch.tensor([[1.0, 2.0, 3.0]], dtype=torch.float64).expand(2, 3))


def test_camera_rays_rejects_out_of_bounds():
    intr = CameraIntrinsics(fx=50.0, fy=50.0, cx=32.0, cy=32.0, width=64, height=64)
    with pytest.raises(ValueError):
        camera_rays(intr, Pose.identity(), torch.tensor([[64.0, 0.0]]))


def test_lidar_rays_axis_cases():
    pose = Pose.identity(torch.float64)
    r = lidar_rays(torch.tensor([0.0], dtype=torch.float64), torch.tensor([0.0], dtype=torch.float64), pose)
    assert torch.allclose(r.directions[0], torch.tensor([1.0, 0.0, 0.0], dtype=torch.float64), atol=1e-12)
    r = lidar_rays(torch.tensor([math.pi / 2], dtype=torch.float64), torch.tensor([0.0], dtype=torch.float64), pose)
    assert torch.allclose(r.directions[0], torch.tensor([0.0, 1.0, 0.0], dtype=torch.float64), atol=1e-12)


def test_lidar_rays_oblique():
    r = lidar_rays(
        torch.tensor([math.pi / 4], dtype=torch.float64),
        torch.tensor([math.pi / 6], dtype=torch.float64),
        Pose.identity(torch.float64),
    )
    expect = torch.tensor([0.6124, 0.6124, 0.5], dtype=torch.float64)
    assert torch.allclose(r.directions[0], expect, atol=1e-4)


def test_lidar_rays_grid_is_row_major_by_elevation():
    az = torch.tensor([0.0, math.pi / 2], dtype=torch.float64)
    el = torch.tensor([0.0, math.pi / 6], dtype=torch.float64)
    r = lidar_rays(az, el, Pose.identity(torch.float64))
    assert len(r) == 4
    # first row: elevation 0 across both azimuths
    assert torch.allclose(r.directions[0], torch.tensor([1.0, 0.0, 0.0], dtype=torch.float64), atol=1e-12)
    assert torch.allclose(r.directions[1], torch.tensor([0.0, 1.0, 0.0], dtype=torch.float64), atol=1e-12)
    assert abs(float(r.directions[2][2]) - 0.5) < 1e-12


def test_emitted_rays_unit_norm_property():
    g = torch.Generator().manual_seed(7)
    for _ in range(20):
        yaw = float(torch.rand((), generator=g) * 6 - 3)
        t = torch.randn(3, generator=g, dtype=torch.float64)
        pose = Pose.from_yaw(yaw, t, dtype=torch.float64)
        intr = CameraIntrinsics(
            fx=float(20 + 200 * torch.rand((), generator=g)),
            fy=float(20 + 200 * torch.rand((), generator=g)),
            cx=31.0,
            cy=15.0,
            width=64,
            height=32,
        )
        px = torch.rand(50, 2, generator=g, dtype=torch.float64) * torch.tensor([64.0, 32.0], dtype=torch.float64)
        cr = camera_rays(intr, pose, px)
        assert torch.all((torch.linalg.norm(cr.directions, dim=-1) - 1).abs() < 1e-6)
        az = (torch.rand(30, generator=g, dtype=torch.float64) * 2 - 1) * math.pi
        el = (torch.rand(30, generator=g, dtype=torch.float64) - 0.5) * math.pi * 0.9
        lr = lidar_rays(az, el, pose, paired=True)
        assert torch.all((torch.linalg.norm(lr.directions, dim=-1) - 1).abs() < 1e-6)


def test_depth_to_point_cases():
    p = depth_to_point(torch.tensor(5.0, dtype=torch.float64), torch.tensor(0.0, dtype=torch.float64), torch.tensor(0.0, dtype=torch.float64))
    assert torch.allclose(p, torch.tensor([5.0, 0.0, 0.0], dtype=torch.float64))
    p = depth_to_point(torch.tensor(0.0), torch.tensor(0.4), torch.tensor(-1.0))
    assert torch.allclose(p, torch.zeros(3))
    p = depth_to_point(
        torch.tensor(2.0, dtype=torch.float64),
        torch.tensor(math.pi / 6, dtype=torch.float64),
        torch.tensor(math.pi / 3, dtype=torch.float64),
    )
    assert torch.allclose(p, torch.tensor([0.8660, 1.5, 1.0], dtype=torch.float64), atol=1e-4)


def test_depth_to_point_rejects_negative():
    with pytest.raises(ValueError):
        depth_to_point(torch.tensor(-1.0), torch.tensor(0.0), torch.tensor(0.0))


def test_depth_to_point_norm_identity_property():
    g = torch.Generator().manual_seed(3)
    d = torch.rand(10_000, generator=g, dtype=torch.float64) * 100
    el = (torch.rand(10_000, generator=g, dtype=torch.float64) - 0.5) * math.pi
    az = (torch.rand(10_000, generator=g, dtype=torch.float64) * 2 - 1) * math.pi
    p = depth_to_point(d, el, az)
    assert torch.all((torch.linalg.norm(p, dim=-1) - d).abs() < 1e-6)


def _one_ray(dtype=torch.float64):
    return Rays(
        torch.tensor([[0.0, 0.0, 0.0]], dtype=dtype),
        torch.tensor([[0.0, 0.0, 1.0]], dtype=dtype),
    )


def test_sample_along_ray_midpoints():
    s = sample_along_ray(_one_ray(), near=0.0, far=4.0, n=4)
    assert torch.allclose(s.distances[0], torch.tensor([0.5, 1.5, 2.5, 3.5], dtype=torch.float64))
    assert torch.allclose(s.positions[0, :, 2], s.distances[0])


def test_sample_along_ray_stratified_containment_and_determinism():
    near, far, n = 1.0, 9.0, 16
    g = torch.Generator().manual_seed(11)
    s1 = sample_along_ray(_one_ray(), near, far, n, stratified=True, generator=g)
    g = torch.Generator().manual_seed(11)
    s2 = sample_along_ray(_one_ray(), near, far, n, stratified=True, generator=g)
    assert torch.equal(s1.distances, s2.distances)
    w = (far - near) / n
    for i in range(n):
        t = float(s1.distances[0, i])
        assert near + i * w <= t < near + (i + 1) * w
    assert torch.all(s1.distances[0, 1:] > s1.distances[0, :-1])


def test_sample_along_ray_rejects_bad_range():
    with pytest.raises(ValueError):
        sample_along_ray(_one_ray(), 3.0, 3.0, 4)


def test_trilinear_voxel_center_exact():
    spec = small_grid()
    g = torch.Generator().manual_seed(0)
    data = torch.randn(4, 4, 4, 2, generator=g, dtype=torch.float64)
    vol = FeatureVolume(spec, data)
    p = torch.tensor([1.5, 2.5, 0.5], dtype=torch.float64)  # voxel (1, 2, 0) center
    assert torch.allclose(trilinear_sample(vol, p), data[1, 2, 0], atol=1e-12)


def test_trilinear_midpoint_mean():
    spec = small_grid()
    g = torch.Generator().manual_seed(1)
    data = torch.randn(4, 4, 4, 3, generator=g, dtype=torch.float64)
    vol = FeatureVolume(spec, data)
    p = torch.tensor([2.0, 1.5, 2.5], dtype=torch.float64)  # midway between (1,1,2) and (2,1,2)
    expect = 0.5 * (data[1, 1, 2] + data[2, 1, 2])
    assert torch.allclose(trilinear_sample(vol, p), expect, atol=1e-12)


def _trilinear_oracle(spec, data, p):
    """Independent 8-corner weighted sum on the voxel-center lattice."""
    lo = spec.min_corner.numpy()
    vs = spec.voxel_size.numpy()
    shape = data.shape[:3]
    u = [(float(p[k]) - lo[k]) / vs[k] - 0.5 for k in range(3)]
    i0 = [math.floor(u[k]) for k in range(3)]
    out = torch.zeros(data.shape[-1], dtype=data.dtype)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                ii = (i0[0] + dx, i0[1] + dy, i0[2] + dz)
                if any(ii[k] < 0 or ii[k] >= shape[k] for k in range(3)):
                    continue
                w = 1.0
                for k, dd in enumerate((dx, dy, dz)):
                    f = u[k] - i0[k]
                    w *= f if dd else (1.0 - f)
                out = out + w * data[ii]
    return out


def test_trilinear_matches_corner_weight_oracle():
    spec = small_grid()
    g = torch.Generator().manual_seed(2)
    data = torch.randn(4, 4, 4, 2, generator=g, dtype=torch.float64)
    vol = FeatureVolume(spec, data)
    pts = torch.rand(100, 3, generator=g, dtype=torch.float64) * 4.0
    got = trilinear_sample(vol, pts)
    for i in range(100):
        expect = _trilinear_oracle(spec, data, pts[i])
        assert torch.allclose(got[i], expect, atol=1e-6)


def test_trilinear_outside_returns_zero():
    spec = small_grid()
    vol = FeatureVolume(spec, torch.ones(4, 4, 4, 2, dtype=torch.float64))
    p = torch.tensor([[5.0, 1.0, 1.0], [-0.1, 2.0, 2.0]], dtype=torch.float64)
    assert torch.all(trilinear_sample(vol, p) == 0)


def test_trilinear_constant_and_linear_reproduction():
    spec = small_grid()
    vol = FeatureVolume(spec, torch.full((4, 4, 4, 1), 3.25, dtype=torch.float64))
    g = torch.Generator().manual_seed(4)
    # interior of the center lattice: [0.5 + eps, 3.5 - eps] per axis
    pts = 0.6 + torch.rand(64, 3, generator=g, dtype=torch.float64) * 2.8
    assert torch.allclose(trilinear_sample(vol, pts), torch.full((64, 1), 3.25, dtype=torch.float64), atol=1e-12)

    centers = [spec.voxel_centers_1d(k, torch.float64) for k in range(3)]
    cx, cy, cz = torch.meshgrid(*centers, indexing="ij")
    lin = (2.0 * cx - 0.5 * cy + 3.0 * cz + 1.0).unsqueeze(-1)
    vol = FeatureVolume(spec, lin)
    got = trilinear_sample(vol, pts).squeeze(-1)
    expect = 2.0 * pts[:, 0] - 0.5 * pts[:, 1] + 3.0 * pts[:, 2] + 1.0
    assert torch.allclose(got, expect, atol=1e-9)


def test_trilinear_rejects_nonfinite():
    spec = small_grid()
    vol = FeatureVolume(spec, torch.zeros(4, 4, 4, 1, dtype=torch.float64))
    with pytest.raises(ValueError):
        trilinear_sample(vol, torch.tensor([[float("nan"), 0.0, 0.0]], dtype=torch.float64))


def test_s2c_c2s_round_trip():
    spec = VoxelGridSpec(torch.zeros(3), torch.tensor([6.0, 6.0, 2.0]), (6, 6, 2))
    g = torch.Generator().manual_seed(5)
    data = torch.randn(6, 6, 2, 3, generator=g)
    vol = FeatureVolume(spec, data)
    bev = s2c(vol)
    back = c2s(bev, spec)
    assert torch.equal(back.data, data)
    bev2 = s2c(back)
    assert torch.equal(bev2.data, bev.data)


def test_s2c_index_bookkeeping():
    spec = VoxelGridSpec(torch.zeros(3), torch.tensor([3.0, 2.0, 2.0]), (3, 2, 2))
    x, y, z, c = 3, 2, 2, 3
    data = torch.zeros(x, y, z, c)
    for ix in range(x):
        for iy in range(y):
            for iz in range(z):
                for ic in range(c):
                    data[ix, iy, iz, ic] = 1000 * ix + 100 * iy + 10 * iz + ic
    bev = s2c(FeatureVolume(spec, data))
    for ix in range(x):
        for iy in range(y):
            for iz in range(z):
                for ic in range(c):
                    assert float(bev.data[ix, iy, iz * c + ic]) == 1000 * ix + 100 * iy + 10 * iz + ic


def test_s2c_z1_is_squeeze():
    spec = VoxelGridSpec(torch.zeros(3), torch.tensor([2.0, 2.0, 1.0]), (2, 2, 1))
    g = torch.Generator().manual_seed(6)
    data = torch.randn(2, 2, 1, 5, generator=g)
    bev = s2c(FeatureVolume(spec, data))
    assert torch.equal(bev.data, data.squeeze(2))


def test_c2s_rejects_shape_mismatch():
    spec = VoxelGridSpec(torch.zeros(3), torch.tensor([4.0, 4.0, 4.0]), (4, 4, 4))
    bev = BEVGrid(torch.zeros(4, 4, 6), z_slices=2, channels=3)
    with pytest.raises(ValueError):
        c2s(bev, spec)  # spec wants z=4


def test_pose_validation():
    with pytest.raises(ValueError):
        Pose(torch.eye(3) * 2.0, torch.zeros(3))
    r = torch.eye(3)
    r[0, 0] = -1.0  # det -1 reflection
    with pytest.raises(ValueError):
        Pose(r, torch.zeros(3))


def test_intrinsics_validation_and_scaling():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=-1.0, fy=1.0, cx=0.0, cy=0.0, width=4, height=4)
    intr = CameraIntrinsics(fx=100.0, fy=80.0, cx=31.5, cy=31.5, width=64, height=64)
    s = intr.scaled(0.25)
    assert s.width == 16 and s.height == 16
    assert abs(s.fx - 25.0) < 1e-9
    # pixel-center alignment: u_f + 0.5 == (u + 0.5) / 4
    assert abs((s.cx + 0.5) - (intr.cx + 0.5) * 0.25) < 1e-9
