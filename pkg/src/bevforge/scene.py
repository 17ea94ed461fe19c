"""Procedural synthetic driving world and its analytic raycaster.

The raycaster is the ground-truth oracle for camera RGB/depth and
range-sensor scans; scenes also export the three generator conditions
(road sketch raster, oriented boxes, scene text tokens).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .geometry import Pose, Rays, camera_rays, depth_to_point, lidar_rays, pixel_grid
from .config import LidarPatternConfig

__all__ = [
    "VOCAB",
    "token_id",
    "BoxObject",
    "SceneSpec",
    "Hit",
    "SketchRaster",
    "SceneGenConfig",
    "LidarScan",
    "generate_scene",
    "box_corners",
    "raycast",
    "render_gt_camera",
    "render_gt_lidar",
    "rasterize_sketch",
    "scene_to_conditions",
    "points_from_scan",
    "footprints_overlap",
]

# Closed caption vocabulary; ids are list positions.
VOCAB = [
    "<pad>",
    "car", "truck", "bus", "barrier",
    "red", "green", "blue", "yellow", "gray", "white", "black", "orange",
    "day", "night", "dawn", "dusk",
    "clear", "rain", "fog",
    "empty", "sparse", "busy", "crowded",
    "zero", "one", "two", "three", "four", "five", "six", "many",
]

_TOKEN_IDS = {w: i for i, w in enumerate(VOCAB)}

CLASS_NAMES = {1: "car", 2: "truck", 3: "bus", 4: "barrier"}
CLASS_COLORS = {1: "blue", 2: "red", 3: "yellow", 4: "orange"}

# class_id -> (albedo, rgb); ground is class 0
DEFAULT_PALETTE = {
    0: (0.55, (0.45, 0.45, 0.45)),
    1: (0.70, (0.25, 0.35, 0.85)),
    2: (0.60, (0.85, 0.25, 0.25)),
    3: (0.65, (0.90, 0.80, 0.20)),
    4: (0.50, (0.95, 0.55, 0.15)),
}

BACKGROUND_RGB = (0.53, 0.81, 0.92)

DROP_INCIDENCE_DEG = 85.0
MISS_DEPTH = float("inf")


def token_id(word: str) -> int:
    return _TOKEN_IDS[word]


@dataclass
class BoxObject:
    center: tuple  # (x, y, z) meters
    size: tuple  # (length, width, height) meters
    yaw: float  # radians in [-pi, pi)
    class_id: int
    instance_id: float  # in [0, 1]
    caption_tokens: list

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValueError("box size must be positive")
        if not (0.0 <= self.instance_id <= 1.0):
            raise ValueError("instance_id must lie in [0, 1]")
        if not (-math.pi <= self.yaw < math.pi):
            raise ValueError("yaw out of [-pi, pi)")


@dataclass
class SceneSpec:
    boxes: list  # list[BoxObject]
    road_polylines: list  # list of {"points": [[x, y], ...], "width": w}
    text_tokens: list
    seed: int
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    extents_min: tuple = (-8.0, -8.0, 0.0)
    extents_max: tuple = (8.0, 8.0, 4.0)
    requested_box_count: int = 0

    @property
    def diagonal(self) -> float:
        return math.dist(self.extents_min, self.extents_max)


@dataclass
class Hit:
    """Per-ray raycast records; invalid rays carry the +inf depth sentinel."""

    depth: torch.Tensor  # (R,)
    rgb: torch.Tensor  # (R, 3)
    intensity: torch.Tensor  # (R,)
    drop: torch.Tensor  # (R,) bool
    class_id: torch.Tensor  # (R,) long
    valid: torch.Tensor  # (R,) bool


@dataclass
class SketchRaster:
    data: torch.Tensor  # (2, W, H) binary; channel 0 road, channel 1 boxes
    meters_per_cell: float

    def __post_init__(self):
        vals = torch.unique(self.data)
        if not torch.all((vals == 0) | (vals == 1)):
            raise ValueError("sketch raster must be binary")


@dataclass
class LidarScan:
    depth: torch.Tensor  # (E, A)
    intensity: torch.Tensor  # (E, A)
    drop: torch.Tensor  # (E, A) bool
    azimuths: torch.Tensor  # (A,)
    elevations: torch.Tensor  # (E,)
    pose: Pose


@dataclass
class SceneGenConfig:
    box_count_min: int = 2
    box_count_max: int = 6
    classes: tuple = (1, 2, 3, 4)
    extents_min: tuple = (-8.0, -8.0, 0.0)
    extents_max: tuple = (8.0, 8.0, 4.0)
    ego_exclusion_radius: float = 2.2
    placement_retries: int = 60
    road_width_range: tuple = (3.0, 4.0)

    # nominal (length, width, height) per class; jittered +-15%
    base_sizes: dict = field(
        default_factory=lambda: {
            1: (3.8, 1.8, 1.5),
            2: (5.6, 2.3, 2.4),
            3: (7.0, 2.5, 2.9),
            4: (1.6, 0.5, 0.9),
        }
    )


def _yaw_matrix2(yaw: float) -> torch.Tensor:
    c, s = math.cos(yaw), math.sin(yaw)
    return torch.tensor([[c, -s], [s, c]], dtype=torch.float64)


def footprint_corners(center_xy, size_xy, yaw: float) -> torch.Tensor:
    """BEV rectangle corners (4, 2), counterclockwise."""
    half = torch.tensor(
        [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]], dtype=torch.float64
    ) * torch.tensor(size_xy, dtype=torch.float64)
    return half @ _yaw_matrix2(yaw).T + torch.tensor(center_xy, dtype=torch.float64)


def footprints_overlap(a: BoxObject, b: BoxObject) -> bool:
    """Separating-axis test on the two BEV rectangles."""
    ca = footprint_corners(a.center[:2], a.size[:2], a.yaw)
    cb = footprint_corners(b.center[:2], b.size[:2], b.yaw)
    for yaw in (a.yaw, b.yaw):
        rot = _yaw_matrix2(yaw)
        for axis in rot.T:
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def _rand(g: torch.Generator, lo: float, hi: float) -> float:
    return lo + (hi - lo) * float(torch.rand((), generator=g, dtype=torch.float64))


def _make_road(g: torch.Generator, cfg: SceneGenConfig) -> dict:
    """One straight or gently curved polyline clipped to the extents."""
    xmin, ymin = cfg.extents_min[:2]
    xmax, ymax = cfg.extents_max[:2]
    heading = _rand(g, -math.pi, math.pi)
    offset = _rand(g, -2.0, 2.0)
    curvature = _rand(g, -0.04, 0.04) if _rand(g, 0, 1) < 0.5 else 0.0
    n = 33
    half_len = math.dist((xmin, ymin), (xmax, ymax))
    ts = torch.linspace(-half_len / 2, half_len / 2, n, dtype=torch.float64)
    c, s = math.cos(heading), math.sin(heading)
    x = ts * c - (curvature * ts**2 + offset) * s
    y = ts * s + (curvature * ts**2 + offset) * c
    keep = (x >= xmin) & (x <= xmax) & (y >= ymin) & (y <= ymax)
    pts = torch.stack([x[keep], y[keep]], dim=-1)
    if pts.shape[0] < 2:
        pts = torch.tensor([[xmin, 0.0], [xmax, 0.0]], dtype=torch.float64)
    width = _rand(g, *cfg.road_width_range)
    return {"points": [[float(px), float(py)] for px, py in pts], "width": width}


def _count_word(n: int) -> str:
    words = ["zero", "one", "two", "three", "four", "five", "six"]
    return words[n] if n < len(words) else "many"


def generate_scene(seed: int, config: SceneGenConfig | None = None) -> SceneSpec:
    """Deterministic scene for a seed: non-overlapping boxes on the ground
    plane, one road polyline, and weather/time text tokens."""
    cfg = config or SceneGenConfig()
    g = torch.Generator().manual_seed(int(seed))
    requested = int(torch.randint(cfg.box_count_min, cfg.box_count_max + 1, (1,), generator=g))

    boxes: list[BoxObject] = []
    for _ in range(requested):
        placed = False
        for _ in range(cfg.placement_retries):
            class_id = cfg.classes[int(torch.randint(len(cfg.classes), (1,), generator=g))]
            base = cfg.base_sizes[class_id]
            size = tuple(b * _rand(g, 0.85, 1.15) for b in base)
            half_diag = 0.5 * math.hypot(size[0], size[1])
            xmin, ymin = cfg.extents_min[:2]
            xmax, ymax = cfg.extents_max[:2]
            x = _rand(g, xmin + half_diag, xmax - half_diag)
            y = _rand(g, ymin + half_diag, ymax - half_diag)
            if math.hypot(x, y) < cfg.ego_exclusion_radius + half_diag:
                continue
            yaw = _rand(g, -math.pi, math.pi)
            cand = BoxObject(
                center=(x, y, size[2] / 2),
                size=size,
                yaw=yaw,
                class_id=class_id,
                instance_id=_rand(g, 0.0, 1.0),
                caption_tokens=[
                    token_id(CLASS_NAMES[class_id]),
                    token_id(CLASS_COLORS[class_id]),
                ],
            )
            if any(footprints_overlap(cand, other) for other in boxes):
                continue
            boxes.append(cand)
            placed = True
            break
        if not placed:
            break  # reduced count, recorded via requested_box_count

    road = _make_road(g, cfg)
    weather = ("clear", "rain", "fog")[int(torch.randint(3, (1,), generator=g))]
    timeofday = ("day", "night", "dawn", "dusk")[int(torch.randint(4, (1,), generator=g))]
    n = len(boxes)
    density = "empty" if n == 0 else "sparse" if n <= 2 else "busy" if n <= 4 else "crowded"
    text = [token_id(w) for w in (weather, timeofday, density, _count_word(n))]

    return SceneSpec(
        boxes=boxes,
        road_polylines=[road],
        text_tokens=text,
        seed=int(seed),
        palette=dict(DEFAULT_PALETTE),
        extents_min=tuple(cfg.extents_min),
        extents_max=tuple(cfg.extents_max),
        requested_box_count=requested,
    )


# Corner ordering: index j in 0..7 encodes signs as bits (bit0 -> x,
# bit1 -> y, bit2 -> z); bit value 0 means -half, 1 means +half.
_CORNER_SIGNS = torch.tensor(
    [[(j >> 0) & 1, (j >> 1) & 1, (j >> 2) & 1] for j in range(8)], dtype=torch.float64
) * 2.0 - 1.0


def box_corners(box: BoxObject) -> torch.Tensor:
    """The 8 box corners (8, 3) in the documented bit-pattern order."""
    half = torch.tensor(box.size, dtype=torch.float64) / 2
    local = _CORNER_SIGNS * half
    rot2 = _yaw_matrix2(box.yaw)
    out = local.clone()
    out[:, :2] = local[:, :2] @ rot2.T
    return out + torch.tensor(box.center, dtype=torch.float64)


def _ray_box_slab(origins, dirs, box: BoxObject):
    """Entry distance and world normal for each ray against one box.

    Returns (t_enter (R,), normal (R, 3), hit (R,) bool). Rays starting
    inside the box do not register a hit.
    """
    dtype = origins.dtype
    center = torch.tensor(box.center, dtype=dtype)
    half = torch.tensor(box.size, dtype=dtype) / 2
    rot2 = _yaw_matrix2(box.yaw).to(dtype)

    o = origins - center
    o = torch.cat([o[:, :2] @ rot2, o[:, 2:]], dim=-1)
    d = torch.cat([dirs[:, :2] @ rot2, dirs[:, 2:]], dim=-1)

    eps = torch.finfo(dtype).tiny
    safe_d = torch.where(d.abs() < eps, torch.full_like(d, eps), d)
    t1 = (-half - o) / safe_d
    t2 = (half - o) / safe_d
    tmin = torch.minimum(t1, t2)
    tmax = torch.maximum(t1, t2)
    # parallel rays: hit the slab iff the origin lies between the planes
    parallel = d.abs() < 1e-12
    inside_slab = o.abs() <= half
    tmin = torch.where(parallel, torch.where(inside_slab, torch.full_like(tmin, -torch.inf), torch.full_like(tmin, torch.inf)), tmin)
    tmax = torch.where(parallel, torch.where(inside_slab, torch.full_like(tmax, torch.inf), torch.full_like(tmax, -torch.inf)), tmax)

    t_enter, enter_axis = tmin.max(dim=-1)
    t_exit = tmax.min(dim=-1).values
    hit = (t_enter <= t_exit) & (t_enter > 1e-9)

    axis_one_hot = torch.nn.functional.one_hot(enter_axis, 3).to(dtype)
    n_local = -torch.sign(torch.gather(d, 1, enter_axis.unsqueeze(-1))) * axis_one_hot
    n_world = torch.cat([n_local[:, :2] @ rot2.T, n_local[:, 2:]], dim=-1)
    return t_enter, n_world, hit


def raycast(
    scene: SceneSpec,
    rays: Rays,
    drop_range: float | None = None,
    drop_incidence_deg: float = DROP_INCIDENCE_DEG,
) -> Hit:
    """Nearest intersection against the ground plane z=0 and all boxes.

    Shading is headlight Lambertian: rgb = palette_rgb * (0.5 + 0.5 cos),
    intensity = albedo * cos with cos = n . (-d). A record drops when its
    depth exceeds ``drop_range`` (default 0.9 * scene diagonal) or grazes
    beyond ``drop_incidence_deg``.
    """
    o, d = rays.origins, rays.directions
    dtype = o.dtype
    r = len(rays)
    if drop_range is None:
        drop_range = 0.9 * scene.diagonal

    depth = torch.full((r,), torch.inf, dtype=dtype)
    normal = torch.zeros(r, 3, dtype=dtype)
    class_id = torch.full((r,), -1, dtype=torch.long)

    # ground plane z = 0
    dz = d[:, 2]
    t_ground = torch.where(dz.abs() > 1e-12, -o[:, 2] / dz, torch.full_like(dz, torch.inf))
    ok = (t_ground > 1e-9) & torch.isfinite(t_ground)
    depth = torch.where(ok, t_ground, depth)
    up = torch.tensor([0.0, 0.0, 1.0], dtype=dtype) * torch.sign(o[:, 2:3])
    normal = torch.where(ok.unsqueeze(-1), up.expand(r, 3), normal)
    class_id = torch.where(ok, torch.zeros_like(class_id), class_id)

    for box in scene.boxes:
        t, n, hit = _ray_box_slab(o, d, box)
        closer = hit & (t < depth)
        depth = torch.where(closer, t, depth)
        normal = torch.where(closer.unsqueeze(-1), n, normal)
        class_id = torch.where(closer, torch.full_like(class_id, box.class_id), class_id)

    valid = torch.isfinite(depth)
    cos = (normal * -d).sum(-1).clamp(0.0, 1.0)

    palette_rgb = torch.zeros(r, 3, dtype=dtype)
    albedo = torch.zeros(r, dtype=dtype)
    for cid, (alb, rgb) in scene.palette.items():
        m = class_id == int(cid)
        palette_rgb[m] = torch.tensor(rgb, dtype=dtype)
        albedo[m] = float(alb)

    shade = (0.5 + 0.5 * cos).unsqueeze(-1)
    rgb = torch.where(valid.unsqueeze(-1), palette_rgb * shade, torch.zeros(r, 3, dtype=dtype))
    intensity = torch.where(valid, albedo * cos, torch.zeros(r, dtype=dtype))

    graze = cos < math.cos(math.radians(drop_incidence_deg))
    drop = ~valid | (depth > drop_range) | graze
    depth = torch.where(valid, depth, torch.full_like(depth, MISS_DEPTH))
    return Hit(depth=depth, rgb=rgb.clamp(0.0, 1.0), intensity=intensity.clamp(0.0, 1.0), drop=drop, class_id=class_id, valid=valid)


def render_gt_camera(scene: SceneSpec, intr, pose: Pose, dtype=torch.float64):
    """Per-pixel raycast image and depth map; sky pixels take the fixed
    background color and the +inf depth sentinel."""
    px = pixel_grid(intr.width, intr.height, dtype=dtype)
    rays = camera_rays(intr, pose, px)
    hit = raycast(scene, rays)
    bg = torch.tensor(BACKGROUND_RGB, dtype=dtype)
    rgb = torch.where(hit.valid.unsqueeze(-1), hit.rgb, bg.expand(len(rays), 3))
    image = rgb.reshape(intr.height, intr.width, 3)
    depth = hit.depth.reshape(intr.height, intr.width)
    return image, depth


def render_gt_lidar(
    scene: SceneSpec,
    pose: Pose,
    pattern: LidarPatternConfig,
    dtype=torch.float64,
) -> LidarScan:
    """Row-major (elevation, azimuth) scan grid with drop flags."""
    az = pattern.azimuths(dtype)
    el = pattern.elevations(dtype)
    rays = lidar_rays(az, el, pose)
    hit = raycast(scene, rays)
    e, a = el.numel(), az.numel()
    return LidarScan(
        depth=hit.depth.reshape(e, a),
        intensity=hit.intensity.reshape(e, a),
        drop=hit.drop.reshape(e, a),
        azimuths=az,
        elevations=el,
        pose=pose,
    )


def points_from_scan(scan: LidarScan, include_dropped: bool = False) -> torch.Tensor:
    """World-frame (n, 4) points (x, y, z, intensity) from a scan."""
    el = scan.elevations.unsqueeze(-1).expand_as(scan.depth)
    az = scan.azimuths.unsqueeze(0).expand_as(scan.depth)
    keep = torch.ones_like(scan.drop) if include_dropped else ~scan.drop
    keep = keep & torch.isfinite(scan.depth)
    d = scan.depth[keep]
    pts = depth_to_point(d, el[keep], az[keep])
    world = scan.pose.apply(pts)
    return torch.cat([world, scan.intensity[keep].unsqueeze(-1)], dim=-1)


def _point_segment_dist2(px, py, ax, ay, bx, by):
    abx, aby = bx - ax, by - ay
    apx, apy = px - ax, py - ay
    denom = abx * abx + aby * aby
    t = ((apx * abx + apy * aby) / denom.clamp(min=1e-12)).clamp(0.0, 1.0)
    cx, cy = ax + t * abx, ay + t * aby
    return (px - cx) ** 2 + (py - cy) ** 2


@dataclass(frozen=True)
class SketchSpec:
    cells: int = 32  # square raster over the scene extents

    def meters_per_cell(self, scene: SceneSpec) -> float:
        return (scene.extents_max[0] - scene.extents_min[0]) / self.cells


def rasterize_sketch(scene: SceneSpec, spec: SketchSpec | None = None) -> SketchRaster:
    """Binary BEV raster: channel 0 road area, channel 1 box footprints."""
    spec = spec or SketchSpec()
    n = spec.cells
    mpc = spec.meters_per_cell(scene)
    x0, y0 = scene.extents_min[:2]
    cx = x0 + (torch.arange(n, dtype=torch.float64) + 0.5) * mpc
    cy = y0 + (torch.arange(n, dtype=torch.float64) + 0.5) * mpc
    gx, gy = torch.meshgrid(cx, cy, indexing="ij")

    road = torch.zeros(n, n, dtype=torch.bool)
    for line in scene.road_polylines:
        pts = line["points"]
        half_w = line["width"] / 2
        for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
            d2 = _point_segment_dist2(gx, gy, ax, ay, bx, by)
            road |= d2 <= half_w**2

    boxes = torch.zeros(n, n, dtype=torch.bool)
    for box in scene.boxes:
        rot2 = _yaw_matrix2(box.yaw)
        lx = (gx - box.center[0]) * rot2[0, 0] + (gy - box.center[1]) * rot2[1, 0]
        ly = (gx - box.center[0]) * rot2[0, 1] + (gy - box.center[1]) * rot2[1, 1]
        boxes |= (lx.abs() <= box.size[0] / 2) & (ly.abs() <= box.size[1] / 2)

    data = torch.stack([road, boxes]).to(torch.float32)
    return SketchRaster(data=data, meters_per_cell=mpc)


@dataclass
class Conditions:
    """Raw (unencoded) generator conditions extracted from a scene."""

    corners: torch.Tensor  # (n, 8, 3)
    headings: torch.Tensor  # (n,)
    instance_ids: torch.Tensor  # (n,)
    captions: list  # n token-id lists
    sketch: SketchRaster
    text_tokens: list


def scene_to_conditions(scene: SceneSpec, sketch_spec: SketchSpec | None = None) -> Conditions:
    boxes = sorted(scene.boxes, key=lambda b: b.instance_id)
    n = len(boxes)
    corners = (
        torch.stack([box_corners(b) for b in boxes])
        if n
        else torch.zeros(0, 8, 3, dtype=torch.float64)
    )
    headings = torch.tensor([b.yaw for b in boxes], dtype=torch.float64)
    ids = torch.tensor([b.instance_id for b in boxes], dtype=torch.float64)
    return Conditions(
        corners=corners,
        headings=headings,
        instance_ids=ids,
        captions=[list(b.caption_tokens) for b in boxes],
        sketch=rasterize_sketch(scene, sketch_spec),
        text_tokens=list(scene.text_tokens),
    )
