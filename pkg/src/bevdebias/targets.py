"""Ground-truth heatmaps, attribute maps and foreground depth targets.

Per-view targets are built from 3D boxes: each visible box splats a
peak-one gaussian into its class channel (merged by pointwise max, the
usual center-heatmap rule), writes its metric size at the center pixel,
and optionally contributes foreground depth over its projected footprint.
All maps are (..., W, H) arrays with W along image u and H along image v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, PixelPoint, project_points

MIN_CENTER_DEPTH = 0.1
RADIUS_FLOOR = 2.0
MIN_OVERLAP = 0.7

DEPTH_MODE_BOX_CENTER = "box-center"
DEPTH_MODE_SURFACE = "surface"


@dataclass(frozen=True)
class Box3D:
    """Upright 3D box in the ego frame; yaw rotates about ego z."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]  # length, width, height, meters
    yaw: float
    class_id: int

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValueError(f"box size must be positive, got {self.size}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be nonnegative, got {self.class_id}")

    def corners(self) -> np.ndarray:
        """(8, 3) corner coordinates in the ego frame."""
        l, w, h = self.size
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                          for sz in (-1, 1)], dtype=np.float64)
        local = signs * (np.array([l, w, h]) / 2.0)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return local @ rot.T + np.asarray(self.center)


@dataclass(frozen=True)
class TargetMaps:
    """Class heatmaps in [0, 1], per-pixel box sizes, and the size mask."""

    heatmaps: np.ndarray  # (N_cls, W, H)
    attributes: np.ndarray  # (3, W, H): length, width, height at centers
    attr_mask: np.ndarray  # (W, H) bool


@dataclass(frozen=True)
class DepthTargets:
    """Per-view foreground depth map (meters) with a validity mask."""

    depth: np.ndarray  # (W, H)
    mask: np.ndarray  # (W, H) bool
    mode: str


def gaussian_radius(box_px: tuple[float, float],
                    min_overlap: float = MIN_OVERLAP) -> float:
    """Splat radius guaranteeing the given IoU overlap, floored at 2 px."""
    w, h = box_px
    if w <= 0 or h <= 0:
        raise ValueError(f"box pixel extent must be positive, got {box_px}")

    a1 = 1.0
    b1 = h + w
    c1 = w * h * (1.0 - min_overlap) / (1.0 + min_overlap)
    r1 = (b1 + math.sqrt(b1 * b1 - 4.0 * a1 * c1)) / 2.0

    a2 = 4.0
    b2 = 2.0 * (h + w)
    c2 = (1.0 - min_overlap) * w * h
    r2 = (b2 + math.sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0

    a3 = 4.0 * min_overlap
    b3 = -2.0 * min_overlap * (h + w)
    c3 = (min_overlap - 1.0) * w * h
    r3 = (b3 + math.sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0
    return max(RADIUS_FLOOR, min(r1, r2, r3))


def _projected_extent_px(box: Box3D, cam: CameraModel,
                         stride: float) -> tuple[float, float] | None:
    """Pixel width/height of the box's projected corner rectangle."""
    pts = project_points(box.corners(), cam)
    ok = pts[:, 2] > 1e-3
    if ok.sum() < 2:
        return None
    u, v = pts[ok, 0] / stride, pts[ok, 1] / stride
    w, h = float(u.max() - u.min()), float(v.max() - v.min())
    if w <= 0 or h <= 0:
        return None
    return w, h


def project_box_center(box: Box3D, cam: CameraModel,
                       stride: float) -> PixelPoint | None:
    """Box center on the stride-reduced image plane, or None when culled.

    Culls centers closer than 0.1 m and centers falling outside the frame
    padded by one gaussian radius (so peaks whose splat could still touch
    the frame survive).
    """
    pts = project_points(np.asarray(box.center)[None, :], cam)[0]
    if pts[2] <= MIN_CENTER_DEPTH:
        return None
    u, v = pts[0] / stride, pts[1] / stride
    w = cam.intrinsics.width / stride
    h = cam.intrinsics.height / stride
    ext = _projected_extent_px(box, cam, stride)
    radius = gaussian_radius(ext) if ext else RADIUS_FLOOR
    if not (-radius <= u < w + radius and -radius <= v < h + radius):
        return None
    return PixelPoint(u, v, pts[2])


def _splat_gaussian(grid: np.ndarray, cu: int, cv: int, radius: int,
                    peak: float = 1.0) -> None:
    """Max-merge an unnormalized gaussian of the given peak into ``grid``."""
    diameter = 2 * radius + 1
    sigma = diameter / 6.0
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    g[g < np.finfo(np.float64).eps * g.max()] = 0.0
    w, h = grid.shape
    left, right = min(cu, radius), min(w - cu, radius + 1)
    top, bottom = min(cv, radius), min(h - cv, radius + 1)
    if left + right <= 0 or top + bottom <= 0:
        return
    window = grid[cu - left:cu + right, cv - top:cv + bottom]
    patch = g[radius - left:radius + right, radius - top:radius + bottom]
    np.maximum(window, peak * patch, out=window)


def build_targets(scene, cam: CameraModel, stride: float, width: int,
                  height: int, n_classes: int | None = None) -> TargetMaps:
    """Heatmap / attribute targets for one view at the given map resolution.

    The attribute maps hold (length, width, height) at each box's center
    pixel only; when two centers collide the nearer box wins, which keeps
    the result independent of box order.
    """
    boxes = scene.boxes if hasattr(scene, "boxes") else scene
    if n_classes is None:
        n_classes = max((b.class_id for b in boxes), default=0) + 1
    heat = np.zeros((n_classes, width, height))
    attrs = np.zeros((3, width, height))
    mask = np.zeros((width, height), dtype=bool)
    attr_depth = np.full((width, height), np.inf)
    for box in boxes:
        center = project_box_center(box, cam, stride)
        if center is None:
            continue
        ext = _projected_extent_px(box, cam, stride)
        radius = int(gaussian_radius(ext)) if ext else int(RADIUS_FLOOR)
        cu, cv = int(center.u), int(center.v)
        if not (0 <= cu < width and 0 <= cv < height):
            # peak off-frame: splat whatever tail reaches in, no attributes
            _splat_gaussian(heat[box.class_id], cu, cv, radius)
            continue
        _splat_gaussian(heat[box.class_id], cu, cv, radius)
        heat[box.class_id, cu, cv] = 1.0
        if center.d < attr_depth[cu, cv]:
            attr_depth[cu, cv] = center.d
            attrs[:, cu, cv] = box.size
            mask[cu, cv] = True
    return TargetMaps(heat, attrs, mask)


def _footprint_rect(box: Box3D, cam: CameraModel, scale_u: float,
                    scale_v: float, width: int,
                    height: int) -> tuple[int, int, int, int] | None:
    """Clipped pixel rectangle spanned by the projected box corners."""
    pts = project_points(box.corners(), cam)
    if np.any(pts[:, 2] <= MIN_CENTER_DEPTH):
        return None
    u = pts[:, 0] * scale_u
    v = pts[:, 1] * scale_v
    u0, u1 = int(np.floor(u.min())), int(np.ceil(u.max()))
    v0, v1 = int(np.floor(v.min())), int(np.ceil(v.max()))
    u0, u1 = max(u0, 0), min(u1, width)
    v0, v1 = max(v0, 0), min(v1, height)
    if u0 >= u1 or v0 >= v1:
        return None
    return u0, u1, v0, v1


def _ray_box_depths(box: Box3D, cam: CameraModel, us: np.ndarray,
                    vs: np.ndarray) -> np.ndarray:
    """Camera-frame z of the first ray/box intersection per pixel (inf = miss).

    Slab test in the box's local frame; ``us``/``vs`` are native image
    coordinates of the pixel centers (same length N).
    """
    k = cam.intrinsics
    dirs_cam = np.stack([(us - k.cu) / k.fu, (vs - k.cv) / k.fv,
                         np.ones_like(us)], axis=-1)
    r_inv = cam.extrinsics.rotation.T
    dirs_ego = dirs_cam @ r_inv.T
    origin = cam.extrinsics.camera_center()

    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    o_local = rot.T @ (origin - np.asarray(box.center))
    d_local = dirs_ego @ rot
    half = np.asarray(box.size) / 2.0

    t0 = np.zeros(len(us))
    t1 = np.full(len(us), np.inf)
    miss = np.zeros(len(us), dtype=bool)
    for axis in range(3):
        d = d_local[:, axis]
        o = o_local[axis]
        parallel = np.abs(d) < 1e-12
        miss |= parallel & (np.abs(o) > half[axis])
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (-half[axis] - o) / d
            tb = (half[axis] - o) / d
        lo = np.minimum(ta, tb)
        hi = np.maximum(ta, tb)
        t0 = np.where(parallel, t0, np.maximum(t0, lo))
        t1 = np.where(parallel, t1, np.minimum(t1, hi))
    hit = ~miss & (t1 >= t0) & (t1 > 0)
    t_entry = np.where(t0 > 0, t0, t1)  # camera inside the box: exit point
    # rays were built with unit camera-frame z, so the parameter is the depth
    return np.where(hit & (t_entry > 0), t_entry, np.inf)


def build_depth_targets(scene, cam: CameraModel, width: int, height: int,
                        mode: str = DEPTH_MODE_BOX_CENTER) -> DepthTargets:
    """Foreground depth for one view at the given map resolution.

    box-center mode writes each box's center depth over its projected
    corner rectangle; surface mode casts the pixel ray and writes the
    nearest box-surface intersection depth. Overlaps keep the nearest
    value; everything else is masked invalid.
    """
    if mode not in (DEPTH_MODE_BOX_CENTER, DEPTH_MODE_SURFACE):
        raise ValueError(f"unknown depth mode {mode!r}")
    boxes = scene.boxes if hasattr(scene, "boxes") else scene
    k = cam.intrinsics
    scale_u = width / k.width
    scale_v = height / k.height
    depth = np.full((width, height), np.inf)
    for box in boxes:
        rect = _footprint_rect(box, cam, scale_u, scale_v, width, height)
        if rect is None:
            continue
        u0, u1, v0, v1 = rect
        if mode == DEPTH_MODE_BOX_CENTER:
            d = project_points(np.asarray(box.center)[None, :], cam)[0, 2]
            if d > MIN_CENTER_DEPTH:
                window = depth[u0:u1, v0:v1]
                np.minimum(window, d, out=window)
        else:
            ws, vs_idx = np.meshgrid(np.arange(u0, u1), np.arange(v0, v1),
                                     indexing="ij")
            us = (ws.ravel() + 0.5) / scale_u
            vs = (vs_idx.ravel() + 0.5) / scale_v
            d = _ray_box_depths(box, cam, us, vs).reshape(u1 - u0, v1 - v0)
            window = depth[u0:u1, v0:v1]
            np.minimum(window, d, out=window)
    mask = np.isfinite(depth)
    return DepthTargets(np.where(mask, depth, 0.0), mask, mode)
