"""Deterministic synthetic multi-camera scenes with controllable domain shift.

Scenes are lists of car-like boxes dropped into the BEV window around a
six-camera surround rig. The simulator also fabricates the tensors a
trained network would produce: idealized one-hot BEV features and height
logits (so lifted volumes directly encode class occupancy), noisy 2D
detector heatmaps, and location-biased copies of the ground truth that
stand in for a detector suffering domain shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bias import BiasDecomposition
from .config import GridConfig
from .geometry import (
    CameraModel,
    EgoPoint,
    Extrinsics,
    Intrinsics,
    PixelPoint,
    project,
    rig_from_dict,
    rig_to_dict,
    unproject,
)
from .ifv import BEVGrid, HeightLogits
from .metrics import Detection
from .targets import (
    Box3D,
    _projected_extent_px,
    _splat_gaussian,
    gaussian_radius,
    project_box_center,
)

MIN_SEPARATION = 1.0  # meters between box centers, keeps matching unambiguous
MAX_REJECTIONS = 10_000
RIG_HEIGHT = 1.6
RIG_RADIUS = 1.0
OCCUPIED_LOGIT = 10.0
FREE_LOGIT = -10.0

# Per-preset camera intrinsics: (width, height, focal). The rear camera is
# the wide-angle one on rigs whose datasets list two focal lengths.
RIG_PRESETS = {
    "nuscenes": {"main": (1600, 900, 1260.0), "rear": (1600, 900, 1260.0)},
    "deepaccident": {"main": (1600, 900, 1142.0), "rear": (1600, 900, 560.0)},
    "lyft": {"main": (1224, 1024, 1109.0), "rear": (1600, 900, 878.0)},
}
CAMERA_YAWS = {
    "cam_front": 0.0,
    "cam_front_left": math.pi / 3,
    "cam_back_left": 2 * math.pi / 3,
    "cam_back": math.pi,
    "cam_back_right": -2 * math.pi / 3,
    "cam_front_right": -math.pi / 3,
}


class OvercrowdedSceneError(ValueError):
    """Placement rejection budget exhausted; loosen the spec."""


@dataclass(frozen=True)
class SceneSpec:
    """Scene generation parameters; fully determines a scene given its seed."""

    seed: int = 0
    n_boxes: tuple[int, int] = (3, 8)
    size_mean: tuple[float, float, float] = (4.6, 1.95, 1.73)
    size_std: tuple[float, float, float] = (0.45, 0.15, 0.15)
    placement: tuple[tuple[float, float], tuple[float, float]] = ((-40.0, 40.0),
                                                                  (-40.0, 40.0))
    bev_range: tuple[tuple[float, float], tuple[float, float]] = ((-50.0, 50.0),
                                                                  (-50.0, 50.0))
    n_classes: int = 1

    def __post_init__(self):
        (px, py), (bx, by) = self.placement, self.bev_range
        if not (bx[0] <= px[0] <= px[1] <= bx[1] and by[0] <= py[0] <= py[1] <= by[1]):
            raise ValueError("placement region must lie inside the BEV range")
        if not 0 <= self.n_boxes[0] <= self.n_boxes[1]:
            raise ValueError(f"invalid box count range {self.n_boxes}")


@dataclass(frozen=True)
class DomainShiftSpec:
    """Target rig preset plus an optional location bias to inject."""

    preset: str = "nuscenes"
    bias: BiasDecomposition | None = None

    def __post_init__(self):
        if self.preset not in RIG_PRESETS and self.preset != "custom":
            raise ValueError(f"unknown rig preset {self.preset!r}")


@dataclass(frozen=True)
class SceneAnnotation:
    """Ground-truth boxes and the camera rig that observes them."""

    boxes: list[Box3D]
    rig: list[CameraModel]
    seed: int
    n_classes: int = 1

    def __post_init__(self):
        for i, a in enumerate(self.boxes):
            for b in self.boxes[i + 1:]:
                d = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
                if d < MIN_SEPARATION:
                    raise ValueError(f"box centers {d:.3f} m apart, need >= 1 m")


def surround_extrinsics(yaw: float, position) -> Extrinsics:
    """Ego-to-camera transform for a level camera looking along ego yaw angle."""
    c, s = math.cos(yaw), math.sin(yaw)
    rotation = np.array([
        [s, -c, 0.0],   # camera x (right)
        [0.0, 0.0, -1.0],  # camera y (down)
        [c, s, 0.0],    # camera z (forward)
    ])
    pos = np.asarray(position, dtype=np.float64)
    return Extrinsics(rotation, -rotation @ pos)


def rig_preset(name: str) -> list[CameraModel]:
    """Six-camera surround rig at 60 degree spacing, 1.6 m height.

    Cameras sit 1 m out from the rig center along their viewing direction,
    with the per-dataset intrinsics of the preset table (rear camera takes
    the wide-angle entry).
    """
    if name not in RIG_PRESETS:
        raise ValueError(f"unknown rig preset {name!r}")
    spec = RIG_PRESETS[name]
    cams = []
    for cam_name, yaw in CAMERA_YAWS.items():
        w, h, f = spec["rear"] if cam_name == "cam_back" else spec["main"]
        intr = Intrinsics(f, f, w / 2.0, h / 2.0, w, h)
        pos = (RIG_RADIUS * math.cos(yaw), RIG_RADIUS * math.sin(yaw), RIG_HEIGHT)
        cams.append(CameraModel(intr, surround_extrinsics(yaw, pos), cam_name))
    return cams


def generate_scene(spec: SceneSpec, rig: str | list[CameraModel] = "nuscenes",
                   ) -> SceneAnnotation:
    """Deterministic scene from the spec's seed; rejection-samples placements."""
    cameras = rig_preset(rig) if isinstance(rig, str) else rig
    rng = np.random.default_rng(spec.seed)
    n = int(rng.integers(spec.n_boxes[0], spec.n_boxes[1] + 1))
    (px, py) = spec.placement
    boxes: list[Box3D] = []
    rejections = 0
    while len(boxes) < n:
        x = rng.uniform(px[0], px[1])
        y = rng.uniform(py[0], py[1])
        yaw = rng.uniform(-math.pi, math.pi)
        size = tuple(
            max(0.5, rng.normal(m, s))
            for m, s in zip(spec.size_mean, spec.size_std)
        )
        class_id = int(rng.integers(0, spec.n_classes))
        if any(math.hypot(x - b.center[0], y - b.center[1]) < MIN_SEPARATION
               for b in boxes):
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise OvercrowdedSceneError(
                    f"placement failed after {MAX_REJECTIONS} rejections"
                )
            continue
        boxes.append(Box3D((x, y, size[2] / 2.0), size, yaw, class_id))
    return SceneAnnotation(boxes, cameras, spec.seed, spec.n_classes)


def synthesize_bev(scene,
                   grid: GridConfig = GridConfig()) -> tuple[BEVGrid, HeightLogits]:
    """Idealized network output: one-hot footprints and hard height gates.

    Channel k is 1.0 at cells whose centers fall under a class-k box
    footprint; height logits are +10 at z cells overlapping the box's
    height span and -10 elsewhere. ``scene`` may be a SceneAnnotation or a
    plain list of boxes.
    """
    boxes = scene.boxes if hasattr(scene, "boxes") else scene
    nx, ny, nz = grid.n_x, grid.n_y, grid.z_cells
    features = np.zeros((grid.n_classes, nx, ny))
    logits = np.full((nz, nx, ny), FREE_LOGIT)
    z_lo = grid.z_range[0]
    z_cell = (grid.z_range[1] - grid.z_range[0]) / nz
    for box in boxes:
        l, w, h = box.size
        bx, by, bz = box.center
        reach = math.hypot(l, w) / 2.0
        ix0 = max(0, int(np.floor((bx - reach - grid.x_range[0]) / grid.cell_size)))
        ix1 = min(nx, int(np.ceil((bx + reach - grid.x_range[0]) / grid.cell_size)) + 1)
        iy0 = max(0, int(np.floor((by - reach - grid.y_range[0]) / grid.cell_size)))
        iy1 = min(ny, int(np.ceil((by + reach - grid.y_range[0]) / grid.cell_size)) + 1)
        if ix0 >= ix1 or iy0 >= iy1:
            continue
        xs = grid.x_range[0] + (np.arange(ix0, ix1) + 0.5) * grid.cell_size - bx
        ys = grid.y_range[0] + (np.arange(iy0, iy1) + 0.5) * grid.cell_size - by
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        du = c * xx + s * yy   # along length
        dv = -s * xx + c * yy  # along width
        inside = (np.abs(du) <= l / 2.0) & (np.abs(dv) <= w / 2.0)
        if not np.any(inside):
            continue
        features[box.class_id, ix0:ix1, iy0:iy1][inside] = 1.0
        z0, z1 = bz - h / 2.0, bz + h / 2.0
        for k in range(nz):
            lo = z_lo + k * z_cell
            hi = lo + z_cell
            if min(z1, hi) - max(z0, lo) > 1e-12:
                logits[k, ix0:ix1, iy0:iy1][inside] = OCCUPIED_LOGIT
    bev = BEVGrid(features, grid.x_range, grid.y_range, grid.cell_size)
    return bev, HeightLogits(logits, grid.z_range)


def synthesize_pseudo_2d(scene: SceneAnnotation, cam: CameraModel, stride: float,
                         width: int, height: int, sigma: float, fn_rate: float,
                         fp_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Simulated 2D-detector heatmap: jittered peaks, dropouts, spurious blobs.

    With sigma = fn_rate = fp_rate = 0 this reproduces the ground-truth
    heatmap of ``build_targets`` exactly.
    """
    heat = np.zeros((scene.n_classes, width, height))
    for box in scene.boxes:
        center = project_box_center(box, cam, stride)
        if center is None:
            continue
        if rng.uniform() < fn_rate:
            continue
        score = float(np.clip(1.0 + sigma * rng.standard_normal(), 0.05, 1.0))
        ext = _projected_extent_px(box, cam, stride)
        radius = int(gaussian_radius(ext)) if ext else 2
        _splat_gaussian(heat[box.class_id], int(center.u), int(center.v), radius,
                        peak=score)
    n_fp = int(rng.poisson(fp_rate))
    for _ in range(n_fp):
        cu = int(rng.integers(0, width))
        cv = int(rng.integers(0, height))
        ch = int(rng.integers(0, scene.n_classes))
        score = float(rng.uniform(0.3, 1.0))
        _splat_gaussian(heat[ch], cu, cv, 2, peak=score)
    return heat


def nearest_camera(point, rig: list[CameraModel]) -> CameraModel:
    p = np.asarray(point, dtype=np.float64)
    return min(rig, key=lambda c: float(np.linalg.norm(
        c.extrinsics.camera_center() - p)))


def inject_bias(scene: SceneAnnotation, bias: BiasDecomposition) -> list[Detection]:
    """Shift ground truth the way a location-biased detector would report it.

    The image-branch depth error moves each center along the viewing ray of
    its nearest camera; the BEV shift is then added in the ego frame.
    """
    detections = []
    for box in scene.boxes:
        cam = nearest_camera(box.center, scene.rig)
        center = EgoPoint(*box.center)
        pix = project(center, cam)
        if pix.d + bias.dl_img > 0 and pix.d > 1e-6:
            lifted = unproject(PixelPoint(pix.u, pix.v, pix.d + bias.dl_img), cam)
        else:
            lifted = center
        lx, ly, lz = bias.dl_bev
        shifted = (lifted.x + lx, lifted.y + ly, lifted.z + lz)
        detections.append(Detection(Box3D(shifted, box.size, box.yaw, box.class_id),
                                    score=1.0))
    return detections


def scene_to_dict(scene: SceneAnnotation) -> dict:
    return {
        "format_version": "1.0",
        "boxes": [
            {"center": list(b.center), "size": list(b.size), "yaw": b.yaw,
             "class": b.class_id}
            for b in scene.boxes
        ],
        "rig": rig_to_dict(scene.rig),
        "seed": scene.seed,
        "n_classes": scene.n_classes,
    }


def scene_from_dict(data: dict) -> SceneAnnotation:
    boxes = [
        Box3D(tuple(b["center"]), tuple(b["size"]), b["yaw"], b["class"])
        for b in data["boxes"]
    ]
    n_classes = data.get("n_classes",
                         max((b.class_id for b in boxes), default=0) + 1)
    return SceneAnnotation(boxes, rig_from_dict(data["rig"]), data.get("seed", 0),
                           n_classes)
