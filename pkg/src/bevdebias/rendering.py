"""Multi-view semantic rendering: perturbed poses, ray bundles, volume sums.

Rays are cast through render-pixel centers, sampled at equally spaced
depths, and the volume is trilinearly interpolated at each sample; the
per-pixel output is the plain sum over samples (no compositing, no
normalization), which keeps rendering exactly linear in the volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraModel,
    Extrinsics,
    _rot_about_lateral,
    _rot_about_optical,
    _rot_about_vertical,
)
from .ifv import IFVolume

DEFAULT_ANGLE_RANGES = (0.2, 0.04, 0.04)  # yaw, pitch, roll, radians
DEFAULT_POSITION_RANGES = (0.5, 0.5, 0.25)  # meters


@dataclass(frozen=True)
class PosePerturbation:
    """Half-widths of the uniform perturbation applied to a camera pose.

    d_pos holds (dx, dy, dz) in meters, d_ang holds (yaw, pitch, roll)
    in radians; every range must be nonnegative.
    """

    d_pos: tuple[float, float, float] = DEFAULT_POSITION_RANGES
    d_ang: tuple[float, float, float] = DEFAULT_ANGLE_RANGES

    def __post_init__(self):
        if any(r < 0 for r in (*self.d_pos, *self.d_ang)):
            raise ValueError("perturbation ranges must be nonnegative")


@dataclass(frozen=True)
class RayBundle:
    """Per-pixel ray origins and unit directions in the ego frame."""

    origins: np.ndarray  # (W, H, 3)
    directions: np.ndarray  # (W, H, 3), unit norm
    n: int
    step: float
    near: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample count must be >= 1")
        norms = np.linalg.norm(self.directions, axis=-1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("ray directions must be unit norm")

    def sample_depths(self) -> np.ndarray:
        """Distances along each ray: near + (i + 0.5) * step for i in [0, n)."""
        return self.near + (np.arange(self.n) + 0.5) * self.step


@dataclass(frozen=True)
class RenderedFeatureMap:
    """(C, W, H) ray-summed feature map and the camera that produced it."""

    values: np.ndarray
    camera: CameraModel | None


def perturb_pose(cam: CameraModel, pert: PosePerturbation,
                 rng: np.random.Generator) -> CameraModel:
    """Randomly displace a camera within the perturbation ranges.

    Draws six uniforms in the fixed order (dx, dy, dz, dyaw, dpitch, droll).
    The position offset is applied to the camera center in the ego frame;
    the angular offsets rotate the camera about its own (vertical, lateral,
    optical) axes. Intrinsics are unchanged.
    """
    dx, dy, dz = (rng.uniform(-r, r) for r in pert.d_pos)
    dyaw, dpitch, droll = (rng.uniform(-r, r) for r in pert.d_ang)
    if not any((dx, dy, dz, dyaw, dpitch, droll)):
        return cam
    delta_r = (_rot_about_vertical(dyaw) @ _rot_about_lateral(dpitch)
               @ _rot_about_optical(droll))
    rotation = delta_r @ cam.extrinsics.rotation
    center = cam.extrinsics.camera_center() + np.array([dx, dy, dz])
    return CameraModel(cam.intrinsics, Extrinsics(rotation, -rotation @ center),
                       cam.name)


def make_rays(cam: CameraModel, width: int, height: int, n: int,
              near: float, far: float) -> RayBundle:
    """Ray bundle for a width x height render target.

    Render pixel (w, h) maps to the image point at its center, scaled from
    the camera's native resolution; samples are equally spaced on
    [near, far] along each (unit) ray direction.
    """
    if width < 1 or height < 1 or n < 1:
        raise ValueError("width, height and sample count must be >= 1")
    if not (0 < near < far):
        raise ValueError(f"need 0 < near < far, got ({near}, {far})")
    k = cam.intrinsics
    us = (np.arange(width) + 0.5) * (k.width / width)
    vs = (np.arange(height) + 0.5) * (k.height / height)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    dirs_cam = np.stack(
        [(uu - k.cu) / k.fu, (vv - k.cv) / k.fv, np.ones_like(uu)], axis=-1
    )
    dirs_ego = dirs_cam @ cam.extrinsics.rotation  # == dirs_cam @ R^-T per row
    dirs_ego /= np.linalg.norm(dirs_ego, axis=-1, keepdims=True)
    origin = cam.extrinsics.camera_center()
    origins = np.broadcast_to(origin, dirs_ego.shape).copy()
    return RayBundle(origins, dirs_ego, n, (far - near) / n, near)


def sample_volume(vol: IFVolume, points: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of the volume at ego points (..., 3).

    Values live on voxel centers; beyond the outer centers the field decays
    to exactly zero within one cell (zero padding), so samples outside the
    volume contribute nothing. Returns (C, ...).
    """
    c, nz, nx, ny = vol.values.shape
    p = np.asarray(points, dtype=np.float64)
    lead = p.shape[:-1]
    flat = p.reshape(-1, 3)
    gx = (flat[:, 0] - vol.x_range[0]) / vol.cell_size - 0.5
    gy = (flat[:, 1] - vol.y_range[0]) / vol.cell_size - 0.5
    gz = (flat[:, 2] - vol.z_range[0]) / vol.z_cell - 0.5
    i0 = np.floor(gx).astype(np.int64)
    j0 = np.floor(gy).astype(np.int64)
    k0 = np.floor(gz).astype(np.int64)
    fx, fy, fz = gx - i0, gy - j0, gz - k0
    values_flat = vol.values.reshape(c, -1)
    out = np.zeros((c, flat.shape[0]))
    for di, wx in ((0, 1.0 - fx), (1, fx)):
        ii = i0 + di
        okx = (ii >= 0) & (ii < nx)
        for dj, wy in ((0, 1.0 - fy), (1, fy)):
            jj = j0 + dj
            okxy = okx & (jj >= 0) & (jj < ny)
            wxy = wx * wy
            for dk, wz in ((0, 1.0 - fz), (1, fz)):
                kk = k0 + dk
                ok = okxy & (kk >= 0) & (kk < nz)
                if not np.any(ok):
                    continue
                w = wxy * wz
                w *= ok
                idx = (kk * nx + ii) * ny + jj
                np.clip(idx, 0, values_flat.shape[1] - 1, out=idx)
                out += w[None, :] * values_flat[:, idx]
    return out.reshape((c, *lead))


def render_view(vol: IFVolume, rays: RayBundle) -> RenderedFeatureMap:
    """Sum the interpolated volume over each ray's samples (exactly linear)."""
    depths = rays.sample_depths()
    points = (rays.origins[:, :, None, :]
              + rays.directions[:, :, None, :] * depths[None, None, :, None])
    sampled = sample_volume(vol, points)  # (C, W, H, n)
    values = sampled.sum(axis=-1)
    return RenderedFeatureMap(values, None)


def render_camera(vol: IFVolume, cam: CameraModel, width: int, height: int,
                  n: int, near: float, far: float) -> RenderedFeatureMap:
    """Convenience: build rays for ``cam`` and render, keeping the camera."""
    rays = make_rays(cam, width, height, n, near, far)
    rendered = render_view(vol, rays)
    return RenderedFeatureMap(rendered.values, cam)
