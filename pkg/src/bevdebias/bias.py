"""Closed-form perspective-bias model plus a brute-force re-projection oracle.

A detector whose image branch misjudges depth by ``dl_img`` meters and whose
BEV branch shifts locations by the ego-frame vector ``dl_bev`` reports a 3D
location that, re-projected into the view, lands at a shifted pixel. For a
planar (yaw-only) camera with square pixels the shift has the closed form

    du = (k_u * (u - c_u) + b_u) / d(u, v)
    dv = (k_v * (v - c_v) + b_v) / d(u, v)

    k_u = k_v = dl_x * tan(theta) - dl_z
    b_u = dl_x * f + dl_z * f * tan(theta)
    b_v = dl_y * f * sec(theta)
    d(u, v) = (d_gt + dl_img) * sec(theta) + dl_z - dl_x * tan(theta)

``oracle_bias`` performs the underlying project / re-lift / shift /
re-project steps numerically for any camera and is the ground truth the
closed form is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, EgoPoint, PixelPoint, project, unproject

COS_TOL = 1e-9
DENOM_TOL = 1e-9
YAW_ONLY_TOL = 1e-9


class SingularViewError(ValueError):
    """View angle too close to +-pi/2 for the planar closed form."""


class DegenerateBiasError(ValueError):
    """Effective predicted depth d(u,v) vanishes for this configuration."""


class BiasDomainError(ValueError):
    """Camera outside the closed form's validity domain (yaw-only, square pixels)."""


@dataclass(frozen=True)
class BiasDecomposition:
    """Location bias split into an image-branch depth error and a BEV shift.

    dl_img is a scalar depth error in meters (the image branch predicts
    d_gt + dl_img); dl_bev is the (x, y, z) ego-frame shift added by the BEV
    branch, in meters.
    """

    dl_img: float
    dl_bev: tuple[float, float, float]

    def __post_init__(self):
        vals = (self.dl_img, *self.dl_bev)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("bias components must be finite")

    @classmethod
    def zero(cls) -> "BiasDecomposition":
        return cls(0.0, (0.0, 0.0, 0.0))


@dataclass(frozen=True)
class BiasCoefficients:
    """Pixel-shift coefficients of the closed form, plus the depth denominator."""

    k_u: float
    b_u: float
    k_v: float
    b_v: float
    denom_depth: float


def bias_coefficients(bias: BiasDecomposition, theta: float, f: float,
                      d_gt: float) -> BiasCoefficients:
    """Closed-form coefficients for a yaw-only, square-pixel view.

    theta is the planar view angle, f the (common) focal length in pixels,
    d_gt the true depth of the point in meters.
    """
    if f <= 0:
        raise ValueError(f"focal length must be positive, got {f}")
    c = math.cos(theta)
    if abs(c) <= COS_TOL:
        raise SingularViewError(f"|cos(theta)| = {abs(c)} at theta = {theta}")
    tan_t = math.tan(theta)
    sec_t = 1.0 / c
    lx, ly, lz = bias.dl_bev
    k_u = lx * tan_t - lz
    b_u = lx * f + lz * f * tan_t
    b_v = ly * f * sec_t
    denom = (d_gt + bias.dl_img) * sec_t + lz - lx * tan_t
    if abs(denom) <= DENOM_TOL:
        raise DegenerateBiasError(f"effective depth {denom} vanishes")
    return BiasCoefficients(k_u, b_u, k_u, b_v, denom)


def analytic_bias(coeffs: BiasCoefficients, u, v, c_u: float, c_v: float):
    """Pixel shift (du, dv) at image location (u, v); broadcasts over arrays."""
    du = (coeffs.k_u * (np.asarray(u) - c_u) + coeffs.b_u) / coeffs.denom_depth
    dv = (coeffs.k_v * (np.asarray(v) - c_v) + coeffs.b_v) / coeffs.denom_depth
    return du, dv


def oracle_bias(p_gt: EgoPoint, bias: BiasDecomposition,
                cam: CameraModel) -> tuple[float, float]:
    """Numerical ground truth for the pixel shift, valid for any camera.

    Steps: project the true point, unproject the same pixel at the biased
    depth, add the BEV shift in the ego frame, re-project, and return the
    pixel delta. Degenerate intermediate projections propagate as errors.
    """
    pix = project(p_gt, cam)
    lifted = unproject(PixelPoint(pix.u, pix.v, pix.d + bias.dl_img), cam)
    lx, ly, lz = bias.dl_bev
    shifted = EgoPoint(lifted.x + lx, lifted.y + ly, lifted.z + lz)
    pix2 = project(shifted, cam)
    return pix2.u - pix.u, pix2.v - pix.v


def yaw_of_extrinsics(cam: CameraModel) -> float:
    """Planar view angle of a yaw-only camera; rejects anything else.

    Also rejects non-square pixels, enforcing the closed form's validity
    domain instead of silently assuming it.
    """
    k = cam.intrinsics
    if abs(k.fu - k.fv) > YAW_ONLY_TOL * max(k.fu, k.fv):
        raise BiasDomainError(f"square pixels required, got fu={k.fu}, fv={k.fv}")
    r = cam.extrinsics.rotation
    theta = math.atan2(r[0, 2], r[0, 0])
    c, s = math.cos(theta), math.sin(theta)
    expected = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if np.max(np.abs(r - expected)) > YAW_ONLY_TOL:
        raise BiasDomainError("extrinsics are not of the yaw-only planar form")
    return theta


def coefficients_for_camera(bias: BiasDecomposition, cam: CameraModel,
                            d_gt: float) -> BiasCoefficients:
    """Closed-form coefficients with the validity domain checked on the camera."""
    theta = yaw_of_extrinsics(cam)
    return bias_coefficients(bias, theta, cam.intrinsics.fu, d_gt)


def bias_field(bias: BiasDecomposition, cam: CameraModel, d_gt: float,
               stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (du, dv) evaluated on the image pixel lattice.

    Returns two (W, H) arrays sampled at pixel centers every ``stride``
    pixels. Requires a yaw-only, square-pixel camera.
    """
    coeffs = coefficients_for_camera(bias, cam, d_gt)
    k = cam.intrinsics
    us = (np.arange(k.width // stride) + 0.5) * stride
    vs = (np.arange(k.height // stride) + 0.5) * stride
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    return analytic_bias(coeffs, uu, vv, k.cu, k.cv)
