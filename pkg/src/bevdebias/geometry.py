"""Pinhole camera models, rigid transforms, and project/unproject primitives.

Coordinate conventions (fixed, used everywhere in this package):

  Ego frame     x forward, y left, z up. Boxes, BEV grids and volumes live here.
  Camera frame  x right (image u), y down (image v), z forward (optical axis).
  Image frame   u right, v down, origin at the top-left corner, units pixels.

An ``Extrinsics`` maps ego points into the camera frame:

  p_cam = rotation @ p_ego + translation

``yaw_only_extrinsics`` builds the planar single-angle form in which the
vertical axis is the second coordinate and the rotation mixes the first and
third; this is the validity domain of the analytic bias model (see bias.py).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-9
DEGENERATE_DEPTH = 1e-9


class DegenerateProjectionError(ValueError):
    """Point lies (numerically) in the camera's principal plane."""


class InvalidDepthError(ValueError):
    """Unprojection requested at a non-positive depth."""


def _as_readonly(a, shape):
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(shape))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics. Focal lengths and principal point in pixels."""

    fu: float
    fv: float
    cu: float
    cv: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fu > 0 and self.fv > 0):
            raise ValueError(f"focal lengths must be positive, got ({self.fu}, {self.fv})")
        if not (0 < self.cu < self.width and 0 < self.cv < self.height):
            raise ValueError(
                f"principal point ({self.cu}, {self.cv}) outside image "
                f"{self.width}x{self.height}"
            )

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fu, 0.0, self.cu], [0.0, self.fv, self.cv], [0.0, 0.0, 1.0]]
        )

    def scaled(self, width: int, height: int) -> "Intrinsics":
        """Intrinsics after resampling the image to ``width`` x ``height``."""
        sx = width / self.width
        sy = height / self.height
        return Intrinsics(self.fu * sx, self.fv * sy, self.cu * sx, self.cv * sy,
                          width, height)


@dataclass(frozen=True)
class Extrinsics:
    """Rigid ego-to-camera transform: p_cam = rotation @ p_ego + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_readonly(self.rotation, (3, 3)))
        object.__setattr__(self, "translation", _as_readonly(self.translation, (3,)))
        r = self.rotation
        if np.max(np.abs(r @ r.T - np.eye(3))) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map ego points (3,) or (N, 3) into the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def compose(self, other: "Extrinsics") -> "Extrinsics":
        """Transform equivalent to applying ``other`` first, then ``self``."""
        return Extrinsics(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "Extrinsics":
        rt = self.rotation.T
        return Extrinsics(rt, -rt @ self.translation)

    def camera_center(self) -> np.ndarray:
        """Position of the camera's optical center in the ego frame."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class PixelPoint:
    """Image point with depth along the camera optical axis (meters)."""

    u: float
    v: float
    d: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.u, self.v, self.d)):
            raise ValueError("PixelPoint components must be finite")


@dataclass(frozen=True)
class EgoPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError("EgoPoint components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class CameraModel:
    """One view of the rig: intrinsics plus ego-to-camera extrinsics."""

    intrinsics: Intrinsics
    extrinsics: Extrinsics
    name: str = ""

    def scaled(self, width: int, height: int) -> "CameraModel":
        return CameraModel(self.intrinsics.scaled(width, height), self.extrinsics,
                           self.name)


def project(p: EgoPoint, cam: CameraModel) -> PixelPoint:
    """Project an ego point to (u, v, d).

    d is the camera-frame z coordinate and may be negative; callers cull on
    its sign. Raises DegenerateProjectionError when |d| < 1e-9 m.
    """
    xc, yc, zc = cam.extrinsics.apply(p.as_array())
    if abs(zc) < DEGENERATE_DEPTH:
        raise DegenerateProjectionError(f"point depth {zc} below {DEGENERATE_DEPTH}")
    k = cam.intrinsics
    return PixelPoint(k.fu * xc / zc + k.cu, k.fv * yc / zc + k.cv, zc)


def unproject(pix: PixelPoint, cam: CameraModel) -> EgoPoint:
    """Exact inverse of :func:`project` for the same camera; requires d > 0."""
    if pix.d <= 0:
        raise InvalidDepthError(f"depth must be positive, got {pix.d}")
    k = cam.intrinsics
    p_cam = np.array([
        (pix.u - k.cu) * pix.d / k.fu,
        (pix.v - k.cv) * pix.d / k.fv,
        pix.d,
    ])
    x, y, z = cam.extrinsics.inverse().apply(p_cam)
    return EgoPoint(x, y, z)


def project_points(points: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Vectorized projection of (N, 3) ego points to (N, 3) rows (u, v, d).

    No degenerate-depth check; callers mask on the depth column.
    """
    pc = cam.extrinsics.apply(points)
    k = cam.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fu * pc[:, 0] / pc[:, 2] + k.cu
        v = k.fv * pc[:, 1] / pc[:, 2] + k.cv
    return np.column_stack([u, v, pc[:, 2]])


def _rot_about_vertical(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_about_lateral(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_about_optical(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def yaw_only_extrinsics(theta: float, t: np.ndarray) -> Extrinsics:
    """Planar extrinsics: a single rotation about the frame's vertical axis.

    The rotation keeps the second (vertical) coordinate fixed and mixes the
    first and third; ``t`` is the translation column of the ego-to-camera
    map. This is the only extrinsic form accepted by the analytic bias model.
    """
    return Extrinsics(_rot_about_vertical(theta), np.asarray(t, dtype=np.float64))


def euler_pose(yaw: float, pitch: float, roll: float,
               position: np.ndarray) -> Extrinsics:
    """Extrinsics from intrinsic yaw -> pitch -> roll rotations and a camera center.

    Angle axes follow the frame layout of :func:`yaw_only_extrinsics`: yaw
    rotates about the vertical (second) axis, pitch about the lateral (first)
    axis, roll about the optical (third) axis, applied intrinsically in that
    order, so euler_pose(theta, 0, 0, .) has exactly the yaw-only rotation.
    ``position`` is the camera center in the parent frame
    (translation = -R @ position).
    """
    r = _rot_about_vertical(yaw) @ _rot_about_lateral(pitch) @ _rot_about_optical(roll)
    pos = np.asarray(position, dtype=np.float64)
    return Extrinsics(r, -r @ pos)


def rig_to_dict(cameras: list[CameraModel]) -> dict:
    """Serialize a camera rig to the JSON rig schema."""
    return {
        "format_version": "1.0",
        "cameras": [
            {
                "name": cam.name,
                "intrinsics": {
                    "fu": cam.intrinsics.fu,
                    "fv": cam.intrinsics.fv,
                    "cu": cam.intrinsics.cu,
                    "cv": cam.intrinsics.cv,
                    "width": cam.intrinsics.width,
                    "height": cam.intrinsics.height,
                },
                "extrinsics": {
                    "rotation": [float(x) for x in cam.extrinsics.rotation.ravel()],
                    "translation": [float(x) for x in cam.extrinsics.translation],
                },
            }
            for cam in cameras
        ],
    }


def rig_from_dict(data: dict) -> list[CameraModel]:
    cams = []
    for entry in data["cameras"]:
        intr = entry["intrinsics"]
        extr = entry["extrinsics"]
        cams.append(CameraModel(
            Intrinsics(intr["fu"], intr["fv"], intr["cu"], intr["cv"],
                       intr["width"], intr["height"]),
            Extrinsics(np.array(extr["rotation"]).reshape(3, 3),
                       np.array(extr["translation"])),
            entry.get("name", ""),
        ))
    return cams
