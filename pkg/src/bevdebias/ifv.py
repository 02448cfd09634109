"""Lift a height-free BEV feature grid into an implicit foreground volume.

Each BEV cell's feature column is spread over height by a per-cell sigmoid
gate: values[c, z, x, y] = sigmoid(logits[z, x, y]) * features[c, x, y].
Grids are dense row-major arrays with the axis order (C, Z, X, Y); the X
axis follows ego x and Y follows ego y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import EgoPoint


class DimensionError(ValueError):
    """Grid shapes or ranges are inconsistent."""


def _check_range(name: str, rng, count: int, cell: float) -> tuple[float, float]:
    lo, hi = float(rng[0]), float(rng[1])
    if hi <= lo:
        raise DimensionError(f"{name} range {rng} is empty")
    if abs((hi - lo) / cell - count) > 1e-9:
        raise DimensionError(
            f"{name} span {hi - lo} is not {count} cells of {cell} m"
        )
    return lo, hi


@dataclass(frozen=True)
class BEVGrid:
    """(C, X, Y) feature grid over a square metric window of the ego plane."""

    features: np.ndarray
    x_range: tuple[float, float] = (-50.0, 50.0)
    y_range: tuple[float, float] = (-50.0, 50.0)
    cell_size: float = 100.0 / 128.0

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 3:
            raise DimensionError(f"features must be (C, X, Y), got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("features must be finite")
        _check_range("x", self.x_range, f.shape[1], self.cell_size)
        _check_range("y", self.y_range, f.shape[2], self.cell_size)
        object.__setattr__(self, "features", f)


@dataclass(frozen=True)
class HeightLogits:
    """(Z, X, Y) occupancy logits over a metric height interval."""

    logits: np.ndarray
    z_range: tuple[float, float] = (-1.0, 3.0)

    def __post_init__(self):
        l = np.asarray(self.logits, dtype=np.float64)
        if l.ndim != 3:
            raise DimensionError(f"logits must be (Z, X, Y), got shape {l.shape}")
        if not np.all(np.isfinite(l)):
            raise ValueError("logits must be finite")
        object.__setattr__(self, "logits", l)

    @property
    def z_cell(self) -> float:
        return (self.z_range[1] - self.z_range[0]) / self.logits.shape[0]


@dataclass(frozen=True)
class IFVolume:
    """(C, Z, X, Y) foreground volume with the metric layout of its inputs."""

    values: np.ndarray
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]
    cell_size: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 4:
            raise DimensionError(f"values must be (C, Z, X, Y), got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def z_cell(self) -> float:
        return (self.z_range[1] - self.z_range[0]) / self.values.shape[1]


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Numerically saturating logistic function in double precision."""
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def lift_to_ifv(bev: BEVGrid, h: HeightLogits) -> IFVolume:
    """values[c, z, x, y] = sigmoid(logits[z, x, y]) * features[c, x, y]."""
    if bev.features.shape[1:] != h.logits.shape[1:]:
        raise DimensionError(
            f"BEV grid {bev.features.shape[1:]} and logits {h.logits.shape[1:]} "
            "cover different cell lattices"
        )
    gate = sigmoid(h.logits)
    values = gate[None, :, :, :] * bev.features[:, None, :, :]
    return IFVolume(values, bev.x_range, bev.y_range, h.z_range, bev.cell_size)


def voxel_center(ix: int, iz: int, iy: int, vol: IFVolume) -> EgoPoint:
    """Metric center of voxel (ix, iz, iy) in the ego frame."""
    _, nz, nx, ny = vol.values.shape
    if not (0 <= ix < nx and 0 <= iz < nz and 0 <= iy < ny):
        raise IndexError(f"voxel index ({ix}, {iz}, {iy}) outside ({nx}, {nz}, {ny})")
    return EgoPoint(
        vol.x_range[0] + (ix + 0.5) * vol.cell_size,
        vol.y_range[0] + (iy + 0.5) * vol.cell_size,
        vol.z_range[0] + (iz + 0.5) * vol.z_cell,
    )


def nearest_voxel(p: EgoPoint, vol: IFVolume) -> tuple[int, int, int]:
    """Indices (ix, iz, iy) of the voxel containing ``p``; errors outside."""
    _, nz, nx, ny = vol.values.shape
    ix = int(np.floor((p.x - vol.x_range[0]) / vol.cell_size))
    iy = int(np.floor((p.y - vol.y_range[0]) / vol.cell_size))
    iz = int(np.floor((p.z - vol.z_range[0]) / vol.z_cell))
    if not (0 <= ix < nx and 0 <= iz < nz and 0 <= iy < ny):
        raise IndexError(f"point ({p.x}, {p.y}, {p.z}) outside the volume")
    return ix, iz, iy
