"""Loss family with analytic gradients, plus virtual-depth conversions.

Every loss returns (value, gradient w.r.t. the prediction); gradients are
verified against central finite differences in the test suite. The focal
loss is the penalty-reduced center-heatmap form: pixels where the target
is exactly 1 are positives, everything else is a gaussian-weighted
negative, alpha = 2, beta = 4, normalized by the positive count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics

EPS = 1e-6
FOCAL_ALPHA = 2.0
FOCAL_BETA = 4.0
DEFAULT_TAU = 0.7
DEFAULT_U = 0.01
DEFAULT_DEPTH_BINS = 60


@dataclass(frozen=True)
class LossWeights:
    """Domain switch: (1, 0) for labeled source samples, (0, 1) for target."""

    lambda_s: float
    lambda_t: float

    def __post_init__(self):
        if self.lambda_s not in (0.0, 1.0) or self.lambda_t not in (0.0, 1.0):
            raise ValueError("lambda weights must be 0 or 1")
        if self.lambda_s + self.lambda_t != 1.0:
            raise ValueError("a sample is either source or target")

    @classmethod
    def source(cls) -> "LossWeights":
        return cls(1.0, 0.0)

    @classmethod
    def target(cls) -> "LossWeights":
        return cls(0.0, 1.0)


@dataclass(frozen=True)
class LossReport:
    """Individual loss terms and their domain-weighted total.

    det is a placeholder for the base detector's own loss (always 0 here)
    so the total keeps its full shape:
    total = lambda_s * (det + render + pg + ps) + lambda_t * con.
    """

    render: float
    pg: float
    ps: float
    con: float
    det: float
    total: float

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k))
                for k in ("render", "pg", "ps", "con", "det", "total")}


def _check_shapes(pred: np.ndarray, target: np.ndarray) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")


def focal_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Penalty-reduced focal loss between heatmaps in [0, 1].

    Predictions are clamped to [1e-6, 1 - 1e-6]; the gradient is zero where
    the clamp is active.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    inside = (pred > EPS) & (pred < 1.0 - EPS)
    p = np.clip(pred, EPS, 1.0 - EPS)
    pos = target == 1.0
    n_pos = max(int(pos.sum()), 1)

    log_p = np.log(p)
    log_1p = np.log1p(-p)
    neg_w = (1.0 - target) ** FOCAL_BETA
    pos_terms = -((1.0 - p) ** FOCAL_ALPHA) * log_p
    neg_terms = -neg_w * (p ** FOCAL_ALPHA) * log_1p
    loss = float(np.where(pos, pos_terms, neg_terms).sum() / n_pos)

    grad_pos = (FOCAL_ALPHA * (1.0 - p) * log_p - ((1.0 - p) ** FOCAL_ALPHA) / p)
    grad_neg = -neg_w * (FOCAL_ALPHA * p * log_1p - (p ** FOCAL_ALPHA) / (1.0 - p))
    grad = np.where(pos, grad_pos, grad_neg) / n_pos
    return loss, np.where(inside, grad, 0.0)


def l1_masked(pred: np.ndarray, target: np.ndarray,
              mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error over masked entries; 0 (and zero grad) if empty.

    The subgradient at exact ties is 0.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    m = np.broadcast_to(np.asarray(mask, dtype=bool), pred.shape)
    count = int(m.sum())
    if count == 0:
        return 0.0, np.zeros_like(pred)
    diff = np.where(m, pred - target, 0.0)
    return float(np.abs(diff).sum() / count), np.sign(diff) / count


def bce_depth(pred_bins: np.ndarray, target_bins: np.ndarray,
              valid: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over valid pixels and depth bins.

    Arrays are (D, W, H) with ``valid`` of shape (W, H); predictions are
    clamped to (0, 1) like the focal loss.
    """
    pred_bins = np.asarray(pred_bins, dtype=np.float64)
    target_bins = np.asarray(target_bins, dtype=np.float64)
    _check_shapes(pred_bins, target_bins)
    v = np.asarray(valid, dtype=bool)
    if v.shape != pred_bins.shape[1:]:
        raise ValueError(f"valid mask {v.shape} does not match {pred_bins.shape[1:]}")
    count = int(v.sum()) * pred_bins.shape[0]
    if count == 0:
        return 0.0, np.zeros_like(pred_bins)
    inside = (pred_bins > EPS) & (pred_bins < 1.0 - EPS)
    p = np.clip(pred_bins, EPS, 1.0 - EPS)
    t = target_bins
    terms = -(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    loss = float(np.where(v[None], terms, 0.0).sum() / count)
    grad = np.where(v[None] & inside, (-t / p + (1.0 - t) / (1.0 - p)) / count, 0.0)
    return loss, grad


def virtual_depth_factor(intr: Intrinsics, u_const: float = DEFAULT_U) -> float:
    """Multiplier taking metric depth to focal-normalized virtual depth."""
    if u_const <= 0:
        raise ValueError(f"normalization constant must be positive, got {u_const}")
    return math.sqrt(1.0 / intr.fu ** 2 + 1.0 / intr.fv ** 2) / u_const


def to_virtual_depth(d, intr: Intrinsics, u_const: float = DEFAULT_U):
    """d * sqrt(1/fu^2 + 1/fv^2) / U; broadcasts over arrays."""
    return np.asarray(d) * virtual_depth_factor(intr, u_const)


def to_actual_depth(d_virtual, intr: Intrinsics, u_const: float = DEFAULT_U):
    """Exact inverse of :func:`to_virtual_depth`."""
    return np.asarray(d_virtual) / virtual_depth_factor(intr, u_const)


def depth_to_bins(depth: np.ndarray, valid: np.ndarray, intr: Intrinsics,
                  u_const: float = DEFAULT_U, n_bins: int = DEFAULT_DEPTH_BINS,
                  near: float = 1.0, far: float = 61.2) -> np.ndarray:
    """One-hot (D, W, H) distribution over uniform virtual-depth bins.

    Depths are converted to virtual units first, then binned uniformly over
    the converted [near, far] window; invalid pixels get an all-zero column.
    """
    if n_bins < 1:
        raise ValueError(f"need at least one bin, got {n_bins}")
    v = np.asarray(valid, dtype=bool)
    dv = to_virtual_depth(depth, intr, u_const)
    lo = to_virtual_depth(near, intr, u_const)
    hi = to_virtual_depth(far, intr, u_const)
    idx = np.floor((dv - lo) / (hi - lo) * n_bins).astype(np.int64)
    idx = np.clip(idx, 0, n_bins - 1)
    bins = np.zeros((n_bins, *depth.shape))
    ww, hh = np.nonzero(v)
    bins[idx[ww, hh], ww, hh] = 1.0
    return bins


def sharpen_pseudo(h: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    """Confidence sharpening: entries strictly above tau snap to 1."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    h = np.asarray(h, dtype=np.float64)
    return np.where(h > tau, 1.0, h)


def consistency_loss(h_render: np.ndarray, h_2d: np.ndarray,
                     tau: float = DEFAULT_TAU) -> tuple[float, np.ndarray]:
    """Focal loss of the rendered heatmap against the sharpened 2D pseudo label."""
    return focal_loss(h_render, sharpen_pseudo(h_2d, tau))


def total_loss(render: float, pg: float, ps: float, con: float,
               w: LossWeights, det: float = 0.0) -> LossReport:
    """Domain-weighted sum of the loss terms (con drops out on source samples)."""
    total = w.lambda_s * (det + render + pg + ps) + w.lambda_t * con
    return LossReport(render=float(render), pg=float(pg), ps=float(ps),
                      con=float(con), det=float(det), total=float(total))
