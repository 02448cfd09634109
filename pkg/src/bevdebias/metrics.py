"""Detection matching, average precision, TP errors, and the NDS* aggregate.

Matching is nuScenes-style greedy center-distance matching in the ego BEV
plane; AP uses 101-point interpolated precision averaged over the distance
thresholds {0.5, 1, 2, 4} m (a documented simplification of the official
devkit). The aggregate score is

    NDS* = (3 * mAP + sum over {mATE, mASE, mAOE} of (1 - min(1, mTP))) / 6

which drops the velocity and attribute error terms entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .targets import Box3D

DEFAULT_AP_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)
TP_THRESHOLD = 2.0
N_RECALL_POINTS = 101


@dataclass(frozen=True)
class Detection:
    box: Box3D
    score: float

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be finite in [0, 1], got {self.score}")


@dataclass(frozen=True)
class MetricsReport:
    """mAP, the three TP errors, and their NDS* aggregate."""

    mAP: float
    mATE: float
    mASE: float
    mAOE: float
    nds_star: float
    ap_per_threshold: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mAP": self.mAP,
            "mATE": self.mATE,
            "mASE": self.mASE,
            "mAOE": self.mAOE,
            "nds_star": self.nds_star,
            "ap_per_threshold": {str(k): v for k, v in self.ap_per_threshold.items()},
        }


def bev_distance(a: Box3D, b: Box3D) -> float:
    """Center distance in the ego x-y plane, meters."""
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])


def match_detections(dets: list[Detection], gts: list[Box3D],
                     threshold: float) -> list[tuple[int, int]]:
    """Greedy matching by descending score (ties keep input order).

    Each detection takes the nearest still-unmatched ground truth of its
    class within the BEV distance threshold. Returns (det_index, gt_index)
    pairs.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = [False] * len(gts)
    pairs = []
    for di in order:
        det = dets[di]
        best, best_dist = None, threshold
        for gi, gt in enumerate(gts):
            if taken[gi] or gt.class_id != det.box.class_id:
                continue
            dist = bev_distance(det.box, gt)
            if dist <= best_dist:
                best, best_dist = gi, dist
        if best is not None:
            taken[best] = True
            pairs.append((di, best))
    return pairs


def _pr_interpolated_ap(scores: np.ndarray, is_tp: np.ndarray,
                        n_gt: int) -> float:
    """AP from per-detection TP flags, 101-point interpolated precision."""
    if n_gt == 0 or len(scores) == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(is_tp[order])
    precision = tp / (np.arange(len(scores)) + 1.0)
    recall = tp / n_gt
    recall_points = np.linspace(0.0, 1.0, N_RECALL_POINTS)
    ap = 0.0
    for r in recall_points:
        at_least = precision[recall >= r]
        ap += float(at_least.max()) if len(at_least) else 0.0
    return ap / N_RECALL_POINTS


def average_precision(scene_pairs: list[tuple[list[Detection], list[Box3D]]],
                      thresholds=DEFAULT_AP_THRESHOLDS) -> tuple[float, dict]:
    """mAP over thresholds, pooling detections across scenes.

    Matching runs per scene; the PR curve pools every detection with its
    match flag. Returns (mAP, {threshold: AP}).
    """
    per_threshold = {}
    for thr in thresholds:
        scores, flags = [], []
        n_gt = 0
        for dets, gts in scene_pairs:
            matched = {di for di, _ in match_detections(dets, gts, thr)}
            scores.extend(d.score for d in dets)
            flags.extend(i in matched for i in range(len(dets)))
            n_gt += len(gts)
        per_threshold[float(thr)] = _pr_interpolated_ap(
            np.asarray(scores, dtype=np.float64), np.asarray(flags, dtype=bool), n_gt
        )
    m_ap = float(np.mean(list(per_threshold.values()))) if per_threshold else 0.0
    return m_ap, per_threshold


def _scale_error(a: Box3D, b: Box3D) -> float:
    """1 - IoU of center/yaw-aligned boxes (per-axis min/max volume ratio)."""
    ratio = 1.0
    for sa, sb in zip(a.size, b.size):
        ratio *= min(sa, sb) / max(sa, sb)
    return 1.0 - ratio


def _orientation_error(a: Box3D, b: Box3D) -> float:
    """Absolute yaw difference wrapped to [0, pi], normalized by pi."""
    diff = abs((a.yaw - b.yaw + math.pi) % (2.0 * math.pi) - math.pi)
    return diff / math.pi


def tp_errors(matched_pairs: list[tuple[Detection, Box3D]]) -> tuple[float, float, float]:
    """(mATE, mASE, mAOE) over matched pairs; all 1.0 when nothing matched."""
    if not matched_pairs:
        return 1.0, 1.0, 1.0
    ate = float(np.mean([bev_distance(d.box, g) for d, g in matched_pairs]))
    ase = float(np.mean([_scale_error(d.box, g) for d, g in matched_pairs]))
    aoe = float(np.mean([_orientation_error(d.box, g) for d, g in matched_pairs]))
    return ate, ase, aoe


def nds_star(m_ap: float, m_tps: list[float]) -> float:
    """NDS* aggregate; requires exactly the three TP errors."""
    if not 0.0 <= m_ap <= 1.0:
        raise ValueError(f"mAP must be in [0, 1], got {m_ap}")
    if len(m_tps) != 3:
        raise ValueError(f"expected 3 TP errors (mATE, mASE, mAOE), got {len(m_tps)}")
    return (3.0 * m_ap + sum(1.0 - min(1.0, tp) for tp in m_tps)) / 6.0


def evaluate_detections(scene_pairs: list[tuple[list[Detection], list[Box3D]]],
                        thresholds=DEFAULT_AP_THRESHOLDS,
                        class_id: int | None = None) -> MetricsReport:
    """Full report for per-scene (detections, ground truths) pairs.

    TP errors are computed on matches at the 2 m threshold. ``class_id``
    restricts evaluation to one category (single-class by default: None
    keeps everything).
    """
    if class_id is not None:
        scene_pairs = [
            ([d for d in dets if d.box.class_id == class_id],
             [g for g in gts if g.class_id == class_id])
            for dets, gts in scene_pairs
        ]
    m_ap, per_threshold = average_precision(scene_pairs, thresholds)
    matched = []
    for dets, gts in scene_pairs:
        for di, gi in match_detections(dets, gts, TP_THRESHOLD):
            matched.append((dets[di], gts[gi]))
    ate, ase, aoe = tp_errors(matched)
    return MetricsReport(m_ap, ate, ase, aoe, nds_star(m_ap, [ate, ase, aoe]),
                         per_threshold)
