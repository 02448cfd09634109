"""Full pipeline runs: simulate, lift, render, supervise, score, manifest.

A run simulates scenes, builds the (possibly bias-injected) foreground
volume, renders every view, evaluates the domain-appropriate losses and
detection metrics, and writes every artifact plus a manifest with content
hashes. Source runs perturb the render cameras and exercise the render /
depth / 2D-pretraining losses; target runs render with the original
cameras and exercise only the 2D-consistency loss. Runs are byte-for-byte
reproducible from (config, seed).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .bias import BiasDecomposition
from .config import RunConfig
from .geometry import CameraModel
from .ifv import IFVolume, lift_to_ifv
from .losses import (
    LossWeights,
    bce_depth,
    consistency_loss,
    depth_to_bins,
    focal_loss,
    l1_masked,
    total_loss,
)
from .metrics import evaluate_detections
from .rendering import perturb_pose, render_camera
from .simulator import (
    SceneAnnotation,
    SceneSpec,
    generate_scene,
    inject_bias,
    rig_preset,
    scene_to_dict,
    synthesize_bev,
    synthesize_pseudo_2d,
)
from .targets import Box3D, build_depth_targets, build_targets
from .tensorio import FORMAT_VERSION, save_tensor, write_pgm

RNG_ALGORITHM = "numpy-PCG64"


def emit_heatmap_image(grid: np.ndarray, path) -> Path:
    """Write a heatmap grid as an 8-bit PGM preview (max in a sidecar JSON)."""
    return write_pgm(path, grid)


def heatmap_from_rendered(values: np.ndarray) -> np.ndarray:
    """Clamp ray sums into [0, 1] so rendered maps act as heatmaps."""
    return np.clip(values, 0.0, 1.0)


def _scene_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _view_rng(seed: int, scene_idx: int, view_idx: int, stream: int):
    """Independent, replayable stream per (scene, view, purpose)."""
    return np.random.default_rng([seed, scene_idx, view_idx, stream])


def _scaled_rig(cfg: RunConfig) -> list[CameraModel]:
    return [cam.scaled(cfg.input_width, cfg.input_height)
            for cam in rig_preset(cfg.preset)]


def run_scene_losses(cfg: RunConfig, scene: SceneAnnotation,
                     biased_boxes: list[Box3D], vol: IFVolume, scene_idx: int,
                     collect=None) -> dict:
    """Per-scene loss terms, averaged over views, for the configured domain.

    In source mode the render loss compares maps rendered through perturbed
    cameras against targets built with those same cameras; the biased boxes
    stand in for the model's own heads on the attribute and depth branches.
    ``collect(view_name, rendered_heatmap, camera)`` receives each view's
    rendered class heatmap when provided.
    """
    rc = cfg.render
    parts = {"render": [], "pg": [], "ps": [], "con": []}
    for vi, cam in enumerate(scene.rig):
        if cfg.domain == "source":
            rng = _view_rng(cfg.seed, scene_idx, vi, 0)
            cam_r = perturb_pose(cam, cfg.perturb, rng)
            rendered = render_camera(vol, cam_r, rc.width, rc.height, rc.samples,
                                     rc.near, rc.far)
            h_render = heatmap_from_rendered(rendered.values)
            gt = build_targets(scene.boxes, cam_r, rc.stride, rc.width, rc.height,
                               scene.n_classes)
            pred = build_targets(biased_boxes, cam_r, rc.stride, rc.width,
                                 rc.height, scene.n_classes)
            focal_part, _ = focal_loss(h_render, gt.heatmaps)
            l1_part, _ = l1_masked(pred.attributes, gt.attributes, gt.attr_mask)
            parts["render"].append(focal_part + l1_part)

            dt_gt = build_depth_targets(scene.boxes, cam, rc.width, rc.height,
                                        cfg.loss.depth_mode)
            dt_pred = build_depth_targets(biased_boxes, cam, rc.width, rc.height,
                                          cfg.loss.depth_mode)
            target_bins = depth_to_bins(dt_gt.depth, dt_gt.mask, cam.intrinsics,
                                        cfg.loss.u_const, cfg.loss.depth_bins,
                                        rc.near, rc.far)
            pred_bins = depth_to_bins(dt_pred.depth, dt_pred.mask, cam.intrinsics,
                                      cfg.loss.u_const, cfg.loss.depth_bins,
                                      rc.near, rc.far)
            # pixels the "model" missed get a flat distribution
            missing = dt_gt.mask & ~dt_pred.mask
            pred_bins[:, missing] = 1.0 / cfg.loss.depth_bins
            pg_part, _ = bce_depth(pred_bins, target_bins, dt_gt.mask)
            parts["pg"].append(pg_part)

            noise_rng = _view_rng(cfg.seed, scene_idx, vi, 1)
            pseudo = synthesize_pseudo_2d(scene, cam, rc.stride, rc.width,
                                          rc.height, cfg.noise.sigma,
                                          cfg.noise.fn_rate, cfg.noise.fp_rate,
                                          noise_rng)
            ps_part, _ = focal_loss(pseudo, gt_heatmap_original(scene, cam, rc))
            parts["ps"].append(ps_part)
            parts["con"].append(0.0)
        else:
            rendered = render_camera(vol, cam, rc.width, rc.height, rc.samples,
                                     rc.near, rc.far)
            h_render = heatmap_from_rendered(rendered.values)
            noise_rng = _view_rng(cfg.seed, scene_idx, vi, 1)
            pseudo = synthesize_pseudo_2d(scene, cam, rc.stride, rc.width,
                                          rc.height, cfg.noise.sigma,
                                          cfg.noise.fn_rate, cfg.noise.fp_rate,
                                          noise_rng)
            con_part, _ = consistency_loss(h_render, pseudo, cfg.loss.tau)
            parts["con"].append(con_part)
            for key in ("render", "pg", "ps"):
                parts[key].append(0.0)
        if collect is not None:
            collect(cam.name, h_render, rendered.camera)
    return {k: float(np.mean(v)) for k, v in parts.items()}


def gt_heatmap_original(scene: SceneAnnotation, cam: CameraModel,
                        rc) -> np.ndarray:
    return build_targets(scene.boxes, cam, rc.stride, rc.width, rc.height,
                         scene.n_classes).heatmaps


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _add_tensor(artifacts: list, path, values: np.ndarray, meta: dict) -> None:
    header = save_tensor(path, values, meta)
    artifacts.append(("tensor", header))
    artifacts.append(("tensor", header.with_suffix(".bin")))


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")


def _iter_scene_runs(cfg: RunConfig):
    """Yield (index, scene, detections, bev, heights, volume) per scene."""
    rig = _scaled_rig(cfg)
    bias = BiasDecomposition(cfg.bias.dl_img, tuple(cfg.bias.dl_bev))
    for si, scene_seed in enumerate(_scene_seeds(cfg.seed, cfg.n_scenes)):
        spec = SceneSpec(seed=scene_seed, n_boxes=cfg.n_boxes,
                         n_classes=cfg.grid.n_classes)
        scene = generate_scene(spec, rig)
        detections = inject_bias(scene, bias)
        biased_boxes = [d.box for d in detections]
        bev, heights = synthesize_bev(biased_boxes, cfg.grid)
        yield si, scene, detections, bev, heights, lift_to_ifv(bev, heights)


def evaluate_run_losses(cfg: RunConfig):
    """Mean LossReport over the run's scenes, without writing artifacts."""
    cfg.validate()
    weights = LossWeights.source() if cfg.domain == "source" else LossWeights.target()
    scene_losses = []
    for si, scene, detections, _bev, _heights, vol in _iter_scene_runs(cfg):
        biased_boxes = [d.box for d in detections]
        scene_losses.append(run_scene_losses(cfg, scene, biased_boxes, vol, si))
    mean = {k: float(np.mean([s[k] for s in scene_losses]))
            for k in ("render", "pg", "ps", "con")}
    return total_loss(mean["render"], mean["pg"], mean["ps"], mean["con"], weights)


def run_pipeline(cfg: RunConfig, out_dir) -> dict:
    """Execute a full run into ``out_dir``; returns the manifest dict."""
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    weights = LossWeights.source() if cfg.domain == "source" else LossWeights.target()

    artifacts: list[tuple[str, Path]] = []
    scene_losses = []
    eval_pairs = []
    for si, scene, detections, bev, heights, vol in _iter_scene_runs(cfg):
        biased_boxes = [d.box for d in detections]
        tag = f"scene_{si:03d}"
        scene_path = out / f"{tag}.json"
        _write_json(scene_path, scene_to_dict(scene))
        artifacts.append(("scene", scene_path))
        meta = {"x_range": list(cfg.grid.x_range), "y_range": list(cfg.grid.y_range),
                "cell_size": cfg.grid.cell_size}
        _add_tensor(artifacts, out / f"{tag}_bev", bev.features, meta)
        _add_tensor(artifacts, out / f"{tag}_heights", heights.logits,
                    {**meta, "z_range": list(cfg.grid.z_range)})

        renders: list[tuple[str, np.ndarray]] = []
        losses = run_scene_losses(
            cfg, scene, biased_boxes, vol, si,
            collect=lambda name, heat, _cam: renders.append((name, heat)),
        )
        scene_losses.append(losses)
        for name, heat in renders:
            _add_tensor(artifacts, out / f"{tag}_{name}_render", heat,
                        {"camera": name})
            pgm = emit_heatmap_image(heat[0], out / f"{tag}_{name}_render.pgm")
            artifacts.append(("image", pgm))
            artifacts.append(("json", Path(str(pgm) + ".json")))
        eval_pairs.append((detections, scene.boxes))

    mean = {k: float(np.mean([s[k] for s in scene_losses]))
            for k in ("render", "pg", "ps", "con")}
    report = total_loss(mean["render"], mean["pg"], mean["ps"], mean["con"],
                        weights)
    loss_path = out / "losses.json"
    _write_json(loss_path, {"format_version": FORMAT_VERSION,
                            "lambda_s": weights.lambda_s,
                            "lambda_t": weights.lambda_t,
                            **report.to_dict()})
    artifacts.append(("report", loss_path))

    metrics = evaluate_detections(eval_pairs)
    metrics_path = out / "metrics.json"
    _write_json(metrics_path, {"format_version": FORMAT_VERSION,
                               **metrics.to_dict()})
    artifacts.append(("report", metrics_path))

    manifest = {
        "format_version": FORMAT_VERSION,
        "rng": RNG_ALGORITHM,
        "domain": cfg.domain,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "losses": report.to_dict(),
        "metrics": metrics.to_dict(),
        "artifacts": sorted(
            ({"kind": kind, "path": p.name, "sha256": _sha256(p)}
             for kind, p in artifacts),
            key=lambda a: a["path"],
        ),
    }
    _write_json(out / "manifest.json", manifest)
    return manifest
