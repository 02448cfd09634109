"""Command-line surface: simulate, render, bias-analyze, eval, debias-demo, run.

Exit codes: 0 on success, 2 on validation errors (bad arguments, invalid
files, out-of-range configuration), 1 on internal errors. Failures emit a
structured JSON error report on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .bias import BiasDecomposition, bias_coefficients, bias_field
from .config import RunConfig
from .geometry import CameraModel, Intrinsics, rig_from_dict, yaw_only_extrinsics
from .ifv import IFVolume
from .metrics import Detection, evaluate_detections
from .rendering import render_camera
from .simulator import (
    SceneSpec,
    generate_scene,
    rig_preset,
    scene_from_dict,
    scene_to_dict,
    synthesize_bev,
)
from .targets import Box3D
from .tensorio import check_format_version, load_tensor, save_tensor, write_pgm


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON run configuration")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory")
    parser.add_argument("--domain", choices=("source", "target"), default=None)


def _load_config(args) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        cfg = RunConfig()
    cfg = cfg.with_overrides(seed=args.seed, domain=args.domain,
                             preset=getattr(args, "preset", None))
    cfg.validate()
    return cfg


def _parse_triple(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated values, got {text!r}")
    return tuple(parts)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    rig = [cam.scaled(cfg.input_width, cfg.input_height)
           for cam in rig_preset(cfg.preset)]
    seeds = [int(s) for s in np.random.SeedSequence(cfg.seed).generate_state(args.n)]
    for i, seed in enumerate(seeds):
        spec = SceneSpec(seed=seed, n_boxes=cfg.n_boxes, n_classes=cfg.grid.n_classes)
        scene = generate_scene(spec, rig)
        tag = f"scene_{i:03d}"
        (args.out / f"{tag}.json").write_text(
            json.dumps(scene_to_dict(scene), sort_keys=True, indent=1) + "\n")
        bev, heights = synthesize_bev(scene, cfg.grid)
        meta = {"x_range": list(cfg.grid.x_range), "y_range": list(cfg.grid.y_range),
                "cell_size": cfg.grid.cell_size, "z_range": list(cfg.grid.z_range)}
        save_tensor(args.out / f"{tag}_bev", bev.features, meta)
        save_tensor(args.out / f"{tag}_heights", heights.logits, meta)
    print(f"wrote {args.n} scenes to {args.out}")
    return 0


def cmd_render(args) -> int:
    values, meta = load_tensor(args.volume)
    vol = IFVolume(values.astype(np.float64), tuple(meta["x_range"]),
                   tuple(meta["y_range"]), tuple(meta["z_range"]),
                   meta["cell_size"])
    rig_data = json.loads(Path(args.rig).read_text())
    check_format_version(rig_data, args.rig)
    rig = rig_from_dict(rig_data)
    args.out.mkdir(parents=True, exist_ok=True)
    for cam in rig:
        rendered = render_camera(vol, cam, args.width, args.height, args.samples,
                                 args.near, args.far)
        name = cam.name or "view"
        save_tensor(args.out / f"render_{name}", rendered.values,
                    {"camera": name})
        for c in range(rendered.values.shape[0]):
            write_pgm(args.out / f"render_{name}_c{c}.pgm", rendered.values[c])
    print(f"rendered {len(rig)} views to {args.out}")
    return 0


def cmd_bias_analyze(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    bias = BiasDecomposition(args.dl_img, _parse_triple(args.dl_bev))
    coeffs = bias_coefficients(bias, args.theta, args.f, args.depth)
    intr = Intrinsics(args.f, args.f, args.width / 2.0, args.height / 2.0,
                      args.width, args.height)
    cam = CameraModel(intr, yaw_only_extrinsics(args.theta, np.zeros(3)), "bias")
    du, dv = bias_field(bias, cam, args.depth, args.stride)
    field = np.stack([du, dv])
    field_path = save_tensor(args.out / "bias_field", field,
                             {"stride": args.stride, "depth": args.depth})
    write_pgm(args.out / "bias_field.pgm", np.abs(du) + np.abs(dv))
    report = {
        "format_version": "1.0",
        "coefficients": {"k_u": coeffs.k_u, "b_u": coeffs.b_u, "k_v": coeffs.k_v,
                         "b_v": coeffs.b_v, "denom_depth": coeffs.denom_depth},
        "max_abs_delta_uv": float(np.max(np.abs(du)) + np.max(np.abs(dv))),
        "field": field_path.name,
    }
    (args.out / "bias_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=1) + "\n")
    print(json.dumps(report["coefficients"], sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    det_data = json.loads(Path(args.detections).read_text())
    check_format_version(det_data, args.detections)
    dets = [
        Detection(Box3D(tuple(d["center"]), tuple(d["size"]), d["yaw"], d["class"]),
                  d["score"])
        for d in det_data["detections"]
    ]
    scene_data = json.loads(Path(args.scene).read_text())
    check_format_version(scene_data, args.scene)
    scene = scene_from_dict(scene_data)
    thresholds = tuple(float(t) for t in args.thresholds.split(","))
    class_id = None if args.class_id == "all" else int(args.class_id)
    report = evaluate_detections([(dets, scene.boxes)], thresholds, class_id)
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "metrics.json"
    out_path.write_text(json.dumps({"format_version": "1.0", **report.to_dict()},
                                   sort_keys=True, indent=1) + "\n")
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def cmd_debias_demo(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    reports = {}
    for domain in ("source", "target"):
        dcfg = cfg.with_overrides(domain=domain)
        report = pipeline.evaluate_run_losses(dcfg)
        reports[domain] = report.to_dict()
    payload = {"format_version": "1.0", **reports}
    (args.out / "debias_demo.json").write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    manifest = pipeline.run_pipeline(cfg, args.out)
    print(f"run complete: {len(manifest['artifacts'])} artifacts in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevdebias",
        description="Perspective-debiasing geometry toolkit with a synthetic "
                    "multi-camera scene simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic scenes")
    _common_flags(p)
    p.add_argument("--preset", default=None,
                   choices=("nuscenes", "lyft", "deepaccident"))
    p.add_argument("--n", type=int, default=1, help="number of scenes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="render a volume through a camera rig")
    _common_flags(p)
    p.add_argument("--volume", type=Path, required=True,
                   help="volume tensor header (.json)")
    p.add_argument("--rig", type=Path, required=True, help="rig JSON")
    p.add_argument("--width", type=int, default=88)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--near", type=float, default=1.0)
    p.add_argument("--far", type=float, default=61.2)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bias-analyze",
                       help="closed-form pixel-shift field for a bias setting")
    _common_flags(p)
    p.add_argument("--f", type=float, default=1260.0, help="focal length, px")
    p.add_argument("--theta", type=float, default=0.0, help="view yaw, rad")
    p.add_argument("--depth", type=float, default=20.0, help="true depth, m")
    p.add_argument("--dl-img", type=float, default=0.0, dest="dl_img")
    p.add_argument("--dl-bev", default="0,0,0", dest="dl_bev",
                   help="BEV shift x,y,z in meters")
    p.add_argument("--width", type=int, default=704)
    p.add_argument("--height", type=int, default=384)
    p.add_argument("--stride", type=int, default=8)
    p.set_defaults(func=cmd_bias_analyze)

    p = sub.add_parser("eval", help="score detections against a scene")
    _common_flags(p)
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--scene", type=Path, required=True)
    p.add_argument("--class", dest="class_id", default="0",
                   help="class id to evaluate, or 'all'")
    p.add_argument("--thresholds", default="0.5,1,2,4",
                   help="matching thresholds in meters, comma separated")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("debias-demo",
                       help="source- and target-mode loss evaluation")
    _common_flags(p)
    p.add_argument("--preset", default=None,
                   choices=("nuscenes", "lyft", "deepaccident"))
    p.set_defaults(func=cmd_debias_demo)

    p = sub.add_parser("run", help="full pipeline with manifest")
    _common_flags(p)
    p.add_argument("--preset", default=None,
                   choices=("nuscenes", "lyft", "deepaccident"))
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        report = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(report), file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        report = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(report), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
