"""``gradanom`` command line: synth, gen, eval, loss, bench.

Results go to stdout as JSON, diagnostics to stderr; exit status is 0 or 1.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import mapfile
from .bench import run_bench
from .gamm import MODES, GammConfig, gradient_anomaly_maps
from .losses import WEIGHT_MODES, ProbMap, gradient_anomaly_loss, mask_refinement_loss, pixel_ce
from .metrics import InstanceSet, evaluate
from .scene import PRESETS, load_manifest, save_manifest, synth_scene


class CliError(Exception):
    pass


JOINT_MAP = "joint.gam"


def instance_map_name(instance_id: int) -> str:
    return f"instance_{instance_id}.gam"


def _png_bytes(values: np.ndarray, f_ga: float) -> bytes:
    img = np.clip(np.rint(255.0 * values / f_ga), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def _commit(out_dir: Path, files: dict[str, bytes]):
    """Write every file under a temp name first, then rename them all."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, data in files.items():
            tmp = out_dir / f".{name}.tmp"
            tmp.write_bytes(data)
            staged.append((tmp, out_dir / name))
    except OSError:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def cmd_gen(args) -> int:
    scene = load_manifest(args.manifest)
    cfg = GammConfig(ws=args.ws, f_ga=args.fga, mode=args.mode)
    joint, per_instance = gradient_anomaly_maps(scene, cfg)
    files = {JOINT_MAP: mapfile.encode(joint.values, 0)}
    for m in per_instance:
        files[instance_map_name(m.instance_id)] = mapfile.encode(m.values, m.instance_id)
    if args.png:
        files["joint.png"] = _png_bytes(joint.values, cfg.f_ga)
        for m in per_instance:
            files[f"instance_{m.instance_id}.png"] = _png_bytes(m.values, cfg.f_ga)
    _commit(Path(args.out), files)
    return 0


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise CliError(f"size must look like 64x64, got {text!r}") from exc
    return h, w


def cmd_synth(args) -> int:
    if args.preset not in PRESETS:
        raise CliError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
    h, w = _parse_size(args.size)
    save_manifest(synth_scene(args.preset, args.seed, h, w), args.out)
    return 0


def _load_scores(path) -> dict[int, float]:
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read scores file {path}: {exc}") from exc
    return {int(k): float(v) for k, v in raw.items()}


def cmd_eval(args) -> int:
    gt = load_manifest(args.gt)
    pred = load_manifest(args.pred)
    if (gt.height, gt.width) != (pred.height, pred.width):
        raise CliError(f"ground truth is {gt.height}x{gt.width}, prediction is {pred.height}x{pred.width}")
    scores = _load_scores(args.scores)
    report = evaluate(InstanceSet.from_scene(gt), InstanceSet.from_scene(pred, scores))
    print(json.dumps(report.to_dict()))
    return 0


def cmd_loss(args) -> int:
    scene = load_manifest(args.gt)
    cfg = GammConfig(ws=args.ws, f_ga=args.fga, mode=args.mode)
    joint, per_instance = gradient_anomaly_maps(scene, cfg)
    shape = (scene.height, scene.width)

    # compare at the float32 precision of the GAM1 container
    gt_maps = [m.values.astype(np.float32) for m in per_instance]
    pred_maps = []
    for inst in scene.instances:
        arr, _ = mapfile.read_map(Path(args.pred_grad) / instance_map_name(inst.id))
        if arr.shape != shape:
            raise CliError(f"predicted map for instance {inst.id} is {arr.shape}, scene is {shape}")
        pred_maps.append(arr)
    l_ga = gradient_anomaly_loss(gt_maps, pred_maps)

    probs = mapfile.read_prob(args.pred_prob)
    if probs.shape[1:] != shape or probs.shape[0] < 2:
        raise CliError(f"probability planes {probs.shape} do not fit a {shape} scene with K >= 2")
    labels = scene.mask_stack().any(axis=0).astype(np.int64)
    ce = pixel_ce(ProbMap(probs.astype(np.float64)), labels)
    l_mr = mask_refinement_loss(ce, joint.values.astype(np.float32), args.weight_mode)
    print(json.dumps({"l_ga": l_ga, "l_mr": l_mr}))
    return 0


def cmd_bench(args) -> int:
    try:
        ws_list = [int(v) for v in args.ws.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"--ws must be a comma separated list of integers, got {args.ws!r}") from exc
    print(json.dumps(run_bench(args.size, ws_list, args.repeats).to_dict()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradanom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write joint and per-instance anomaly maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ws", type=int, default=5)
    p.add_argument("--fga", type=float, default=0.5)
    p.add_argument("--mode", choices=MODES, default="std")
    p.add_argument("--out", required=True)
    p.add_argument("--png", action="store_true", help="also write 8-bit PNG previews")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("synth", help="write a synthetic scene manifest")
    p.add_argument("--preset", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", default="64x64", help="HxW")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="AJI, Dice, F1 and mAP as JSON")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--scores", required=True, help='JSON object {"<id>": score}')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loss", help="anomaly-map and mask-refinement losses as JSON")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred-grad", required=True, help="directory of instance_<id>.gam maps")
    p.add_argument("--pred-prob", required=True, help="GAM1 file with K class planes")
    p.add_argument("--ws", type=int, default=5)
    p.add_argument("--fga", type=float, default=0.5)
    p.add_argument("--mode", choices=MODES, default="std")
    p.add_argument("--weight-mode", choices=WEIGHT_MODES, default="literal")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("bench", help="time reference vs optimized map generation")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--ws", default="3,5,7,9,12")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"gradanom {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
