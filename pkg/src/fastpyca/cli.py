"""Command line front end: detect, eval-rotate, bench, scales, warp-model."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import evaluate, warp_model
from .bench import bench_pipeline
from .config import load_config
from .image import build_pyramid, read_pgm
from .pyca import CellConfig, format_keypoints, keypoints_csv, run_pipeline
from .scene import generate_scene


def parse_angles(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("angle step must be positive")
        out, a = [], start
        while a <= stop + 1e-9:
            out.append(round(a, 6))
            a += step
        return out
    return [float(v) for v in text.split(",") if v.strip()]


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="key=value file; command-line flags override it")
    g.add_argument("--scales", type=int)
    g.add_argument("--zeta", type=float)
    g.add_argument("--cell", type=CellConfig.parse, metavar="HxW")
    g.add_argument("--eps", type=int)
    g.add_argument("--pmin", type=int)
    g.add_argument("--pmax", type=int)
    g.add_argument("--q", type=int, help="NMS window side")
    g.add_argument("--classic", action="store_true", default=None,
                   help="classic FAST rule (no upper bound on the run length)")


def _config(args):
    return load_config(args.config, scales=args.scales, zeta=args.zeta, cell=args.cell, eps=args.eps,
                       pmin=args.pmin, pmax=args.pmax, q=args.q, classic=args.classic)


def cmd_detect(args, out) -> int:
    cfg = _config(args)
    img = read_pgm(args.image)
    res = run_pipeline(build_pyramid(img, cfg.zeta, cfg.scales), cfg.detector, cfg.cell, cfg.nms,
                       aggregate_single=cfg.nms_single)
    fmt = keypoints_csv if args.csv else format_keypoints
    out.write(fmt(res.keypoints, cfg.zeta, res.scores))
    return 0


def cmd_eval_rotate(args, out) -> int:
    scenes = evaluate.corpus(args.scenes, seed=args.seed, n_polygons=args.polygons, n_noise=args.noise)
    results = evaluate.corpus_sweep(scenes, args.mode, args.angles)
    out.write(evaluate.sweep_csv(results))
    return 0


def cmd_bench(args, out) -> int:
    cfg = _config(args)
    if args.images:
        images = [read_pgm(p) for p in args.images]
    else:
        h, w = args.size
        # about a dozen shapes at 432x240, fewer on smaller frames
        n_poly = max(2, min(12, h * w // 8000))
        images = [generate_scene(args.seed + i, n_polygons=n_poly, n_noise=n_poly * 2, dims=(h, w)).image
                  for i in range(args.frames)]
    report = bench_pipeline(images, cfg, args.repeats)
    out.write(report.stage_csv())
    if args.frames_csv:
        with open(args.frames_csv, "w", encoding="utf-8") as fh:
            fh.write(report.frames_csv())
    return 0


def cmd_scales(args, out) -> int:
    cfg = _config(args)
    img = read_pgm(args.image) if args.image else generate_scene(
        args.seed, n_polygons=12, n_noise=0, dims=(240, 432)).image
    out.write("scales,raw_fc,final\n")
    for row in evaluate.feature_count_vs_scales(img, cfg, range(1, args.max_scales + 1)):
        out.write(f"{row.scales},{row.raw},{row.final}\n")
    return 0


def cmd_warp_model(args, out) -> int:
    gpu = warp_model.GpuSpec(args.warp_size, args.block_x)
    pairs = warp_model.table_plans(args.table, gpu)
    text, csv_text = warp_model.report([p for p, _ in pairs], [r for _, r in pairs])
    out.write(csv_text if args.csv else text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastpyca", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect keypoints in a PGM image")
    p.add_argument("image")
    p.add_argument("--csv", action="store_true", help="CSV instead of 'level x y response k_r k_l' lines")
    _pipeline_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval-rotate", help="rotation repeatability sweep on synthetic scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--angles", type=parse_angles, default=list(evaluate.SWEEP_ANGLES),
                   help="start:stop:step or comma list (default -175:175:25)")
    p.add_argument("--mode", choices=("bounded", "classic"), default="bounded")
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--polygons", type=int, default=4)
    p.add_argument("--noise", type=int, default=20)
    p.set_defaults(func=cmd_eval_rotate)

    p = sub.add_parser("bench", help="per-stage pipeline timings")
    p.add_argument("images", nargs="*", help="PGM frames; synthetic scenes when omitted")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--size", type=lambda s: tuple(int(v) for v in s.lower().split("x")), default=(240, 432),
                   metavar="HxW")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames-csv", help="also write per-frame feature counts here")
    _pipeline_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scales", help="feature count before/after aggregation vs number of scales")
    p.add_argument("image", nargs="?")
    p.add_argument("--max-scales", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    _pipeline_args(p)
    p.set_defaults(func=cmd_scales)

    p = sub.add_parser("warp-model", help="thread/warp accounting tables")
    p.add_argument("--table", type=int, choices=(1, 2), default=1)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--warp-size", type=int, default=32)
    p.add_argument("--block-x", type=int, default=128)
    p.set_defaults(func=cmd_warp_model)
    return parser


def main(argv=None, out=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out or sys.stdout)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
