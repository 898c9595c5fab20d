"""Command line front end: ``culvert-select {select,align,metrics,synth,bench,sweep}``.

Exit codes: 0 success, 1 unexpected error, 2 usage, 3 input/file errors,
4 config parse errors, 5 geometry/alignment failures, 6 invalid scene or
selection settings.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import bench, sweep
from .config import parse_config
from .errors import CulvertError
from .features import match_descriptors
from .flow import track_points
from .geometry2d import pair_geometry
from .imageio import load_sequence, read_image, to_gray
from .metrics import compare_images
from .selection import STRATEGIES, FeatureCache, select
from .sim3 import align_trajectories, load_poses
from .synth import PRESETS, preset_scene, render_scene, write_scene

log = logging.getLogger("culvert_select")

SELECTION_FLAGS = {
    # flag: (config field, type)
    "--t-flow": ("t_flow", float),
    "--t-baseline": ("t_baseline", float),
    "--alpha": ("alpha", float),
    "--t-angle": ("t_angle", float),
    "--stride": ("frame_stride", int),
    "--seed": ("rng_seed", int),
    "--max-keypoints": ("max_keypoints", int),
    "--fast-threshold": ("fast_threshold", int),
    "--max-distance": ("max_distance", int),
    "--min-tracked": ("min_tracked", int),
    "--beta-mode": ("beta_mode", str),
}


def header(config=None):
    h = {"tool": "culvert-select", "version": __version__}
    if config is not None:
        h["seed"] = config.rng_seed
    return h


def write_json(doc, out):
    text = json.dumps(doc, indent=2) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def add_selection_args(p, with_strategy=True):
    p.add_argument("--frames", required=True, help="directory of ordered frame images")
    p.add_argument("--pattern", default="*.png", help="filename glob (default: *.png)")
    p.add_argument("--config", help="flat key = value config file")
    if with_strategy:
        p.add_argument("--strategy", choices=[s.replace("_", "-") for s in STRATEGIES] + list(STRATEGIES))
    for flag, (dest, typ) in SELECTION_FLAGS.items():
        p.add_argument(flag, dest=dest, type=typ)
    p.add_argument("--beta-normalized", dest="beta_normalized", action="store_true", default=None,
                   help="score with beta / (alpha * T_baseline) instead of raw pixels")
    p.add_argument("--raw-beta", dest="beta_inliers", action="store_false", default=None,
                   help="average baseline over all matches instead of RANSAC inliers")


def selection_config(args, **extra):
    overrides = {dest: getattr(args, dest, None) for dest, _ in SELECTION_FLAGS.values()}
    overrides["beta_normalized"] = args.beta_normalized
    overrides["beta_inliers"] = args.beta_inliers
    if getattr(args, "strategy", None):
        overrides["strategy"] = args.strategy
    overrides.update(extra)
    return parse_config(args.config, overrides)


def dump_debug(seq, result, cache, config, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    frames = sorted({k for s in result.stats for k in (s.i, s.j)})
    for k in frames:
        kps, _ = cache(k)
        (d / f"keypoints_{k:04d}.json").write_text(json.dumps(kps.to_json(k)))
    for s in result.stats:
        _, da = cache(s.i)
        _, db = cache(s.j)
        ms = match_descriptors(da, db, config.max_distance, config.cross_check, s.i, s.j)
        (d / f"matches_{s.i:04d}_{s.j:04d}.json").write_text(json.dumps(ms.to_json()))
    if result.chosen is not None:
        i, j = result.chosen
        ka, da = cache(i)
        kb, db = cache(j)
        ms = match_descriptors(da, db, config.max_distance, config.cross_check, i, j)
        doc = {"pair": [i, j]}
        if len(ms) >= 3:
            try:
                doc["model"] = pair_geometry(ms, ka, kb, config.ransac).model.to_json()
            except CulvertError as exc:
                doc["model_error"] = str(exc)
        doc["flow"] = track_points(seq[i], seq[j], ka.xy, config.lk).to_json()
        (d / "chosen_pair.json").write_text(json.dumps(doc))


def cmd_select(args):
    cfg = selection_config(args)
    seq = load_sequence(args.frames, args.pattern)
    cache = FeatureCache(seq, cfg)
    res = select(seq, cfg, cache, workers=args.workers)
    write_json({**header(cfg), **res.to_json()}, args.out)
    if args.debug_dir:
        dump_debug(seq, res, cache, cfg, args.debug_dir)
    if res.chosen is None:
        log.warning("no pair satisfies the constraints; see 'pairs' for rejection reasons")
    return 0


def cmd_align(args):
    gt = load_poses(args.gt)
    pred = load_poses(args.pred)
    rep = align_trajectories(gt, pred, normalize_gt=not args.no_normalize_gt)
    doc = {**header(), "normalize_gt": not args.no_normalize_gt, **rep.to_json()}
    if args.map:
        doc["mapped_poses"] = [rep.transform.apply_pose(p).to_json() for p in load_poses(args.map)]
    write_json(doc, args.out)
    return 0


def cmd_metrics(args):
    ref = read_image(args.ref)
    test = read_image(args.test)
    if ref.ndim != test.ndim:
        ref, test = to_gray(ref), to_gray(test)
    rep = compare_images(ref, test, (str(args.ref), str(args.test)))
    write_json({**header(), **rep.to_json()}, args.out)
    return 0


def parse_size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def cmd_synth(args):
    extra = {}
    if args.falloff is not None:
        extra["light_falloff"] = args.falloff
    if args.focal is not None:
        extra["focal"] = args.focal
    cfg = preset_scene(args.preset, n=args.frames, size=args.size, radius=args.radius, length=args.length,
                       seed=args.seed, step=args.step, angle_deg=args.angle, **extra)
    scene = render_scene(cfg)
    out = write_scene(scene, args.out, depth=not args.no_depth)
    log.info("wrote %d frames to %s", len(scene.frames), out)
    return 0


def cmd_bench(args):
    cfg = selection_config(args)
    seq = load_sequence(args.frames, args.pattern)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    rep = bench(seq, strategies, cfg, renders=args.renders)
    doc = {**header(cfg), **rep.to_json(timing=not args.no_timing)}
    write_json(doc, args.out)
    print(rep.table(), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args):
    cfg = selection_config(args, strategy="ours")
    seq = load_sequence(args.frames, args.pattern)
    grid = {k: getattr(args, f"grid_{k}") for k in ("t_flow", "t_baseline", "alpha", "t_angle")
            if getattr(args, f"grid_{k}")}
    write_json({**header(cfg), "config": cfg.to_json(), "grid": sweep(seq, grid, cfg)}, args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="culvert-select", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="pick the most informative frame pair")
    add_selection_args(p)
    p.add_argument("--workers", type=int, default=1, help="threads for pair evaluation")
    p.add_argument("--debug-dir", help="write keypoints/matches/flow JSON here")
    p.add_argument("--out", help="result JSON path (default: stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("align", help="Sim(3)-align GT camera centres to predicted ones")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--no-normalize-gt", action="store_true")
    p.add_argument("--map", help="extra GT pose file (e.g. held-out views) to map into the predicted frame")
    p.add_argument("--out")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("metrics", help="PSNR and SSIM between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="render a synthetic culvert sequence with GT poses")
    p.add_argument("--preset", choices=PRESETS, default="dolly")
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--size", type=parse_size, default=(160, 120))
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--length", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=0.15, help="forward motion per frame (m)")
    p.add_argument("--angle", type=float, help="pan/tilt/roll per frame (deg)")
    p.add_argument("--falloff", type=float, help="headlamp inverse-square coefficient")
    p.add_argument("--focal", type=float)
    p.add_argument("--no-depth", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="compare selection strategies")
    add_selection_args(p, with_strategy=False)
    p.add_argument("--strategies", default="ours,random,first-last,quartiles")
    p.add_argument("--renders", help="directory with <strategy>/render_*.png and ref_*.png")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="grid-search the selection thresholds")
    add_selection_args(p, with_strategy=False)
    for k in ("t_flow", "t_baseline", "alpha", "t_angle"):
        p.add_argument(f"--grid-{k.replace('_', '-')}", dest=f"grid_{k}", type=float_list,
                       help="comma-separated values")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CulvertError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"error: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
