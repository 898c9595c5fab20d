"""Grid-search the gate thresholds on one rendered scene and print which pair
each combination selects.

    python scripts/sweep_thresholds.py --preset pan --angle 1.5 --step 0.15 \
        --t-angle 5,10,15 --t-baseline 5,10,20
"""

import argparse

from culvert_select.bench import sweep
from culvert_select.selection import SelectionConfig
from culvert_select.synth import PRESETS, preset_scene, render_scene


def floats(text):
    return [float(v) for v in text.split(",")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", choices=PRESETS, default="spiral")
    ap.add_argument("--frames", type=int, default=8)
    ap.add_argument("--angle", type=float, default=7.0)
    ap.add_argument("--step", type=float, default=0.03)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--t-flow", type=floats, default=[5.0])
    ap.add_argument("--t-baseline", type=floats, default=[5.0, 10.0, 20.0])
    ap.add_argument("--alpha", type=floats, default=[5.0])
    ap.add_argument("--t-angle", type=floats, default=[10.0, 15.0, 20.0])
    args = ap.parse_args()

    scene = render_scene(preset_scene(args.preset, n=args.frames, seed=args.seed, step=args.step,
                                      angle_deg=args.angle))
    grid = {"t_flow": args.t_flow, "t_baseline": args.t_baseline, "alpha": args.alpha, "t_angle": args.t_angle}
    rows = sweep(scene.frames, grid, SelectionConfig())
    print(f"{'T_flow':>7}{'T_base':>8}{'alpha':>7}{'T_angle':>9}{'#feasible':>11}  chosen")
    for r in rows:
        print(f"{r['t_flow']:>7g}{r['t_baseline']:>8g}{r['alpha']:>7g}{r['t_angle']:>9g}"
              f"{r['feasible']:>11}  {r['chosen']}")


if __name__ == "__main__":
    main()
