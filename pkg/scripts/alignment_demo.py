"""Align a rendered trajectory's GT poses to a noisy, rescaled copy and show
how the residual RMSE tracks the injected noise level."""

import argparse

import numpy as np

from culvert_select.sim3 import Pose, align_trajectories
from culvert_select.synth import make_trajectory, rot_x, rot_z


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--poses", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    gt = make_trajectory("tilt", args.poses, step=0.1, tilt_deg=2.0)
    # bend the path so the centres are not collinear
    gt = [Pose(p.rotation, p.center + (0.2 * np.sin(k / 5), 0.1 * np.cos(k / 7), 0), p.id)
          for k, p in enumerate(gt)]
    R = rot_z(0.3) @ rot_x(-0.8)
    print(f"{'sigma':>8}  {'rmse':>10}  {'scale':>8}")
    for sigma in (0.0, 0.001, 0.01, 0.05):
        pred = [Pose(R @ p.rotation, 0.4 * R @ p.center + (1, -2, 0.5) + rng.normal(0, sigma, 3), p.id)
                for p in gt]
        rep = align_trajectories(gt, pred)
        print(f"{sigma:>8g}  {rep.rmse:>10.2e}  {rep.transform.s:>8.4f}")


if __name__ == "__main__":
    main()
