"""Strategy comparison harness: one row per selection strategy, with
optional PSNR/SSIM columns computed from externally rendered views.

Renders are read from ``<renders>/<strategy>/`` where ``render_*.png`` and
``ref_*.png`` are paired by natural sort order. Missing directories leave the
metric columns as n/a; reconstruction itself happens outside this package.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CountMismatch, CulvertError
from .imageio import list_images, read_image, to_gray
from .metrics import json_float, psnr, ssim
from .selection import (
    ANGLE_ABOVE_THRESHOLD, BASELINE_OUT_OF_RANGE, FLOW_BELOW_THRESHOLD, GEOMETRY_FAILED,
    TOO_FEW_MATCHES, FeatureCache, PairStats, SelectionConfig, baseline_ok, best_pair,
    evaluate_pair, grid_pairs, normalize_strategy, score_pair, select,
)


@dataclass
class BenchRow:
    strategy: str
    chosen: tuple | None
    feasible: bool
    stats: object = None
    views: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def mean_psnr(self):
        return float(np.mean([v["psnr"] for v in self.views])) if self.views else None

    @property
    def mean_ssim(self):
        return float(np.mean([v["ssim"] for v in self.views])) if self.views else None

    def to_json(self):
        return {
            "strategy": self.strategy,
            "chosen": list(self.chosen) if self.chosen is not None else None,
            "feasible": self.feasible,
            "stats": self.stats.to_json() if self.stats is not None else None,
            "psnr": json_float(self.mean_psnr) if self.views else "n/a",
            "ssim": self.mean_ssim if self.views else "n/a",
            "views": [{**v, "psnr": json_float(v["psnr"])} for v in self.views],
        }


@dataclass
class BenchReport:
    rows: list
    config: SelectionConfig
    timing: dict = field(default_factory=dict)

    def row(self, strategy):
        s = normalize_strategy(strategy)
        return next(r for r in self.rows if r.strategy == s)

    def to_json(self, timing=True):
        out = {"config": self.config.to_json(), "rows": [r.to_json() for r in self.rows]}
        if timing:
            out["timing"] = {**self.timing, "per_strategy_s": {r.strategy: r.seconds for r in self.rows}}
        return out

    def table(self) -> str:
        head = ("strategy", "pair", "feasible", "reason", "F", "beta", "theta", "score", "PSNR", "SSIM")
        lines = []
        for r in self.rows:
            st = r.stats

            def num(v, fmt="{:.3f}"):
                return "-" if v is None else fmt.format(v)

            psnr_s = "n/a" if not r.views else ("inf" if np.isinf(r.mean_psnr) else f"{r.mean_psnr:.3f}")
            ssim_s = "n/a" if not r.views else f"{r.mean_ssim:.4f}"
            lines.append((
                r.strategy,
                "-" if r.chosen is None else f"({r.chosen[0]}, {r.chosen[1]})",
                "yes" if r.feasible else "no",
                "-" if st is None else ",".join(st.violations) or "none",
                num(st and st.F, "{:.2f}"), num(st and st.beta, "{:.2f}"),
                num(st and st.theta, "{:.2f}"), num(st and st.score),
                psnr_s, ssim_s,
            ))
        widths = [max(len(h), *(len(l[k]) for l in lines)) if lines else len(h) for k, h in enumerate(head)]
        fmt = "  ".join("{:<%d}" % w for w in widths)
        out = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*l) for l in lines]
        return "\n".join(out)


def view_metrics(directory):
    """PSNR/SSIM for every render/reference pair in ``directory``."""
    d = Path(directory)
    renders = list_images(d, "render_*.png")
    refs = list_images(d, "ref_*.png")
    if len(renders) != len(refs):
        raise CountMismatch(f"{d}: {len(renders)} renders vs {len(refs)} references")
    out = []
    for r, f in zip(renders, refs):
        a = read_image(f)
        b = read_image(r)
        if a.ndim != b.ndim:
            a, b = to_gray(a), to_gray(b)
        out.append({"render": r.name, "reference": f.name, "psnr": psnr(a, b), "ssim": ssim(a, b)})
    return out


def _renders_dir(root, strategy):
    if root is None:
        return None
    for name in (strategy, strategy.replace("_", "-")):
        p = Path(root) / name
        if p.is_dir():
            return p
    return None


def bench(seq, strategies=("ours", "random", "first_last", "quartiles"), config=None,
          renders=None, cache=None) -> BenchReport:
    c = config or SelectionConfig()
    cache = cache if cache is not None and cache.compatible(c) else FeatureCache(seq, c)
    rows = []
    t0 = time.perf_counter()
    for name in strategies:
        s = normalize_strategy(name)
        t = time.perf_counter()
        try:
            res = select(seq, c.replace(strategy=s), cache)
            views = []
            rdir = _renders_dir(renders, s)
            if rdir is not None:
                views = view_metrics(rdir)
        except CulvertError as exc:
            exc.args = (f"[{s}] {exc.args[0] if exc.args else exc}",) + tuple(exc.args[1:])
            raise
        cs = res.chosen_stats
        rows.append(BenchRow(s, res.chosen, bool(cs is not None and cs.feasible), cs, views,
                             time.perf_counter() - t))
    return BenchReport(rows, c, {"total_s": time.perf_counter() - t0})


def regate(stats, config):
    """Re-apply the gates of ``config`` to an exhaustively measured PairStats."""
    structural = [v for v in stats.violations if v in (TOO_FEW_MATCHES, GEOMETRY_FAILED)]
    v = list(structural)
    if not structural:
        if not baseline_ok(stats.beta, config):
            v.append(BASELINE_OUT_OF_RANGE)
        if stats.theta > config.t_angle:
            v.append(ANGLE_ABOVE_THRESHOLD)
    flow_unreliable = stats.tracked_count < config.min_tracked
    if stats.F is None or stats.F < config.t_flow or flow_unreliable:
        v.append(FLOW_BELOW_THRESHOLD)
    score = None if v else score_pair(stats.beta, stats.theta, config)
    return PairStats(stats.i, stats.j, stats.F, stats.beta, stats.theta, stats.match_count,
                     stats.inlier_count, stats.tracked_count, score, not v, v[0] if v else "none", tuple(v))


def sweep(seq, grid, config=None):
    """Chosen pair for every threshold combination in ``grid``.

    ``grid`` maps t_flow / t_baseline / alpha / t_angle to value lists. Pairs
    are measured once (exhaustively) and re-gated per combination.
    """
    c = config or SelectionConfig()
    cache = FeatureCache(seq, c)
    measured = [evaluate_pair(seq, i, j, c, cache, exhaustive=True)
                for i, j in grid_pairs(len(seq), c.frame_stride)]
    keys = [k for k in ("t_flow", "t_baseline", "alpha", "t_angle") if k in grid]
    rows = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cc = c.replace(**dict(zip(keys, combo)))
        gated = [regate(s, cc) for s in measured]
        chosen = best_pair(gated)
        rows.append({**dict(zip(keys, combo)), "feasible": sum(s.feasible for s in gated),
                     "chosen": list(chosen) if chosen else None})
    return rows
