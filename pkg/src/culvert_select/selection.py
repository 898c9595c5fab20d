"""Informative frame-pair selection.

Every candidate pair (i, j) is pushed through a fixed gate sequence, cheapest
first, and the first failed gate is recorded as its rejection reason:

1. descriptor matching         -> ``too_few_matches``
2. robust similarity fit       -> ``geometry_failed``
3. T_baseline <= beta <= alpha * T_baseline -> ``baseline_out_of_range``
4. theta <= T_angle            -> ``angle_above_threshold``
5. optical flow F >= T_flow    -> ``flow_below_threshold``

Surviving pairs are scored with ``beta + (1 - theta / T_angle)`` and the best
score wins, ties going to the lexicographically smallest (i, j).

The default thresholds (T_flow 5 px, T_baseline 10 px, alpha 5, T_angle 15
deg) are starting points for synthetic culvert footage, not published values;
tune them per dataset (see ``scripts/sweep_thresholds.py``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import EmptySequence, InvalidConfig, PairRejected
from .features import compute_descriptors, detect_keypoints, match_descriptors, smooth
from .flow import LKParams, average_motion, track_points
from .geometry2d import RansacParams, pair_geometry

STRATEGIES = ("ours", "random", "first_last", "quartiles")

NONE = "none"
TOO_FEW_MATCHES = "too_few_matches"
GEOMETRY_FAILED = "geometry_failed"
BASELINE_OUT_OF_RANGE = "baseline_out_of_range"
ANGLE_ABOVE_THRESHOLD = "angle_above_threshold"
FLOW_BELOW_THRESHOLD = "flow_below_threshold"
REASONS = (NONE, TOO_FEW_MATCHES, FLOW_BELOW_THRESHOLD, BASELINE_OUT_OF_RANGE,
           ANGLE_ABOVE_THRESHOLD, GEOMETRY_FAILED)


def normalize_strategy(name: str) -> str:
    s = str(name).strip().lower().replace("-", "_")
    if s not in STRATEGIES:
        raise InvalidConfig(f"unknown strategy {name!r}; expected one of {', '.join(STRATEGIES)}")
    return s


@dataclass(frozen=True)
class SelectionConfig:
    t_flow: float = 5.0
    t_baseline: float = 10.0
    alpha: float = 5.0
    t_angle: float = 15.0
    strategy: str = "ours"
    rng_seed: int = 0
    frame_stride: int = 1
    beta_normalized: bool = False
    # baseline reduction over matched displacements: mean | median | rms
    beta_mode: str = "mean"
    beta_inliers: bool = True
    # features
    max_keypoints: int = 500
    fast_threshold: int = 20
    max_distance: int = 64
    cross_check: bool = True
    min_matches: int = 3
    # optical flow
    lk_window: int = 21
    lk_levels: int = 3
    lk_max_iter: int = 30
    lk_epsilon: float = 0.01
    min_tracked: int = 20
    # ransac
    ransac_threshold: float = 3.0
    ransac_confidence: float = 0.99
    ransac_max_iter: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "strategy", normalize_strategy(self.strategy))
        checks = [
            (self.t_flow > 0, "t_flow", "must be > 0"),
            (self.t_baseline > 0, "t_baseline", "must be > 0"),
            (self.t_angle > 0, "t_angle", "must be > 0"),
            (self.alpha >= 1, "alpha", "must be >= 1"),
            (self.frame_stride >= 1, "frame_stride", "must be >= 1"),
            (self.beta_mode in ("mean", "median", "rms"), "beta_mode", "must be mean, median or rms"),
            (self.max_keypoints >= 1, "max_keypoints", "must be >= 1"),
            (self.min_matches >= 3, "min_matches", "must be >= 3"),
            (self.lk_window >= 3 and self.lk_window % 2 == 1, "lk_window", "must be odd and >= 3"),
            (self.lk_levels >= 1, "lk_levels", "must be >= 1"),
            (0 < self.ransac_confidence < 1, "ransac_confidence", "must be in (0, 1)"),
            (self.ransac_max_iter >= 1, "ransac_max_iter", "must be >= 1"),
            (self.ransac_threshold > 0, "ransac_threshold", "must be > 0"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise InvalidConfig(f"{name}={getattr(self, name)!r} {msg}")

    @property
    def max_baseline(self) -> float:
        return self.alpha * self.t_baseline

    @property
    def lk(self) -> LKParams:
        return LKParams(self.lk_window, self.lk_levels, self.lk_max_iter, self.lk_epsilon)

    @property
    def ransac(self) -> RansacParams:
        return RansacParams(self.ransac_threshold, self.ransac_confidence, self.ransac_max_iter, self.rng_seed)

    def replace(self, **changes) -> "SelectionConfig":
        return SelectionConfig(**{**asdict(self), **changes})

    def to_json(self):
        return asdict(self)

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


@dataclass(frozen=True)
class PairStats:
    i: int
    j: int
    F: float | None = None
    beta: float | None = None
    theta: float | None = None
    match_count: int = 0
    inlier_count: int = 0
    tracked_count: int = 0
    score: float | None = None
    feasible: bool = False
    rejection_reason: str = NONE
    violations: tuple = ()

    def to_json(self):
        return {
            "i": self.i, "j": self.j, "F": self.F, "beta": self.beta, "theta": self.theta,
            "matches": self.match_count, "inliers": self.inlier_count, "tracked": self.tracked_count,
            "score": self.score, "feasible": self.feasible, "reason": self.rejection_reason,
            "violations": list(self.violations),
        }


@dataclass(frozen=True)
class SelectionResult:
    chosen: tuple | None
    stats: list
    strategy: str
    config: SelectionConfig = field(default_factory=SelectionConfig)

    @property
    def chosen_stats(self):
        if self.chosen is None:
            return None
        for s in self.stats:
            if (s.i, s.j) == self.chosen:
                return s
        return None

    def to_json(self):
        return {
            "chosen": list(self.chosen) if self.chosen is not None else None,
            "strategy": self.strategy,
            "config": self.config.to_json(),
            "pairs": [s.to_json() for s in self.stats],
        }


class FeatureCache:
    """Per-frame keypoints and descriptors, computed once per sequence."""

    def __init__(self, seq, config=None):
        self.seq = seq
        self.config = config or SelectionConfig()
        self._store = {}

    def __call__(self, k):
        if k not in self._store:
            frame = self.seq[k]
            kps = detect_keypoints(frame, self.config.max_keypoints, self.config.fast_threshold)
            desc = compute_descriptors(frame, kps, smoothed=smooth(frame.pixels))
            self._store[k] = (kps, desc)
        return self._store[k]

    def compatible(self, config):
        c = self.config
        return (c.max_keypoints, c.fast_threshold) == (config.max_keypoints, config.fast_threshold)


def score_pair(beta, theta, config=None) -> float:
    """Pair score: ``beta + (1 - theta / T_angle)``.

    With ``beta_normalized`` the baseline is first divided by the maximum
    allowed baseline ``alpha * T_baseline`` so both terms are unitless.
    """
    c = config or SelectionConfig()
    b = beta / c.max_baseline if c.beta_normalized else beta
    return b + (1.0 - theta / c.t_angle)


def baseline_ok(beta, config):
    return config.t_baseline <= beta <= config.max_baseline


def evaluate_pair(seq, i, j, config=None, cache=None, exhaustive=False) -> PairStats:
    """Measure one candidate pair and apply the gates in order.

    With ``exhaustive`` every quantity that can be measured is measured even
    after a gate fails, and ``violations`` lists every failed gate; otherwise
    evaluation stops at the first failure.
    """
    c = config or SelectionConfig()
    if not 0 <= i < j < len(seq):
        raise ValueError(f"need 0 <= i < j < {len(seq)}, got ({i}, {j})")
    if cache is None or not cache.compatible(c):
        cache = FeatureCache(seq, c)
    kps_i, desc_i = cache(i)
    kps_j, desc_j = cache(j)
    ms = match_descriptors(desc_i, desc_j, c.max_distance, c.cross_check, frame_i=i, frame_j=j)
    out = {"i": i, "j": j, "match_count": len(ms)}
    violations = []

    def finish():
        reason = violations[0] if violations else NONE
        if not violations:
            out["score"] = score_pair(out["beta"], out["theta"], c)
        return PairStats(**out, feasible=not violations, rejection_reason=reason,
                         violations=tuple(violations))

    if len(ms) < c.min_matches:
        violations.append(TOO_FEW_MATCHES)
    else:
        try:
            geo = pair_geometry(ms, kps_i, kps_j, c.ransac, c.beta_mode, c.beta_inliers)
        except PairRejected:
            violations.append(GEOMETRY_FAILED)
        else:
            out.update(beta=geo.beta, theta=geo.theta, inlier_count=geo.inlier_count)
            if not baseline_ok(geo.beta, c):
                violations.append(BASELINE_OUT_OF_RANGE)
            if geo.theta > c.t_angle and (exhaustive or not violations):
                violations.append(ANGLE_ABOVE_THRESHOLD)
    if violations and not exhaustive:
        return finish()

    flows = track_points(seq[i], seq[j], kps_i.xy, c.lk)
    fs = average_motion(flows, c.min_tracked)
    out.update(F=fs.F, tracked_count=fs.tracked_count)
    if fs.F < c.t_flow or not fs.reliable:
        violations.append(FLOW_BELOW_THRESHOLD)
    return finish()


def grid_pairs(n, stride=1):
    grid = range(0, n, stride)
    return [(i, j) for i in grid for j in grid if i < j]


def best_pair(stats):
    """Feasible argmax of score; ties go to the smallest (i, j)."""
    best = None
    for s in stats:
        if not s.feasible:
            continue
        key = (s.score, -s.i, -s.j)
        if best is None or key > best[0]:
            best = (key, (s.i, s.j))
    return None if best is None else best[1]


def baseline_pick(n, strategy, seed=0):
    if strategy == "first_last":
        return 0, n - 1
    if strategy == "quartiles":
        i, j = (n - 1) // 4, (3 * (n - 1)) // 4
        if i == j:
            j = min(i + 1, n - 1)
            i = j - 1
        return i, j
    if strategy == "random":
        rng = np.random.default_rng(seed)
        i, j = sorted(int(v) for v in rng.choice(n, size=2, replace=False))
        return i, j
    raise InvalidConfig(f"{strategy!r} is not a fixed-pick strategy")


def select(seq, config=None, cache=None, workers=1) -> SelectionResult:
    """Pick the most informative pair of ``seq`` under ``config.strategy``.

    Baseline strategies return their fixed (or seeded random) pick and attach
    full gate diagnostics for it, but never reject it.
    """
    c = config or SelectionConfig()
    n = len(seq)
    if n < 2:
        raise EmptySequence(f"need at least 2 frames, got {n}")
    if cache is None or not cache.compatible(c):
        cache = FeatureCache(seq, c)

    if c.strategy != "ours":
        i, j = baseline_pick(n, c.strategy, c.rng_seed)
        st = evaluate_pair(seq, i, j, c, cache, exhaustive=True)
        return SelectionResult((i, j), [st], c.strategy, c)

    pairs = grid_pairs(n, c.frame_stride)
    # warm the cache serially so worker threads only read it
    for k in sorted({k for p in pairs for k in p}):
        cache(k)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            stats = list(pool.map(lambda p: evaluate_pair(seq, p[0], p[1], c, cache), pairs))
    else:
        stats = [evaluate_pair(seq, i, j, c, cache) for i, j in pairs]
    return SelectionResult(best_pair(stats), stats, c.strategy, c)


def cost_model(n, stride=1):
    """Number of pair evaluations ``select`` performs for ``n`` frames."""
    m = math.ceil(n / stride)
    return m * (m - 1) // 2
