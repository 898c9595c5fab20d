import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from culvert_select.errors import EmptySequence, InvalidConfig
from culvert_select.features import match_descriptors
from culvert_select.geometry2d import pair_geometry
from culvert_select.imageio import FrameSequence
from culvert_select.selection import (
    ANGLE_ABOVE_THRESHOLD, BASELINE_OUT_OF_RANGE, TOO_FEW_MATCHES,
    FeatureCache, PairStats, SelectionConfig, baseline_pick, best_pair, cost_model, evaluate_pair,
    grid_pairs, score_pair, select,
)
from culvert_select.sim3 import Pose
from culvert_select.synth import SceneConfig, backproject, project, render_scene, rot_y, rot_z


def test_score_formula():
    c = SelectionConfig()
    assert score_pair(20.0, 0.0, c) == 21.0
    assert score_pair(20.0, 15.0, c) == 20.0
    assert score_pair(12.0, 7.5, c) == 12.5
    n = c.replace(beta_normalized=True)
    assert score_pair(25.0, 0.0, n) == pytest.approx(25.0 / 50.0 + 1.0)


def test_config_validation():
    with pytest.raises(InvalidConfig, match="t_angle"):
        SelectionConfig(t_angle=0)
    with pytest.raises(InvalidConfig, match="alpha"):
        SelectionConfig(alpha=0.5)
    with pytest.raises(InvalidConfig):
        SelectionConfig(strategy="best")
    assert SelectionConfig(strategy="first-last").strategy == "first_last"


def test_baseline_picks():
    assert baseline_pick(9, "first_last") == (0, 8)
    assert baseline_pick(9, "quartiles") == (2, 6)
    assert baseline_pick(2, "quartiles") == (0, 1)
    assert baseline_pick(3, "quartiles") == (0, 1)
    for seed in range(20):
        i, j = baseline_pick(7, "random", seed)
        assert 0 <= i < j < 7
        assert baseline_pick(7, "random", seed) == (i, j)


def test_grid_and_cost():
    assert grid_pairs(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert grid_pairs(5, 2) == [(0, 2), (0, 4), (2, 4)]
    for n in range(2, 15):
        for s in (1, 2, 3):
            assert cost_model(n, s) == len(grid_pairs(n, s))


def stat(i, j, score, feasible=True):
    return PairStats(i, j, score=score, feasible=feasible)


def test_best_pair_ties_and_infeasible():
    stats = [stat(1, 3, 5.0), stat(0, 4, 5.0), stat(0, 2, 5.0), stat(2, 3, 9.0, feasible=False)]
    assert best_pair(stats) == (0, 2)
    assert best_pair([stat(0, 1, 1.0, False)]) is None


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(1, 6), st.sampled_from([1.0, 2.0, 2.5]),
                          st.booleans()), max_size=12))
def test_best_pair_is_lexicographic_argmax(rows):
    stats = [stat(i, i + d, s, f) for i, d, s, f in rows]
    got = best_pair(stats)
    feas = [(s.i, s.j, s.score) for s in stats if s.feasible]
    if not feas:
        assert got is None
        return
    top = max(x[2] for x in feas)
    assert got == min((i, j) for i, j, sc in feas if sc == top)


def test_empty_sequence_rejected():
    class One:
        def __len__(self):
            return 1

    with pytest.raises(EmptySequence):
        select(One())


def oracle_pair_scene():
    """Sideways-looking camera: a small yaw gives ~20 px of near-uniform shift, plus a 2 deg roll."""
    base = math.radians(60.0)
    poses = [Pose(rot_y(base) @ rot_z(0.0), np.array([0.0, 0.0, 5.0]), 0),
             Pose(rot_y(base + math.radians(2.9)) @ rot_z(math.radians(2.0)), np.array([0.0, 0.0, 5.0]), 1)]
    cfg = SceneConfig(focal=400.0, width=160, height=120, texture_seed=1, texture_scale=24.0,
                      trajectory=tuple(poses))
    return cfg, render_scene(cfg)


def test_known_pair_matches_projection_oracle():
    cfg, scene = oracle_pair_scene()
    c = SelectionConfig()
    st_ = evaluate_pair(scene.frames, 0, 1, c)
    assert st_.feasible, st_
    assert st_.theta == pytest.approx(2.0, abs=0.1)

    # oracle baseline: project the same inlier keypoints through the true geometry
    cache = FeatureCache(scene.frames, c)
    (ka, da), (kb, db) = cache(0), cache(1)
    ms = match_descriptors(da, db, c.max_distance, c.cross_check)
    geo = pair_geometry(ms, ka, kb, c.ransac)
    pa = ka.xy[np.asarray(ms.index_a)][geo.inliers]
    dist = scene.depth_maps[0][pa[:, 1].astype(int), pa[:, 0].astype(int)]
    pb, _ = project(cfg, scene.poses[1], backproject(cfg, scene.poses[0], pa, dist))
    beta_true = np.hypot(*(pb - pa).T).mean()
    assert st_.beta == pytest.approx(beta_true, abs=0.5)
    assert 15 < st_.beta < 25
    assert st_.score == pytest.approx(score_pair(st_.beta, st_.theta, c), rel=1e-12)
    assert st_.F >= c.t_flow


def test_spiral_scene_prefers_mid_pair(spiral_scene):
    seq = spiral_scene.frames
    res = select(seq)
    assert res.chosen is not None
    i, j = res.chosen
    cs = res.chosen_stats
    assert cs.feasible and j - i == 2
    assert cs.F >= 5 and 10 <= cs.beta <= 50 and cs.theta <= 15
    for strategy in ("first_last", "quartiles"):
        r = select(seq, SelectionConfig(strategy=strategy))
        assert r.chosen == {"first_last": (0, 8), "quartiles": (2, 6)}[strategy]
        assert not r.chosen_stats.feasible
        assert ANGLE_ABOVE_THRESHOLD in r.chosen_stats.violations
    adjacent = [s for s in res.stats if s.j - s.i == 1]
    assert all(s.rejection_reason == BASELINE_OUT_OF_RANGE for s in adjacent)


def test_workers_and_cache_do_not_change_result(spiral_scene):
    seq = spiral_scene.frames
    c = SelectionConfig()
    a = select(seq, c)
    b = select(seq, c, FeatureCache(seq, c), workers=4)
    assert a.to_json() == b.to_json()


def test_exhaustive_lists_all_violations(spiral_scene):
    seq = spiral_scene.frames
    s = evaluate_pair(seq, 0, 8, exhaustive=True)
    assert s.rejection_reason == s.violations[0]
    assert ANGLE_ABOVE_THRESHOLD in s.violations
    assert s.F is not None and s.beta is not None
    short = evaluate_pair(seq, 0, 8)
    assert short.rejection_reason == s.rejection_reason
    assert short.F is None


def test_identical_frames_rejected_and_tied():
    from conftest import smooth_texture

    img = smooth_texture(9, shape=(120, 160), cells=(15, 20))
    seq = FrameSequence.from_arrays([img, img, img])
    res = select(seq)
    assert res.chosen is None
    assert {s.rejection_reason for s in res.stats} == {BASELINE_OUT_OF_RANGE}


def test_blank_frames_too_few_matches():
    blank = np.full((64, 64), 128, np.uint8)
    s = evaluate_pair(FrameSequence.from_arrays([blank, blank]), 0, 1)
    assert s.rejection_reason == TOO_FEW_MATCHES and s.match_count == 0


def test_result_json_shape(spiral_scene):
    doc = select(spiral_scene.frames, SelectionConfig(strategy="random", rng_seed=3)).to_json()
    assert set(doc) == {"chosen", "strategy", "config", "pairs"}
    assert set(doc["pairs"][0]) == {"i", "j", "F", "beta", "theta", "matches", "inliers", "tracked",
                                    "score", "feasible", "reason", "violations"}


@settings(max_examples=200)
@given(st.floats(0, 1e4), st.floats(0, 90), st.floats(0.1, 90))
def test_score_monotonic(beta, theta, t_angle):
    c = SelectionConfig(t_angle=t_angle)
    assert score_pair(beta + 1.0, theta, c) > score_pair(beta, theta, c)
    assert score_pair(beta, theta + 1.0, c) < score_pair(beta, theta, c)
