import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from culvert_select.errors import CountMismatch, DecodeError, DegenerateConfiguration, TooFewPoints
from culvert_select.sim3 import (
    CollinearWarning, Pose, Sim3Transform, align_trajectories, dump_poses, load_poses,
    normalize_trajectory, rotation_angle, umeyama,
)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def euler(a, b, c):
    ca, sa, cb, sb, cc, sc = math.cos(a), math.sin(a), math.cos(b), math.sin(b), math.cos(c), math.sin(c)
    rz = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rx = np.array([[1, 0, 0], [0, cc, -sc], [0, sc, cc]])
    return rz @ ry @ rx


def cost_given_rotation(src, dst, R):
    """Least-squares cost with s and t optimised for a fixed R (s clamped at 0)."""
    ds = src - src.mean(0)
    dt = dst - dst.mean(0)
    s = max(0.0, float((dt * (ds @ R.T)).sum() / (ds * ds).sum()))
    return float(((s * ds @ R.T - dt) ** 2).sum())


def cost(T, src, dst):
    return float(((T.apply(src) - dst) ** 2).sum())


def test_exact_recovery():
    rng = np.random.default_rng(0)
    src = rng.normal(size=(20, 3))
    R = random_rotation(rng)
    T = umeyama(src, 2.5 * src @ R.T + (1.0, -2.0, 3.0))
    assert T.s == pytest.approx(2.5, rel=1e-12)
    assert rotation_angle(T.R @ R.T) < 1e-10
    assert np.allclose(T.t, (1.0, -2.0, 3.0), atol=1e-12)


def test_reflection_gives_proper_rotation_and_grid_optimum():
    src = np.array([[0.0, 0, 0], [1, 0, 0], [0, 2, 0], [0, 0, 3]])
    dst = src * (1, 1, -1)
    T = umeyama(src, dst)
    assert np.linalg.det(T.R) == pytest.approx(1.0, abs=1e-12)
    best = cost(T, src, dst)
    # coarse SO(3) grid: no rotation may do better, and the grid minimum is close
    grid = np.linspace(-math.pi, math.pi, 37)
    costs = [cost_given_rotation(src, dst, euler(a, b, c))
             for a in grid for b in grid[::2] for c in grid]
    assert best <= min(costs) + 1e-9
    assert min(costs) - best < 0.25 * best + 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_local_optimality(seed):
    rng = np.random.default_rng(seed)
    src = rng.normal(size=(15, 3))
    dst = 1.3 * src @ random_rotation(rng).T + rng.normal(size=3) + rng.normal(0, 0.05, (15, 3))
    T = umeyama(src, dst)
    base = cost(T, src, dst)
    for _ in range(1000):
        w = rng.normal(0, 1e-3, 3)
        dR = euler(*w)
        P = Sim3Transform(T.s * (1 + rng.normal(0, 1e-3)), dR @ T.R, T.t + rng.normal(0, 1e-3, 3))
        assert cost(P, src, dst) >= base - 1e-12


def test_equivariance():
    rng = np.random.default_rng(4)
    src = rng.normal(size=(12, 3))
    dst = rng.normal(size=(12, 3))
    Q = random_rotation(rng)
    a = umeyama(src, dst)
    b = umeyama(src @ Q.T, dst)
    assert np.allclose(b.R, a.R @ Q.T, atol=1e-9)
    assert b.s == pytest.approx(a.s, rel=1e-9)


def test_errors_and_collinear():
    with pytest.raises(TooFewPoints):
        umeyama(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(CountMismatch):
        umeyama(np.zeros((4, 3)), np.zeros((3, 3)))
    with pytest.raises(DegenerateConfiguration):
        umeyama(np.ones((4, 3)), np.zeros((4, 3)))
    line = np.outer(np.arange(5.0), (1, 2, 3))
    with pytest.warns(CollinearWarning):
        T = umeyama(line, line * 2)
    assert T.collinear and T.s == pytest.approx(2.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not umeyama(np.eye(3) * (1, 2, 3) + 0.1, np.eye(3)).collinear


def test_without_scale():
    rng = np.random.default_rng(1)
    src = rng.normal(size=(10, 3))
    T = umeyama(src, 3 * src, with_scale=False)
    assert T.s == 1.0 and np.allclose(T.R, np.eye(3), atol=1e-12)


def poses_from(centres, rng=None):
    rng = rng or np.random.default_rng(0)
    return [Pose(random_rotation(rng), c, k) for k, c in enumerate(centres)]


def test_normalize_two_points():
    out, T = normalize_trajectory(poses_from([(0, 0, 0), (2, 0, 0)]))
    assert np.allclose(out[0].center, (-1, 0, 0)) and np.allclose(out[1].center, (1, 0, 0))
    assert np.allclose(T.apply(np.array([[2.0, 0, 0]])), [[1, 0, 0]])


def test_normalize_idempotent_and_degenerate():
    rng = np.random.default_rng(2)
    out, _ = normalize_trajectory(poses_from(rng.normal(size=(8, 3)) * 5 + 3))
    again, T = normalize_trajectory(out)
    assert abs(T.s - 1) < 1e-12 and np.abs(T.t).max() < 1e-12
    for a, b in zip(out, again):
        assert np.allclose(a.center, b.center, atol=1e-12)
    with pytest.raises(DegenerateConfiguration):
        normalize_trajectory(poses_from([(1, 1, 1)] * 3))


def sim3_image(poses, s, R, t):
    return [Pose(R @ p.rotation, s * R @ p.center + t, p.id) for p in poses]


def test_align_exact_and_composite_bits():
    rng = np.random.default_rng(5)
    gt = poses_from(rng.normal(size=(10, 3)), rng)
    pred = sim3_image(gt, 0.7, random_rotation(rng), np.array([1.0, 2.0, -1.0]))
    rep = align_trajectories(gt, pred)
    assert rep.rmse <= 1e-9
    composite = rep.umeyama.compose(rep.normalization)
    res = np.linalg.norm(composite.apply(np.array([p.center for p in gt])) - [p.center for p in pred], axis=1)
    assert np.array_equal(res, rep.per_point_residuals)
    mapped = rep.transform.apply_pose(gt[3])
    assert np.allclose(mapped.rotation, pred[3].rotation, atol=1e-9)
    assert mapped.is_valid()
    raw = align_trajectories(gt, pred, normalize_gt=False)
    assert raw.rmse <= 1e-9 and raw.transform.s == pytest.approx(0.7, rel=1e-9)


def test_align_noise_concentration():
    rng = np.random.default_rng(11)
    gt = poses_from(rng.normal(size=(50, 3)) * 2, rng)
    pred = sim3_image(gt, 1.5, random_rotation(rng), np.array([0.5, 0, 0]))
    pred = [Pose(p.rotation, p.center + rng.normal(0, 0.01, 3), p.id) for p in pred]
    rep = align_trajectories(gt, pred)
    assert 0.005 <= rep.rmse <= 0.02
    # expected value: sigma * sqrt((3n - 7) / n), 7 parameters fitted from 3n residuals
    assert rep.rmse == pytest.approx(0.01 * math.sqrt((150 - 7) / 50), rel=0.2)


def test_align_errors():
    g = poses_from(np.eye(3))
    with pytest.raises(CountMismatch):
        align_trajectories(g, g[:2])
    with pytest.raises(TooFewPoints):
        align_trajectories(g[:2], g[:2])


def test_transform_algebra():
    rng = np.random.default_rng(6)
    a = Sim3Transform(2.0, random_rotation(rng), rng.normal(size=3))
    b = Sim3Transform(0.5, random_rotation(rng), rng.normal(size=3))
    x = rng.normal(size=(4, 3))
    assert np.allclose(a.compose(b).apply(x), a.apply(b.apply(x)))
    assert np.allclose(a.inverse().apply(a.apply(x)), x)
    assert np.allclose(a.matrix() @ np.append(x[0], 1), np.append(a.apply(x[0]), 1))


def test_rotation_angle_small_and_large():
    assert rotation_angle(np.eye(3)) == 0.0
    assert rotation_angle(euler(1e-9, 0, 0)) == pytest.approx(1e-9, rel=1e-6)
    assert rotation_angle(euler(2.0, 0, 0)) == pytest.approx(2.0, rel=1e-12)


def test_pose_file_roundtrip(tmp_path):
    poses = poses_from(np.random.default_rng(3).normal(size=(4, 3)))
    dump_poses(poses, tmp_path / "p.json")
    back = load_poses(tmp_path / "p.json")
    assert [p.id for p in back] == [0, 1, 2, 3]
    for a, b in zip(poses, back):
        assert np.array_equal(a.rotation, b.rotation) and np.array_equal(a.center, b.center)
    doc = json.loads((tmp_path / "p.json").read_text())
    assert len(doc["poses"][0]["rotation"]) == 9
    (tmp_path / "bad.json").write_text("{\"poses\": [{\"rotation\": [1]}]}")
    with pytest.raises(DecodeError):
        load_poses(tmp_path / "bad.json")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 10.0), st.booleans())
def test_det_always_positive(seed, scale, reflect):
    rng = np.random.default_rng(seed)
    src = rng.normal(size=(6, 3))
    dst = scale * src @ random_rotation(rng).T
    if reflect:
        dst[:, 0] = -dst[:, 0]
    T = umeyama(src, dst)
    assert np.linalg.det(T.R) == pytest.approx(1.0, abs=1e-10)
    assert np.abs(T.R.T @ T.R - np.eye(3)).max() < 1e-10
