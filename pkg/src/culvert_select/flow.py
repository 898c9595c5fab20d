"""Sparse pyramidal Lucas-Kanade tracking and the mean motion magnitude."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SizeMismatch
from .imageio import MIN_LEVEL_SIZE, Frame, build_pyramid


@dataclass(frozen=True)
class LKParams:
    window: int = 21
    levels: int = 3
    max_iter: int = 30
    epsilon: float = 0.01
    min_eig: float = 1e-4


@dataclass(frozen=True)
class FlowVector:
    origin: tuple
    displacement: tuple
    tracked: bool
    residual: float

    @property
    def magnitude(self) -> float:
        return float(np.hypot(*self.displacement))


@dataclass(frozen=True, eq=False)
class Flows:
    """Column storage of tracked points; iterating yields FlowVector."""

    origin: np.ndarray        # (n, 2)
    displacement: np.ndarray  # (n, 2)
    tracked: np.ndarray       # (n,) bool
    residual: np.ndarray      # (n,)

    def __len__(self):
        return len(self.tracked)

    def __getitem__(self, k):
        return FlowVector(tuple(map(float, self.origin[k])), tuple(map(float, self.displacement[k])),
                          bool(self.tracked[k]), float(self.residual[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def magnitude(self):
        return np.hypot(self.displacement[:, 0], self.displacement[:, 1])

    def to_json(self):
        return [{"x": float(o[0]), "y": float(o[1]), "dx": float(d[0]), "dy": float(d[1]),
                 "tracked": bool(t), "residual": float(r)}
                for o, d, t, r in zip(self.origin, self.displacement, self.tracked, self.residual)]


@dataclass(frozen=True)
class FlowStats:
    F: float
    tracked_count: int
    total_count: int
    reliable: bool


def bilinear(img, x, y):
    """Sample ``img`` at float coordinates with edge replication."""
    h, w = img.shape
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.intp), w - 2)
    y0 = np.minimum(np.floor(y).astype(np.intp), h - 2)
    ax = x - x0
    ay = y - y0
    i00 = img[y0, x0]
    i01 = img[y0, x0 + 1]
    i10 = img[y0 + 1, x0]
    i11 = img[y0 + 1, x0 + 1]
    return (1 - ay) * ((1 - ax) * i00 + ax * i01) + ay * ((1 - ax) * i10 + ax * i11)


def sample_windows(img, cx, cy, half):
    """Bilinear (2*half+1)^2 windows centred at (cx, cy), edge-replicated.

    All pixels of a window share one fractional offset, so a single integer
    block gather plus four scalar weights per point does the interpolation.
    """
    h, w = img.shape
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    x0 = np.floor(cx)
    y0 = np.floor(cy)
    ax = (cx - x0).astype(img.dtype)[:, None, None]
    ay = (cy - y0).astype(img.dtype)[:, None, None]
    r = np.arange(-half, half + 2)
    xs = np.clip(x0.astype(np.intp)[:, None] + r, 0, w - 1)
    ys = np.clip(y0.astype(np.intp)[:, None] + r, 0, h - 1)
    blk = img.ravel().take(ys[:, :, None] * w + xs[:, None, :])
    top = blk[:, :-1, :-1] * (1 - ax)
    top += blk[:, :-1, 1:] * ax
    bot = blk[:, 1:, :-1] * (1 - ax)
    bot += blk[:, 1:, 1:] * ax
    top *= 1 - ay
    bot *= ay
    top += bot
    return top.reshape(len(cx), -1)


def central_gradients(img):
    p = np.pad(img, 1, mode="edge")
    gx = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    gy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    return gx, gy


def usable_levels(shape, levels):
    h, w = shape
    n = 1
    while n < levels and (w >> n) >= MIN_LEVEL_SIZE and (h >> n) >= MIN_LEVEL_SIZE:
        n += 1
    return n


def _pixels(frame):
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame)


def track_points(frame_i, frame_j, points, params=None, **overrides) -> Flows:
    """Track ``points`` (n, 2) from ``frame_i`` into ``frame_j``.

    Coarse-to-fine: at each level the displacement update solves G d = b with
    G the window structure tensor of ``frame_i``; iteration stops when the
    update is below ``epsilon`` pixels. A point is dropped (tracked False) if
    the normalised minimum eigenvalue of G falls below ``min_eig`` at any
    level, or if its window leaves ``frame_j``.
    """
    p = params or LKParams()
    if overrides:
        p = LKParams(**{**p.__dict__, **overrides})
    a = _pixels(frame_i)
    b = _pixels(frame_j)
    if a.shape != b.shape:
        raise SizeMismatch(f"frames differ in size: {a.shape[::-1]} vs {b.shape[::-1]}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        z = np.zeros((0, 2))
        return Flows(z, z.copy(), np.zeros(0, bool), np.zeros(0))

    nlev = usable_levels(a.shape, p.levels)
    # float32 windows: half the memory traffic, ample for 0.01 px steps
    pyr_a = [(lv / 255.0).astype(np.float32) for lv in build_pyramid(a, nlev).levels]
    pyr_b = [(lv / 255.0).astype(np.float32) for lv in build_pyramid(b, nlev).levels]

    half = p.window // 2
    area = float(p.window ** 2)

    ok = np.ones(n, dtype=bool)
    guess = np.zeros((n, 2))
    v = np.zeros((n, 2))
    for lev in range(nlev - 1, -1, -1):
        A, B = pyr_a[lev], pyr_b[lev]
        gx_img, gy_img = central_gradients(A)
        pl = pts / (2 ** lev)
        tmpl = sample_windows(A, pl[:, 0], pl[:, 1], half)
        ix = sample_windows(gx_img, pl[:, 0], pl[:, 1], half)
        iy = sample_windows(gy_img, pl[:, 0], pl[:, 1], half)
        gxx = (ix * ix).sum(1, dtype=np.float64)
        gyy = (iy * iy).sum(1, dtype=np.float64)
        gxy = (ix * iy).sum(1, dtype=np.float64)
        tr = 0.5 * (gxx + gyy)
        min_eig = (tr - np.sqrt(np.maximum(tr * tr - (gxx * gyy - gxy * gxy), 0.0))) / area
        ok &= min_eig >= p.min_eig
        det = gxx * gyy - gxy * gxy
        det = np.where(ok, det, 1.0)

        v = np.zeros((n, 2))
        active = ok.copy()
        for _ in range(p.max_iter):
            if not active.any():
                break
            k = np.nonzero(active)[0]
            cx = pl[k, 0] + guess[k, 0] + v[k, 0]
            cy = pl[k, 1] + guess[k, 1] + v[k, 1]
            warped = sample_windows(B, cx, cy, half)
            e = tmpl[k] - warped
            bx = (e * ix[k]).sum(1, dtype=np.float64)
            by = (e * iy[k]).sum(1, dtype=np.float64)
            dx = (gyy[k] * bx - gxy[k] * by) / det[k]
            dy = (gxx[k] * by - gxy[k] * bx) / det[k]
            v[k, 0] += dx
            v[k, 1] += dy
            done = dx * dx + dy * dy < p.epsilon ** 2
            active[k[done]] = False
        if lev > 0:
            guess = 2.0 * (guess + v)

    disp = guess + v
    # final residual window at full resolution
    cx = pts[:, 0] + disp[:, 0]
    cy = pts[:, 1] + disp[:, 1]
    A, B = pyr_a[0], pyr_b[0]
    err = sample_windows(A, pts[:, 0], pts[:, 1], half) - sample_windows(B, cx, cy, half)
    residual = ((255.0 * err.astype(np.float64)) ** 2).mean(1)

    h, w = a.shape
    inside = (cx - half >= 0) & (cy - half >= 0) & (cx + half <= w - 1) & (cy + half <= h - 1)
    ok &= inside & np.isfinite(disp).all(1)
    disp = np.where(ok[:, None], disp, 0.0)
    return Flows(pts.copy(), disp, ok, residual)


def average_motion(flows, min_tracked=20) -> FlowStats:
    """Mean displacement magnitude over tracked vectors.

    Fewer than ``min_tracked`` tracked vectors marks the result unreliable;
    with none tracked F is 0.
    """
    if isinstance(flows, Flows):
        mags = flows.magnitude[flows.tracked]
        total = len(flows)
    else:
        flows = list(flows)
        mags = np.array([f.magnitude for f in flows if f.tracked], dtype=np.float64)
        total = len(flows)
    tracked = int(mags.size)
    F = math.fsum(mags) / tracked if tracked else 0.0
    return FlowStats(F, tracked, total, tracked >= min_tracked)
