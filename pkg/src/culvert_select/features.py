"""Oriented FAST keypoints, rotated BRIEF descriptors and Hamming matching.

The recipe follows ORB at a single scale: FAST-9 segment test on a radius-3
Bresenham circle, Harris ranking with 3x3 non-maximum suppression, intensity
centroid orientation, and 256 smoothed intensity comparisons rotated by the
keypoint angle. The comparison pattern lives in ``_pattern.py``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._pattern import PATTERN
from .errors import BorderViolation
from .imageio import Frame

PATCH_RADIUS = 15
DESCRIPTOR_BITS = 256
HARRIS_K = 0.04
HARRIS_BLOCK = 7

# (dx, dy), clockwise from 12 o'clock
CIRCLE = np.array([
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
])
ARC = 9

_PATTERN = np.array(PATTERN, dtype=np.float64)


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float
    orientation: float


@dataclass(frozen=True, eq=False)
class Keypoints:
    """Column storage for a frame's keypoints, strongest first."""

    xy: np.ndarray            # (n, 2) float64
    response: np.ndarray      # (n,)
    orientation: np.ndarray   # (n,) radians in [-pi, pi)

    def __len__(self):
        return len(self.response)

    def __getitem__(self, k):
        return Keypoint(float(self.xy[k, 0]), float(self.xy[k, 1]),
                        float(self.response[k]), float(self.orientation[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0))

    @classmethod
    def from_list(cls, kps):
        kps = list(kps)
        if not kps:
            return cls.empty()
        return cls(np.array([(k.x, k.y) for k in kps], dtype=np.float64),
                   np.array([k.response for k in kps], dtype=np.float64),
                   np.array([k.orientation for k in kps], dtype=np.float64))

    def to_json(self, frame_index):
        return [
            {"frame": int(frame_index), "x": float(x), "y": float(y),
             "response": float(r), "orientation": float(o)}
            for (x, y), r, o in zip(self.xy, self.response, self.orientation)
        ]


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: int


@dataclass(frozen=True, eq=False)
class MatchSet:
    frame_i: int
    frame_j: int
    index_a: np.ndarray
    index_b: np.ndarray
    distance: np.ndarray

    def __post_init__(self):
        if self.frame_i >= self.frame_j:
            raise ValueError(f"MatchSet needs frame_i < frame_j, got ({self.frame_i}, {self.frame_j})")

    def __len__(self):
        return len(self.index_a)

    def __iter__(self):
        for a, b, d in zip(self.index_a, self.index_b, self.distance):
            yield Match(int(a), int(b), int(d))

    @property
    def matches(self):
        return list(self)

    def to_json(self):
        return [{"ia": m.index_a, "ib": m.index_b, "dist": m.distance} for m in self]


def _pixels(frame):
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame)


def _circle_stack(img, margin):
    h, w = img.shape
    return np.stack([
        img[margin + dy: h - margin + dy, margin + dx: w - margin + dx] for dx, dy in CIRCLE
    ])


def _has_arc(mask):
    """True where >= ARC contiguous entries (circularly) along axis 0 are set."""
    ext = np.concatenate([mask, mask[: ARC - 1]], axis=0).astype(np.int16)
    c = np.cumsum(ext, axis=0)
    c = np.concatenate([np.zeros_like(c[:1]), c], axis=0)
    runs = c[ARC:] - c[:-ARC]
    return (runs == ARC).any(axis=0)


def segment_test(pixels, threshold, margin=3):
    """Boolean FAST-9 corner mask over the full image (False within ``margin``)."""
    img = np.asarray(pixels, dtype=np.int16)
    h, w = img.shape
    margin = max(margin, 3)
    out = np.zeros((h, w), dtype=bool)
    if h <= 2 * margin or w <= 2 * margin:
        return out
    center = img[margin: h - margin, margin: w - margin]
    ring = _circle_stack(img, margin)
    corner = _has_arc(ring > center + threshold) | _has_arc(ring < center - threshold)
    out[margin: h - margin, margin: w - margin] = corner
    return out


def box_sum(a, radius):
    """Sum over a (2r+1)^2 window, edge-replicated.

    Separable window sums rather than an integral image: the summation order
    is the same at every pixel, which keeps detection exactly shift-covariant.
    """
    k = 2 * radius + 1
    p = np.pad(np.asarray(a, dtype=np.float64), radius, mode="edge")
    rows = sliding_window_view(p, k, axis=0).sum(-1)
    return sliding_window_view(rows, k, axis=1).sum(-1)


def harris_response(pixels, block=HARRIS_BLOCK, k=HARRIS_K):
    img = np.asarray(pixels, dtype=np.float64) / 255.0
    p = np.pad(img, 1, mode="edge")
    # 3x3 Sobel, normalised to unit gain
    gx = ((p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])) / 8.0
    gy = ((p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:]) - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])) / 8.0
    r = block // 2
    sxx = box_sum(gx * gx, r)
    syy = box_sum(gy * gy, r)
    sxy = box_sum(gx * gy, r)
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def _disc_offsets(radius):
    ys, xs = np.mgrid[-radius: radius + 1, -radius: radius + 1]
    inside = xs ** 2 + ys ** 2 <= radius ** 2
    return xs[inside], ys[inside]


def orientation(pixels, xy, radius=PATCH_RADIUS):
    """Intensity-centroid angle atan2(m01, m10) over a disc, wrapped to [-pi, pi)."""
    img = np.asarray(pixels, dtype=np.float64)
    xy = np.rint(np.asarray(xy, dtype=np.float64)).astype(int).reshape(-1, 2)
    dx, dy = _disc_offsets(radius)
    vals = img[xy[:, 1, None] + dy[None], xy[:, 0, None] + dx[None]]
    m10 = (vals * dx).sum(1)
    m01 = (vals * dy).sum(1)
    ang = np.arctan2(m01, m10)
    return np.where(ang >= np.pi, -np.pi, ang)


def detect_keypoints(frame, max_count=500, fast_threshold=20, patch_radius=PATCH_RADIUS) -> Keypoints:
    px = _pixels(frame)
    h, w = px.shape
    if max_count < 1:
        raise ValueError("max_count must be >= 1")
    corners = segment_test(px, fast_threshold, margin=patch_radius)
    if not corners.any():
        return Keypoints.empty()
    score = harris_response(px)
    cand = np.where(corners, score, -np.inf)
    padded = np.pad(cand, 1, mode="constant", constant_values=-np.inf)
    neigh = np.max(np.stack([
        padded[1 + dy: h + 1 + dy, 1 + dx: w + 1 + dx]
        for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dx or dy
    ]), axis=0)
    keep = corners & (score >= neigh) & (score > 0)
    ys, xs = np.nonzero(keep)
    if len(xs) == 0:
        return Keypoints.empty()
    resp = score[ys, xs]
    # descending response; raster order breaks ties
    order = np.lexsort((xs, ys, -resp))[:max_count]
    xy = np.stack([xs[order], ys[order]], axis=1).astype(np.float64)
    return Keypoints(xy, resp[order], orientation(px, xy, patch_radius))


def smooth(pixels):
    """5x5 box mean (edge-replicated)."""
    return box_sum(pixels, 2) / 25.0


def rotated_pattern(angle):
    """Pattern offsets rotated by ``angle`` and rounded; shape (n, 256, 4)."""
    angle = np.atleast_1d(np.asarray(angle, dtype=np.float64))
    c = np.cos(angle)[:, None]
    s = np.sin(angle)[:, None]
    x1, y1, x2, y2 = _PATTERN.T
    return np.rint(np.stack([
        c * x1 - s * y1, s * x1 + c * y1,
        c * x2 - s * y2, s * x2 + c * y2,
    ], axis=-1)).astype(int)


def compute_descriptors(frame, keypoints, patch_radius=PATCH_RADIUS, smoothed=None) -> np.ndarray:
    """Packed (n, 32) uint8 rotated-BRIEF descriptors, bit k little-endian in byte k // 8."""
    px = _pixels(frame)
    h, w = px.shape
    if not isinstance(keypoints, Keypoints):
        keypoints = Keypoints.from_list(keypoints)
    if len(keypoints) == 0:
        return np.zeros((0, DESCRIPTOR_BITS // 8), dtype=np.uint8)
    c = np.rint(keypoints.xy).astype(int)
    bad = ((c[:, 0] < patch_radius) | (c[:, 1] < patch_radius)
           | (c[:, 0] > w - 1 - patch_radius) | (c[:, 1] > h - 1 - patch_radius))
    if bad.any():
        k = int(np.argmax(bad))
        raise BorderViolation(
            f"keypoint {k} at ({keypoints.xy[k, 0]:.1f}, {keypoints.xy[k, 1]:.1f}) is closer than "
            f"{patch_radius}px to the border of a {w}x{h} image")
    img = smooth(px) if smoothed is None else smoothed
    off = rotated_pattern(keypoints.orientation)
    cx = c[:, 0, None]
    cy = c[:, 1, None]
    a = img[cy + off[..., 1], cx + off[..., 0]]
    b = img[cy + off[..., 3], cx + off[..., 2]]
    return np.packbits(a > b, axis=1, bitorder="little")


def hamming(a, b) -> int:
    return int(np.bitwise_count(np.bitwise_xor(np.asarray(a, np.uint8), np.asarray(b, np.uint8))).sum())


def hamming_matrix(desc_a, desc_b) -> np.ndarray:
    a = np.ascontiguousarray(desc_a, dtype=np.uint8)
    b = np.ascontiguousarray(desc_b, dtype=np.uint8)
    if a.shape[1] % 8 == 0:
        # popcount on 64-bit words: 8x fewer elements to reduce
        a = a.view(np.uint64)
        b = b.view(np.uint64)
    return np.bitwise_count(a[:, None, :] ^ b[None, :, :]).sum(axis=-1, dtype=np.int64)


def l2_matrix(desc_a, desc_b) -> np.ndarray:
    a = np.asarray(desc_a, dtype=np.float64)
    b = np.asarray(desc_b, dtype=np.float64)
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * a @ b.T
    return np.sqrt(np.maximum(d2, 0.0))


def match_descriptors(desc_a, desc_b, max_distance=64, cross_check=True,
                      frame_i=0, frame_j=1, distance=hamming_matrix) -> MatchSet:
    """Nearest-neighbour matching; the lowest index wins distance ties.

    ``distance`` maps two descriptor arrays to a full distance matrix, so a
    float descriptor can be matched with ``l2_matrix``.
    """
    desc_a = np.asarray(desc_a)
    desc_b = np.asarray(desc_b)
    empty = np.zeros(0, dtype=np.int64)
    if len(desc_a) == 0 or len(desc_b) == 0:
        return MatchSet(frame_i, frame_j, empty, empty, empty)
    d = distance(desc_a, desc_b)
    best_b = np.argmin(d, axis=1)
    ia = np.arange(len(desc_a))
    dist = d[ia, best_b]
    keep = dist <= max_distance
    if cross_check:
        best_a = np.argmin(d, axis=0)
        keep &= best_a[best_b] == ia
    ia = ia[keep]
    return MatchSet(frame_i, frame_j, ia, best_b[keep].astype(np.int64), dist[keep])
