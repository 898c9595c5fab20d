"""Robust 2-D similarity fitting between matched keypoints, and the pair
baseline / angle derived from it.

Points are handled as complex numbers: a similarity is ``z -> a z + t`` with
``a = scale * exp(i angle)``, so both the 2-point minimal solver and the
least-squares refit are closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, GeometryError, NoConsensus, PairRejected


@dataclass(frozen=True)
class RansacParams:
    threshold: float = 3.0
    confidence: float = 0.99
    max_iter: int = 2000
    seed: int = 0


@dataclass(frozen=True)
class Similarity2D:
    scale: float = 1.0
    angle: float = 0.0
    translation: tuple = (0.0, 0.0)

    @classmethod
    def from_complex(cls, a, t):
        ang = math.atan2(a.imag, a.real)
        if ang == -math.pi:
            ang = math.pi
        return cls(abs(a), ang, (float(t.real), float(t.imag)))

    @property
    def a(self) -> complex:
        return self.scale * complex(math.cos(self.angle), math.sin(self.angle))

    def apply(self, points):
        z = _as_complex(points)
        w = self.a * z + complex(*self.translation)
        return np.stack([w.real, w.imag], axis=-1)

    def matrix(self):
        c, s = self.scale * math.cos(self.angle), self.scale * math.sin(self.angle)
        return np.array([[c, -s, self.translation[0]], [s, c, self.translation[1]]])

    def to_json(self):
        return {"scale": self.scale, "angle": self.angle, "translation": list(self.translation)}


@dataclass(frozen=True)
class PairGeometry:
    beta: float
    theta: float
    inlier_count: int
    model: Similarity2D
    inliers: np.ndarray = field(default=None, repr=False, compare=False)


def _as_complex(points):
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return p[:, 0] + 1j * p[:, 1]


def fit_similarity(points_a, points_b):
    """Least-squares similarity (2-D Umeyama with scale), as complex (a, t)."""
    za = _as_complex(points_a)
    zb = _as_complex(points_b)
    ma, mb = za.mean(), zb.mean()
    da, db = za - ma, zb - mb
    var = float((da.real ** 2 + da.imag ** 2).sum())
    if var == 0.0:
        raise DegenerateInput("all source points coincide")
    a = (db * np.conj(da)).sum() / var
    return a, mb - a * ma


def _ransac_iterations(inliers, total, confidence, cap):
    w = inliers / total
    if w >= 1.0:
        return 0
    denom = math.log(1.0 - w * w) if w > 0 else 0.0
    if denom == 0.0:
        return cap
    return min(cap, math.ceil(math.log(1.0 - confidence) / denom))


def estimate_similarity(points_a, points_b, params=None, **overrides):
    """RANSAC similarity from paired points; returns ``(Similarity2D, inlier_mask)``.

    Hypotheses come from seeded 2-point samples. They are scored all at once,
    then scanned in draw order with the adaptive stopping rule
    ``log(1 - confidence) / log(1 - w**2)``, which gives the same result as a
    sequential loop. The winner is refit on its consensus set until the set
    stops changing.
    """
    p = params or RansacParams()
    if overrides:
        p = RansacParams(**{**p.__dict__, **overrides})
    za = _as_complex(points_a)
    zb = _as_complex(points_b)
    m = len(za)
    if m != len(zb):
        raise DegenerateInput(f"point lists differ in length: {m} vs {len(zb)}")
    if m < 2:
        raise DegenerateInput(f"need at least 2 correspondences, got {m}")

    rng = np.random.default_rng(p.seed)
    i = rng.integers(0, m, size=p.max_iter)
    j = (i + rng.integers(1, m, size=p.max_iter)) % m
    dza = za[j] - za[i]
    valid = dza != 0
    if not valid.any():
        raise DegenerateInput("every sampled point pair is coincident")
    a = np.where(valid, (zb[j] - zb[i]) / np.where(valid, dza, 1.0), 0.0)
    t = zb[i] - a * za[i]
    thr2 = p.threshold ** 2
    counts = np.full(p.max_iter, -1, dtype=np.int64)
    # chunked to bound memory on large match sets
    for s in range(0, p.max_iter, 256):
        r = a[s:s + 256, None] * za[None, :] + t[s:s + 256, None] - zb[None, :]
        counts[s:s + 256] = ((r.real ** 2 + r.imag ** 2) <= thr2).sum(1)
    counts[~valid] = -1

    best, best_k, need = -1, -1, p.max_iter
    k = 0
    while k < min(need, p.max_iter):
        if counts[k] > best:
            best, best_k = int(counts[k]), k
            need = _ransac_iterations(best, m, p.confidence, p.max_iter)
        k += 1
    if best < 3:
        raise NoConsensus(f"best consensus has {max(best, 0)} inliers, need 3")

    def consensus(aa, tt):
        r = aa * za + tt - zb
        return (r.real ** 2 + r.imag ** 2) <= thr2

    aa, tt = a[best_k], t[best_k]
    mask = consensus(aa, tt)
    for _ in range(10):
        aa2, tt2 = fit_similarity(np.stack([za[mask].real, za[mask].imag], 1),
                                  np.stack([zb[mask].real, zb[mask].imag], 1))
        new = consensus(aa2, tt2)
        if new.sum() < 3:
            break
        aa, tt = aa2, tt2
        if np.array_equal(new, mask):
            break
        mask = new
    mask = consensus(aa, tt)
    return Similarity2D.from_complex(complex(aa), complex(tt)), mask


def reduce_distances(d, mode="mean"):
    """Mean, median or RMS of ``d``.

    Sums are correctly rounded (``math.fsum``), so the result does not depend
    on the order of the matches.
    """
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.size == 0:
        return 0.0
    if mode == "mean":
        return math.fsum(d) / d.size
    if mode == "median":
        return float(np.median(d))
    if mode == "rms":
        return math.sqrt(math.fsum(d * d) / d.size)
    raise ValueError(f"unknown baseline reduction {mode!r}")


def pair_geometry(matches, keypoints_a, keypoints_b, params=None,
                  beta_mode="mean", beta_inliers=True) -> PairGeometry:
    """Baseline (mean matched-point displacement, px) and absolute fitted angle (deg).

    ``keypoints_*`` are Keypoints containers or (n, 2) coordinate arrays.
    """
    xy_a = getattr(keypoints_a, "xy", keypoints_a)
    xy_b = getattr(keypoints_b, "xy", keypoints_b)
    ia = np.asarray(matches.index_a, dtype=np.intp)
    ib = np.asarray(matches.index_b, dtype=np.intp)
    if len(ia) < 3:
        raise PairRejected(f"need at least 3 matches, got {len(ia)}")
    pa = np.asarray(xy_a, dtype=np.float64)[ia]
    pb = np.asarray(xy_b, dtype=np.float64)[ib]
    try:
        model, mask = estimate_similarity(pa, pb, params)
    except GeometryError as exc:
        raise PairRejected(str(exc)) from exc
    sel = mask if beta_inliers else np.ones(len(pa), dtype=bool)
    d = np.hypot(*(pb[sel] - pa[sel]).T)
    beta = reduce_distances(d, beta_mode)
    theta = math.degrees(abs(model.angle))
    return PairGeometry(beta, theta, int(mask.sum()), model, mask)
