"""Closed-form Sim(3) alignment of camera trajectories (Umeyama 1991)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CountMismatch, DecodeError, DegenerateConfiguration, TooFewPoints

COLLINEAR_RTOL = 1e-12


class CollinearWarning(UserWarning):
    """Source points are (nearly) collinear; rotation about their line is arbitrary."""


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray  # world-from-camera
    center: np.ndarray
    id: object = None

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        C = np.asarray(self.center, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "center", C)

    def is_valid(self, tol=1e-9) -> bool:
        R = self.rotation
        return bool(np.abs(R.T @ R - np.eye(3)).max() <= tol and abs(np.linalg.det(R) - 1.0) <= tol)

    def to_json(self):
        return {"id": self.id, "rotation": [float(v) for v in self.rotation.ravel()],
                "center": [float(v) for v in self.center]}


@dataclass(frozen=True, eq=False)
class Sim3Transform:
    s: float = 1.0
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    collinear: bool = False

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))
        object.__setattr__(self, "s", float(self.s))

    def apply(self, points):
        """x -> s R x + t on an (n, 3) array (or a single 3-vector)."""
        x = np.asarray(points, dtype=np.float64)
        return self.s * x @ self.R.T + self.t

    def apply_pose(self, pose: Pose) -> Pose:
        return Pose(self.R @ pose.rotation, self.apply(pose.center), pose.id)

    def compose(self, inner: "Sim3Transform") -> "Sim3Transform":
        """``self`` after ``inner``."""
        return Sim3Transform(self.s * inner.s, self.R @ inner.R, self.s * self.R @ inner.t + self.t)

    def inverse(self) -> "Sim3Transform":
        Ri = self.R.T
        return Sim3Transform(1.0 / self.s, Ri, -(Ri @ self.t) / self.s)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.s * self.R
        T[:3, 3] = self.t
        return T

    def to_json(self):
        return {"s": self.s, "R": self.R.tolist(), "t": self.t.tolist()}


@dataclass(frozen=True, eq=False)
class AlignmentReport:
    transform: Sim3Transform
    rmse: float
    per_point_residuals: np.ndarray
    normalization: Sim3Transform = field(default_factory=Sim3Transform)
    umeyama: Sim3Transform = field(default_factory=Sim3Transform)

    def to_json(self):
        return {
            "s": self.transform.s, "R": self.transform.R.tolist(), "t": self.transform.t.tolist(),
            "rmse": self.rmse, "residuals": [float(r) for r in self.per_point_residuals],
            "collinear": self.umeyama.collinear,
            "normalization": self.normalization.to_json(),
            "umeyama": self.umeyama.to_json(),
        }


def umeyama(source, target, with_scale=True) -> Sim3Transform:
    """Least-squares ``(s, R, t)`` minimising ``sum |s R source_i + t - target_i|^2``.

    The sign correction on the last singular direction keeps R a proper
    rotation even when the best orthogonal fit would be a reflection.
    """
    src = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(src) != len(dst):
        raise CountMismatch(f"source has {len(src)} points, target {len(dst)}")
    n = len(src)
    if n < 3:
        raise TooFewPoints(f"need at least 3 points, got {n}")
    mu_s = src.mean(0)
    mu_t = dst.mean(0)
    ds = src - mu_s
    dt = dst - mu_t
    var_s = (ds * ds).sum() / n
    if var_s == 0.0:
        raise DegenerateConfiguration("all source points are identical")
    sigma = dt.T @ ds / n
    U, D, Vt = np.linalg.svd(sigma)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    s = float((D * np.diag(S)).sum() / var_s) if with_scale else 1.0
    t = mu_t - s * R @ mu_s
    sv = np.linalg.svd(ds, compute_uv=False)
    collinear = bool(sv[1] <= COLLINEAR_RTOL * sv[0])
    if collinear:
        warnings.warn("source points are collinear; rotation about their line is ambiguous",
                      CollinearWarning, stacklevel=2)
    return Sim3Transform(s, R, t, collinear)


def centers(poses):
    return np.array([p.center for p in poses], dtype=np.float64).reshape(-1, 3)


def normalize_trajectory(poses):
    """Centre the camera centres on the origin and scale their RMS radius to 1.

    Returns ``(normalized_poses, transform)``; rotations are untouched.
    """
    poses = list(poses)
    if len(poses) < 2:
        raise DegenerateConfiguration(f"need at least 2 poses, got {len(poses)}")
    C = centers(poses)
    mu = C.mean(0)
    rms = float(np.sqrt(((C - mu) ** 2).sum(1).mean()))
    if rms == 0.0:
        raise DegenerateConfiguration("all camera centres coincide")
    T = Sim3Transform(1.0 / rms, np.eye(3), -mu / rms)
    out = [Pose(p.rotation, (p.center - mu) / rms, p.id) for p in poses]
    return out, T


def align_trajectories(gt, pred, normalize_gt=True) -> AlignmentReport:
    """Map GT poses into the predicted frame and report centre residuals.

    The returned ``transform`` is the composite (alignment after normalisation),
    so ``transform.apply_pose`` maps any raw GT pose, held-out views included.
    """
    gt = list(gt)
    pred = list(pred)
    if len(gt) != len(pred):
        raise CountMismatch(f"{len(gt)} GT poses vs {len(pred)} predicted poses")
    if len(gt) < 3:
        raise TooFewPoints(f"need at least 3 poses, got {len(gt)}")
    if normalize_gt:
        _, norm = normalize_trajectory(gt)
    else:
        norm = Sim3Transform()
    src = norm.apply(centers(gt))
    ume = umeyama(src, centers(pred))
    total = ume.compose(norm)
    total = Sim3Transform(total.s, total.R, total.t, ume.collinear)
    res = np.linalg.norm(total.apply(centers(gt)) - centers(pred), axis=1)
    rmse = float(np.sqrt((res ** 2).mean()))
    return AlignmentReport(total, rmse, res, norm, ume)


def rotation_angle(R) -> float:
    """Geodesic angle (rad) of a rotation matrix.

    Uses ``|R - I|_F = 2 sqrt(2) sin(angle / 2)``, which stays accurate near
    zero where the trace/arccos form loses half its digits.
    """
    d = np.linalg.norm(np.asarray(R, dtype=np.float64) - np.eye(3))
    return float(2.0 * np.arcsin(min(d / (2.0 * np.sqrt(2.0)), 1.0)))


def load_poses(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        return [Pose(p["rotation"], p["center"], p.get("id", k)) for k, p in enumerate(doc["poses"])]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise DecodeError(f"{path}: malformed pose file ({exc})") from exc


def dump_poses(poses, path):
    with open(path, "w") as fh:
        json.dump({"poses": [p.to_json() for p in poses]}, fh, indent=2)
