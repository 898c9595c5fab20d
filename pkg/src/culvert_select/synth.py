"""Synthetic culvert interiors: a capped, value-noise textured cylinder seen
by a pinhole camera carrying its own light.

World frame: the tube axis is +z, the wall is ``x^2 + y^2 = radius^2`` for
``0 <= z <= length``. Camera frame: x right, y down, z forward; a Pose holds
the world-from-camera rotation and the camera centre.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DecodeError, InvalidConfig
from .imageio import Frame, FrameSequence, write_png
from .sim3 import Pose, dump_poses

DEPTH_MAGIC = b"CDPT"
PRESETS = ("dolly", "pan", "tilt", "spiral")


@dataclass(frozen=True)
class Hit:
    point: np.ndarray
    normal: np.ndarray
    distance: np.ndarray
    on_cap: np.ndarray


def ray_cylinder_intersect(origin, direction, radius, length) -> Hit:
    """Nearest forward hit of rays from inside the capped tube.

    Works on a single ray or on (..., 3) arrays. The wall root is the positive
    root of ``|o_xy + t d_xy|^2 = r^2``; caps are ``z = 0`` and ``z = length``.
    Normals point into the tube.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    o, d = np.broadcast_arrays(o, d)
    ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
    dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - radius * radius
    with np.errstate(divide="ignore", invalid="ignore"):
        # origin inside => c < 0, so the larger root is the only positive one;
        # for b > 0 use c / (-b - disc), the cancellation-free form
        disc = np.sqrt(np.maximum(b * b - a * c, 0.0))
        safe_a = np.where(a > 0, a, 1.0)
        q = -b - disc
        t_wall = np.where(b > 0, c / np.where(q != 0, q, -1.0), (disc - b) / safe_a)
        t_wall = np.where(a > 0, t_wall, np.inf)
        t_cap = np.where(dz > 0, (length - oz) / np.where(dz != 0, dz, 1.0),
                         np.where(dz < 0, -oz / np.where(dz != 0, dz, 1.0), np.inf))
    on_cap = t_cap < t_wall
    t = np.where(on_cap, t_cap, t_wall)
    p = o + t[..., None] * d
    n_wall = np.stack([-p[..., 0], -p[..., 1], np.zeros_like(t)], -1) / radius
    n_cap = np.stack([np.zeros_like(t), np.zeros_like(t), np.where(dz > 0, -1.0, 1.0)], -1)
    normal = np.where(on_cap[..., None], n_cap, n_wall)
    if on_cap.ndim == 0:
        return Hit(p, normal, float(t), bool(on_cap))
    return Hit(p, normal, t, on_cap)


class ValueNoise:
    """Seeded lattice noise with smoothstep interpolation.

    ``u`` is an angle-like coordinate wrapped with period ``period_u`` lattice
    cells, so the texture closes seamlessly around the tube.
    """

    def __init__(self, seed, period_u, extent_v, octaves=4, persistence=0.55):
        rng = np.random.default_rng(seed)
        self.period_u = int(period_u)
        self.octaves = octaves
        self.persistence = persistence
        self.tables = []
        for o in range(octaves):
            nu = self.period_u * 2 ** o
            nv = int(math.ceil(extent_v * 2 ** o)) + 3
            self.tables.append(rng.random((nu, nv)))

    @staticmethod
    def _fade(t):
        return t * t * (3.0 - 2.0 * t)

    def __call__(self, u, v):
        """``u`` in lattice cells of the base octave, ``v`` likewise; v >= -1."""
        total = np.zeros(np.shape(u))
        amp, norm = 1.0, 0.0
        for o, tab in enumerate(self.tables):
            f = 2 ** o
            nu, nv = tab.shape
            uu = np.asarray(u) * f
            vv = np.clip(np.asarray(v) * f + 1.0, 0.0, nv - 2.0 - 1e-9)
            iu = np.floor(uu).astype(np.int64)
            iv = np.floor(vv).astype(np.int64)
            fu = self._fade(uu - iu)
            fv = self._fade(vv - iv)
            iu0 = iu % nu
            iu1 = (iu + 1) % nu
            top = tab[iu0, iv] * (1 - fu) + tab[iu1, iv] * fu
            bot = tab[iu0, iv + 1] * (1 - fu) + tab[iu1, iv + 1] * fu
            total = total + amp * (top * (1 - fv) + bot * fv)
            norm += amp
            amp *= self.persistence
        return total / norm


@dataclass(frozen=True, eq=False)
class SceneConfig:
    radius: float = 1.0
    length: float = 20.0
    texture_seed: int = 0
    texture_scale: float = 6.0      # lattice cells per metre
    texture_contrast: float = 3.0   # gain applied around mid-grey before clipping
    light_falloff: float = 0.3      # attenuation = min(1, 1 / (falloff * d^2)); 0 disables
    ambient: float = 0.0
    width: int = 160
    height: int = 120
    focal: float = 110.0
    trajectory: tuple = ()
    with_depth: bool = True

    def __post_init__(self):
        object.__setattr__(self, "trajectory", tuple(self.trajectory))
        self.validate()

    def validate(self):
        if self.radius <= 0 or self.length <= 0:
            raise InvalidConfig("radius and length must be positive")
        if self.focal <= 0:
            raise InvalidConfig("focal length must be positive")
        if self.width < 32 or self.height < 32:
            raise InvalidConfig(f"image size {self.width}x{self.height} is below 32x32")
        if self.light_falloff < 0 or self.texture_scale <= 0:
            raise InvalidConfig("light_falloff must be >= 0 and texture_scale > 0")
        for k, p in enumerate(self.trajectory):
            x, y, z = p.center
            if not (x * x + y * y < self.radius ** 2 and 0 < z < self.length):
                raise InvalidConfig(f"camera {k} at {tuple(p.center)} is outside the tube")

    def intrinsics(self):
        return self.focal, (self.width - 1) / 2.0, (self.height - 1) / 2.0


@dataclass(frozen=True, eq=False)
class RenderedScene:
    frames: FrameSequence
    poses: list
    depth_maps: list | None = None
    config: SceneConfig = field(default_factory=SceneConfig)


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def camera_rays(config):
    f, cx, cy = config.intrinsics()
    ys, xs = np.mgrid[0: config.height, 0: config.width].astype(np.float64)
    d = np.stack([(xs - cx) / f, (ys - cy) / f, np.ones_like(xs)], -1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def project(config, pose, points):
    """Pixel coordinates (n, 2) and camera depth z (n,) of world points."""
    f, cx, cy = config.intrinsics()
    pc = (np.asarray(points, dtype=np.float64) - pose.center) @ pose.rotation
    return np.stack([cx + f * pc[:, 0] / pc[:, 2], cy + f * pc[:, 1] / pc[:, 2]], 1), pc[:, 2]


def backproject(config, pose, pixels, distance):
    """World points seen at ``pixels`` (n, 2) at ray ``distance`` (n,)."""
    f, cx, cy = config.intrinsics()
    px = np.asarray(pixels, dtype=np.float64)
    d = np.stack([(px[:, 0] - cx) / f, (px[:, 1] - cy) / f, np.ones(len(px))], 1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return pose.center + (d @ pose.rotation.T) * np.asarray(distance)[:, None]


class Texture:
    def __init__(self, config):
        self.config = config
        circumference = 2 * math.pi * config.radius
        self.period_u = max(4, int(round(circumference * config.texture_scale)))
        self.wall = ValueNoise(config.texture_seed, self.period_u, config.length * config.texture_scale)
        cap_cells = 2 * config.radius * config.texture_scale
        self.cap = ValueNoise(config.texture_seed + 7919, int(math.ceil(cap_cells)) + 4, cap_cells + 2)

    def contrast(self, n):
        return np.clip(0.5 + self.config.texture_contrast * (n - 0.5), 0.0, 1.0)

    def wall_at(self, phi, z):
        u = (np.mod(phi, 2 * math.pi) / (2 * math.pi)) * self.period_u
        return self.contrast(self.wall(u, z * self.config.texture_scale))

    def cap_at(self, x, y):
        s = self.config.texture_scale
        return self.contrast(self.cap((x + self.config.radius) * s, (y + self.config.radius) * s))


def render_frame(config, pose, texture=None, rays=None):
    """(uint8 image, float64 ray-distance map) for one pose."""
    texture = texture or Texture(config)
    rays = camera_rays(config) if rays is None else rays
    d_world = rays @ pose.rotation.T
    hit = ray_cylinder_intersect(pose.center, d_world, config.radius, config.length)
    p = hit.point
    tex = np.where(hit.on_cap, texture.cap_at(p[..., 0], p[..., 1]),
                   texture.wall_at(np.arctan2(p[..., 1], p[..., 0]), p[..., 2]))
    dist = hit.distance
    if config.light_falloff > 0:
        with np.errstate(divide="ignore"):
            atten = np.minimum(1.0, 1.0 / (config.light_falloff * dist * dist))
    else:
        atten = np.ones_like(dist)
    shade = np.clip(config.ambient + tex * atten, 0.0, 1.0)
    img = np.floor(255.0 * shade + 0.5).astype(np.uint8)
    return img, dist


def render_scene(config: SceneConfig) -> RenderedScene:
    """Ray-cast every pose of ``config.trajectory``; deterministic in the config."""
    config.validate()
    if len(config.trajectory) < 2:
        raise InvalidConfig("trajectory needs at least 2 poses")
    texture = Texture(config)
    rays = camera_rays(config)
    frames, depths = [], []
    for k, pose in enumerate(config.trajectory):
        img, dist = render_frame(config, pose, texture, rays)
        frames.append(Frame(k, img))
        depths.append(dist)
    seq = FrameSequence(tuple(frames), "synthetic")
    return RenderedScene(seq, list(config.trajectory), depths if config.with_depth else None, config)


def make_trajectory(preset, n, start_z=2.0, step=0.15, pan_deg=0.0, tilt_deg=0.0, roll_deg=0.0,
                    offset=(0.0, 0.0)):
    """Camera path along the tube axis.

    ``dolly`` moves forward ``step`` metres per frame looking down the axis;
    ``pan`` additionally yaws by ``pan_deg`` per frame, ``tilt`` pitches and
    yaws together by ``tilt_deg`` per frame (a diagonal sweep), and ``spiral``
    rolls about the optical axis by ``roll_deg`` per frame.
    """
    if preset not in PRESETS:
        raise InvalidConfig(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    poses = []
    for k in range(n):
        R = np.eye(3)
        if preset == "pan":
            R = rot_y(math.radians(pan_deg * k))
        elif preset == "tilt":
            a = math.radians(tilt_deg * k)
            R = rot_y(a / math.sqrt(2)) @ rot_x(a / math.sqrt(2))
        elif preset == "spiral":
            R = rot_z(math.radians(roll_deg * k))
        C = np.array([offset[0], offset[1], start_z + step * k])
        poses.append(Pose(R, C, k))
    return poses


def preset_scene(preset="dolly", n=9, size=(160, 120), radius=1.0, length=20.0, seed=0,
                 step=0.15, angle_deg=None, **kwargs) -> SceneConfig:
    angle = {"dolly": 0.0, "pan": 1.5, "tilt": 1.5, "spiral": 5.0}[preset] if angle_deg is None else angle_deg
    traj = make_trajectory(preset, n, step=step, pan_deg=angle, tilt_deg=angle, roll_deg=angle,
                           start_z=kwargs.pop("start_z", 2.0))
    return SceneConfig(radius=radius, length=length, texture_seed=seed, width=size[0], height=size[1],
                       trajectory=tuple(traj), **kwargs)


def write_depth(path, depth):
    """Header ``magic(4s) W(uint32) H(uint32)``, then float32 row-major, little-endian."""
    d = np.asarray(depth, dtype="<f4")
    h, w = d.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", DEPTH_MAGIC, w, h))
        fh.write(d.tobytes())


def read_depth(path):
    raw = Path(path).read_bytes()
    magic, w, h = struct.unpack_from("<4sII", raw)
    if magic != DEPTH_MAGIC or len(raw) != 12 + 4 * w * h:
        raise DecodeError(f"{path}: not a depth file")
    return np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w)


def write_scene(scene: RenderedScene, out_dir, depth=True):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(scene.frames) - 1)))
    for f in scene.frames:
        write_png(out / f"{f.index:0{width}d}.png", f.pixels)
    dump_poses(scene.poses, out / "poses.json")
    if depth and scene.depth_maps is not None:
        ddir = out / "depth"
        ddir.mkdir(exist_ok=True)
        for k, d in enumerate(scene.depth_maps):
            write_depth(ddir / f"{k:0{width}d}.depth", d)
    return out
