"""Frame loading, grayscale reduction and box-filter pyramids."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, EmptySequence, TooManyLevels

MIN_SIZE = 32
MIN_LEVEL_SIZE = 8
LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Frame:
    """One grayscale frame; ``pixels`` is an (H, W) uint8 array."""

    index: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise DimensionMismatch(f"frame {self.index}: expected 2-D pixels, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise DecodeError(f"frame {self.index}: pixels must be uint8, got {px.dtype}")
        h, w = px.shape
        if w < MIN_SIZE or h < MIN_SIZE:
            raise DimensionMismatch(f"frame {self.index}: {w}x{h} is below the {MIN_SIZE}x{MIN_SIZE} minimum")
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def as_float(self) -> np.ndarray:
        """Intensities scaled to [0, 1]."""
        return self.pixels.astype(np.float64) / 255.0


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: tuple
    source: str = ""

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise EmptySequence(f"need at least 2 frames, got {len(frames)}")
        shape = frames[0].pixels.shape
        for f in frames[1:]:
            if f.pixels.shape != shape:
                raise DimensionMismatch(
                    f"frame {f.index} is {f.width}x{f.height}, expected {shape[1]}x{shape[0]}"
                )
        indices = [f.index for f in frames]
        if len(set(indices)) != len(indices):
            raise ValueError("frame indices must be unique")
        frames = tuple(sorted(frames, key=lambda f: f.index))
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, k):
        return self.frames[k]

    def __iter__(self):
        return iter(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @classmethod
    def from_arrays(cls, arrays, source="memory"):
        return cls(tuple(Frame(i, to_gray(a)) for i, a in enumerate(arrays)), source)


@dataclass(frozen=True, eq=False)
class Pyramid:
    """Level 0 is full resolution; each level halves W and H (floor)."""

    levels: list = field(default_factory=list)

    @property
    def level_count(self) -> int:
        return len(self.levels)


def to_gray(image) -> np.ndarray:
    """Reduce an (H, W) or (H, W, 3|4) uint8 image to BT.601 luma.

    Already-gray input is returned unchanged, so the conversion is idempotent.
    """
    a = np.asarray(image)
    if a.ndim == 2:
        return a.astype(np.uint8, copy=False)
    if a.ndim != 3 or a.shape[2] not in (3, 4):
        raise DecodeError(f"unsupported image shape {a.shape}")
    rgb = a[..., :3].astype(np.float64)
    y = rgb[..., 0] * LUMA[0] + rgb[..., 1] * LUMA[1] + rgb[..., 2] * LUMA[2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def natural_key(name: str):
    parts = re.split(r"(\d+)", name)
    return [int(p) if p.isdigit() else p.lower() for p in parts]


def read_image(path) -> np.ndarray:
    """Decode a PNG/PGM into a uint8 array, gray (H, W) or RGB (H, W, 3)."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "RGB"):
                return np.array(im)
            if im.mode == "RGBA":
                return np.array(im)[..., :3]
            if im.mode in ("P", "LA"):
                return np.array(im.convert("RGB" if im.mode == "P" else "L"))
            if im.mode == "1":
                return np.array(im.convert("L"))
            raise DecodeError(f"{path}: unsupported image mode {im.mode} (need 8-bit gray or RGB)")
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc


def write_png(path, pixels):
    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path)


def list_images(path, pattern="*.png"):
    root = Path(path)
    if not root.is_dir():
        raise EmptySequence(f"{root} is not a directory")
    return sorted((p for p in root.glob(pattern) if p.is_file()), key=lambda p: natural_key(p.name))


def load_sequence(path, pattern="*.png") -> FrameSequence:
    files = list_images(path, pattern)
    if len(files) < 2:
        raise EmptySequence(f"{path}: {len(files)} file(s) match {pattern!r}, need at least 2")
    frames = []
    for i, f in enumerate(files):
        gray = to_gray(read_image(f))
        if frames and gray.shape != frames[0].pixels.shape:
            h0, w0 = frames[0].pixels.shape
            raise DimensionMismatch(f"{f.name} is {gray.shape[1]}x{gray.shape[0]}, expected {w0}x{h0}")
        frames.append(Frame(i, gray))
    return FrameSequence(tuple(frames), str(path))


def downsample(level: np.ndarray) -> np.ndarray:
    """2x2 box filter; odd trailing rows/columns are dropped."""
    h, w = level.shape
    h2, w2 = h // 2, w // 2
    a = level[: 2 * h2, : 2 * w2].astype(np.float64)
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def build_pyramid(frame, level_count: int) -> Pyramid:
    """Float64 box pyramid of ``frame`` (a Frame or a 2-D array)."""
    px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    if level_count < 1:
        raise TooManyLevels(f"level_count must be >= 1, got {level_count}")
    h, w = px.shape
    k = level_count - 1
    if (w >> k) < MIN_LEVEL_SIZE or (h >> k) < MIN_LEVEL_SIZE:
        raise TooManyLevels(f"{w}x{h} cannot support {level_count} levels of at least {MIN_LEVEL_SIZE}px")
    levels = [px.astype(np.float64)]
    for _ in range(k):
        levels.append(downsample(levels[-1]))
    return Pyramid(levels)
