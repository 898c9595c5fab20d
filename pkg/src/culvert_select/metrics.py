"""Full-reference image quality: PSNR and Gaussian-window SSIM."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, TooSmall
from .imageio import Frame

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    image_ids: tuple = ("", "")
    lpips: float | None = None  # reserved for external tools

    def to_json(self):
        return {"psnr": json_float(self.psnr), "ssim": self.ssim,
                "image_ids": list(self.image_ids), "lpips": self.lpips}


def json_float(x):
    """JSON has no infinity; +inf PSNR is written as the string "inf"."""
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _array(img):
    return img.pixels if isinstance(img, Frame) else np.asarray(img)


def default_peak(a) -> float:
    return 255.0 if np.issubdtype(np.asarray(a).dtype, np.integer) else 1.0


def psnr(a, b, max_value=None) -> float:
    """PSNR in dB; identical inputs give +inf."""
    a = _array(a)
    b = _array(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")
    peak = default_peak(a) if max_value is None else float(max_value)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    k = len(g)
    rows = sliding_window_view(img, k, axis=0) @ g
    return sliding_window_view(rows, k, axis=1) @ g


def ssim_map(a, b, max_value=255.0, window=SSIM_WINDOW, sigma=SSIM_SIGMA):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    g = gaussian_window(window, sigma)
    c1 = (K1 * max_value) ** 2
    c2 = (K2 * max_value) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, max_value=None, window=SSIM_WINDOW, sigma=SSIM_SIGMA) -> float:
    """Mean SSIM over all positions where the window fits entirely.

    Colour inputs (H, W, C) average the per-channel SSIM.
    """
    a = _array(a)
    b = _array(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < window:
        raise TooSmall(f"SSIM needs images of at least {window}x{window}, got {a.shape[1]}x{a.shape[0]}")
    peak = default_peak(a) if max_value is None else float(max_value)
    if a.ndim == 3:
        return float(np.mean([ssim_map(a[..., c], b[..., c], peak, window, sigma).mean()
                              for c in range(a.shape[2])]))
    return float(ssim_map(a, b, peak, window, sigma).mean())


def compare_images(reference, test, ids=("reference", "test")) -> MetricReport:
    ref = _array(reference)
    tst = _array(test)
    if ref.shape != tst.shape:
        raise DimensionMismatch(f"shape {ref.shape} vs {tst.shape}")
    return MetricReport(psnr(ref, tst), ssim(ref, tst), tuple(ids))
