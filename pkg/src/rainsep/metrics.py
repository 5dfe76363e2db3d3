"""PSNR and SSIM on the 8-bit intensity scale."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .imaging import to_uint8

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2, L = 0.01, 0.03, 255.0
BT601 = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    ssim: float

    def __str__(self):
        return f"PSNR={self.psnr_db:.2f}dB SSIM={self.ssim:.4f}"


def _levels(img) -> np.ndarray:
    return to_uint8(np.asarray(img, dtype=np.float64)).astype(np.float64)


def _check_shapes(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"image shapes differ: {np.shape(a)} vs {np.shape(b)}")


def psnr(a, b) -> float:
    """PSNR in dB over all pixels and channels; ``inf`` for identical images."""
    _check_shapes(a, b)
    mse = np.mean((_levels(a) - _levels(b)) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(L * L / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _valid_filter(x, g):
    pad = (len(g) - 1) // 2
    out = correlate1d(correlate1d(x, g, axis=0), g, axis=1)
    return out[pad:x.shape[0] - pad, pad:x.shape[1] - pad]


def luminance(img) -> np.ndarray:
    levels = _levels(img)
    return levels @ BT601 if levels.ndim == 3 else levels


def ssim(a, b) -> float:
    """Mean SSIM over every valid 11x11 Gaussian window of the BT.601 luminance."""
    _check_shapes(a, b)
    x, y = luminance(a), luminance(b)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    g = gaussian_window()
    c1, c2 = (K1 * L) ** 2, (K2 * L) ** 2
    mx, my = _valid_filter(x, g), _valid_filter(y, g)
    sxx = _valid_filter(x * x, g) - mx * mx
    syy = _valid_filter(y * y, g) - my * my
    sxy = _valid_filter(x * y, g) - mx * my
    smap = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    return float(np.clip(smap.mean(), -1.0, 1.0))


def evaluate(reference, test) -> QualityReport:
    return QualityReport(psnr(reference, test), ssim(reference, test))
