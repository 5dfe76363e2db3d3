"""Synthetic rain: anti-aliased neutral streaks composited onto clean images."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .imaging import as_image

MASK_THRESHOLD = 0.02


@dataclass(frozen=True)
class RainSynthConfig:
    seed: int = 0
    streak_count: int = 120
    angle_mean: float = 0.0
    angle_jitter: float = 4.0
    length_min: float = 15.0
    length_max: float = 40.0
    thickness_min: float = 1.0
    thickness_max: float = 2.0
    intensity_min: float = 0.15
    intensity_max: float = 0.45
    blur_sigma: float = 0.5

    def __post_init__(self):
        if self.streak_count < 0:
            raise ValueError("streak_count must be >= 0")
        if self.angle_jitter < 0 or self.blur_sigma < 0:
            raise ValueError("angle_jitter and blur_sigma must be >= 0")
        for lo, hi, name in ((self.length_min, self.length_max, "length"),
                             (self.thickness_min, self.thickness_max, "thickness"),
                             (self.intensity_min, self.intensity_max, "intensity")):
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} range must be nonempty and nonnegative")
        if self.intensity_max > 1:
            raise ValueError("intensity upper bound must be <= 1")


def draw_segment(field: np.ndarray, p0, p1, thickness: float, intensity: float) -> None:
    """Add an anti-aliased capsule from ``p0`` to ``p1`` (row, col) into ``field``.

    Coverage falls off linearly over one pixel at the capsule boundary.
    """
    h, w = field.shape
    reach = thickness / 2 + 1
    r0 = max(int(math.floor(min(p0[0], p1[0]) - reach)), 0)
    r1 = min(int(math.ceil(max(p0[0], p1[0]) + reach)) + 1, h)
    c0 = max(int(math.floor(min(p0[1], p1[1]) - reach)), 0)
    c1 = min(int(math.ceil(max(p0[1], p1[1]) + reach)) + 1, w)
    if r0 >= r1 or c0 >= c1:
        return
    rr, cc = np.mgrid[r0:r1, c0:c1].astype(np.float64)
    d = np.subtract(p1, p0, dtype=np.float64)
    seg2 = d @ d
    t = ((rr - p0[0]) * d[0] + (cc - p0[1]) * d[1]) / seg2 if seg2 > 0 else 0.0
    t = np.clip(t, 0.0, 1.0)
    dist = np.hypot(rr - (p0[0] + t * d[0]), cc - (p0[1] + t * d[1]))
    coverage = np.clip(thickness / 2 + 0.5 - dist, 0.0, 1.0)
    field[r0:r1, c0:c1] += intensity * coverage


def streak_field(shape, config: RainSynthConfig) -> np.ndarray:
    h, w = shape
    rng = np.random.default_rng(config.seed)
    field = np.zeros((h, w))
    for _ in range(config.streak_count):
        angle = math.radians(config.angle_mean + rng.uniform(-config.angle_jitter, config.angle_jitter))
        length = rng.uniform(config.length_min, config.length_max)
        thickness = rng.uniform(config.thickness_min, config.thickness_max)
        intensity = rng.uniform(config.intensity_min, config.intensity_max)
        center = (rng.uniform(0, h), rng.uniform(0, w))
        # Angle is measured from the row axis: 0 falls straight down.
        half = 0.5 * length * np.array([math.cos(angle), math.sin(angle)])
        draw_segment(field, center - half, center + half, thickness, intensity)
    if config.blur_sigma > 0:
        field = gaussian_filter(field, config.blur_sigma)
    # Sub-threshold tails are dropped so every changed pixel is a mask pixel.
    return np.where(field > MASK_THRESHOLD, field, 0.0)


def synth_rain(clean, config: RainSynthConfig = RainSynthConfig()):
    """Return ``(rainy, truth_mask)`` for a clean image."""
    clean = as_image(clean)
    field = streak_field(clean.shape[:2], config)
    rainy = np.minimum(clean + field[..., None], 1.0)
    return rainy, field > MASK_THRESHOLD
