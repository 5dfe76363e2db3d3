"""Rain-streak location detection.

An over-complete initial map flags every pixel brighter, in all three
channels, than the means of five windows anchored on it.  Its connected
components are then pruned by width (two-class k-means), direction,
color neutrality and elongation, and the survivors are dilated.

Pixel coordinates are ``(row, col)``; the direction of a component is the
angle between its principal axis and the row axis, so rain falling straight
down has direction 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .imaging import DISK1, ELEMENTS, as_image, dilate, label_components

ASPECT_EPS = 1e-9
STAGES = ("initial", "width", "direction", "color", "aspect", "dilated")


@dataclass(frozen=True)
class DetectionConfig:
    window_side: int = 7
    kmeans_iters: int = 100
    T1: float = 10.0
    T2: float = 0.08
    mu: float = 2.0
    c: float = 1.0
    element: frozenset = DISK1
    connectivity: int = 8

    def __post_init__(self):
        if isinstance(self.element, str):
            if self.element not in ELEMENTS:
                raise ValueError(f"unknown structuring element {self.element!r}")
            object.__setattr__(self, "element", ELEMENTS[self.element])
        if self.window_side < 3 or self.window_side % 2 == 0:
            raise ValueError("window_side must be odd and >= 3")
        if self.kmeans_iters < 1:
            raise ValueError("kmeans_iters must be >= 1")
        if not 0 < self.T1 <= 90:
            raise ValueError("T1 must lie in (0, 90]")
        if self.T2 <= 0:
            raise ValueError("T2 must be positive")
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if (0, 0) not in self.element:
            raise ValueError("structuring element must contain the origin")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


# --- initial detection -------------------------------------------------------

def window_placements(side: int):
    """Row/column offset ranges of the five windows around a pixel.

    Returns ``(r0, r1, c0, c1)`` inclusive offsets for the windows placing the
    pixel at the center, top-left, top-right, bottom-left and bottom-right.
    """
    h = side - 1
    half = h // 2
    return (
        (-half, half, -half, half),
        (0, h, 0, h),
        (0, h, -h, 0),
        (-h, 0, 0, h),
        (-h, 0, -h, 0),
    )


FIXED_POINT = 2.0 ** 40


def _exact_levels(image: np.ndarray) -> np.ndarray:
    """Integer intensities so window sums and comparisons are exact.

    8-bit images use their levels directly; anything else is put on a
    2**-40 grid, far below any meaningful intensity difference.
    """
    q = np.rint(image * 255.0)
    if np.array_equal(q / 255.0, image):
        return q.astype(np.int64)
    return np.rint(image * FIXED_POINT).astype(np.int64)


def detect_initial(image, config: DetectionConfig = DetectionConfig()) -> np.ndarray:
    """Initial rain map: strictly brighter than all five window means in every channel.

    Windows are clipped at the image border and averaged over the pixels
    that remain, the center pixel included.
    """
    image = as_image(image)
    values = _exact_levels(image)
    h, w, _ = values.shape
    # int64 wraparound on huge images is harmless: window sums are differences.
    sat = np.zeros((h + 1, w + 1, 3), dtype=values.dtype)
    sat[1:, 1:] = values.cumsum(0).cumsum(1)

    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    flagged = np.ones((h, w), dtype=bool)
    for dr0, dr1, dc0, dc1 in window_placements(config.window_side):
        r0 = np.clip(rows + dr0, 0, h - 1)
        r1 = np.clip(rows + dr1, 0, h - 1) + 1
        c0 = np.clip(cols + dc0, 0, w - 1)
        c1 = np.clip(cols + dc1, 0, w - 1) + 1
        total = sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0]
        count = ((r1 - r0) * (c1 - c0))[..., None]
        flagged &= (values * count > total).all(axis=2)
    return flagged


# --- component shape ---------------------------------------------------------

@dataclass(frozen=True)
class ComponentStats:
    mean: np.ndarray
    covariance: np.ndarray
    lambda1: float
    lambda2: float
    e1: np.ndarray
    e2: np.ndarray
    length: float
    width: float
    direction: float
    size: int = 1


def direction_degrees(e1) -> float:
    """Angle in degrees, in (-90, 90], between ``e1`` and the row axis."""
    a, b = float(e1[0]), float(e1[1])
    if a == 0.0:
        return 90.0
    return math.degrees(math.atan(b / a))


def component_stats(pixels, c: float = 1.0) -> ComponentStats:
    """PCA summary of a component's pixel coordinates.

    The covariance uses divisor N.  ``e1`` is normalized to a nonnegative
    row component and ``e2`` is ``e1`` rotated by +90 degrees.
    """
    z = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    if len(z) == 0:
        raise ValueError("component has no pixels")
    n = len(z)
    mean = z.mean(axis=0)
    centered = z - mean
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    if n == 1 or not np.any(cov):
        lam1 = lam2 = 0.0
        e1 = np.array([1.0, 0.0])
    else:
        evals, evecs = np.linalg.eigh(cov)
        lam2, lam1 = (max(float(x), 0.0) for x in evals)
        e1 = evecs[:, 1]
        if e1[0] < 0 or (e1[0] == 0 and e1[1] < 0):
            e1 = -e1
    e2 = np.array([-e1[1], e1[0]])
    return ComponentStats(
        mean=mean,
        covariance=cov,
        lambda1=lam1,
        lambda2=lam2,
        e1=e1,
        e2=e2,
        length=c * lam1,
        width=c * lam2,
        direction=direction_degrees(e1),
        size=n,
    )


class KMeansResult(NamedTuple):
    assignments: np.ndarray
    centroids: np.ndarray
    degenerate: bool


def kmeans_1d(values, k: int = 2, iters: int = 100) -> KMeansResult:
    """Deterministic Lloyd iterations on scalars.

    Centroids start at the minimum and maximum; a value equidistant from
    two centroids goes to the lower one.  ``degenerate`` is set when there
    are fewer distinct values than clusters.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("values must be nonempty")
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if k == 1:
        return KMeansResult(np.zeros(x.size, dtype=int), np.array([x.mean()]), False)
    if np.unique(x).size < 2:
        return KMeansResult(np.zeros(x.size, dtype=int), np.array([x[0], x[0]]), True)

    centroids = np.array([x.min(), x.max()])
    assign = None
    for _ in range(iters):
        new = (np.abs(x - centroids[1]) < np.abs(x - centroids[0])).astype(int)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(2):
            members = x[assign == j]
            if members.size:
                centroids[j] = members.mean()
    return KMeansResult(assign, centroids, False)


# --- color -------------------------------------------------------------------

class UvColor(NamedTuple):
    u: float
    v: float
    magnitude: float


def uv_transform(mean_rgb) -> UvColor:
    """Chromaticity of a mean color; neutral colors map to the origin.

    A black mean (zero brightness) has no defined chromaticity and is
    reported with infinite magnitude so that it never counts as neutral.
    """
    r, g, b = (float(x) for x in mean_rgb)
    phi = (r + g + b) / 3.0
    if phi <= 0:
        return UvColor(math.nan, math.nan, math.inf)
    u = (2 * phi - g - b) / phi
    v = max((phi - g) / phi, (phi - b) / phi)
    return UvColor(u, v, math.hypot(u, v))


# --- filters -----------------------------------------------------------------

def filter_by_width(ids, stats, config: DetectionConfig = DetectionConfig()):
    """Drop the wider of two k-means width clusters."""
    ids = list(ids)
    if len(ids) < 2:
        return ids
    widths = [config.c * stats[i].lambda2 for i in ids]
    res = kmeans_1d(widths, 2, config.kmeans_iters)
    if res.degenerate:
        return ids
    wide = int(np.argmax(res.centroids))
    return [i for i, a in zip(ids, res.assignments) if a != wide]


def filter_by_direction(ids, stats, T1: float):
    return [i for i in ids if abs(stats[i].direction) < T1]


def filter_by_color(image, labeling, ids, T2: float):
    image = np.asarray(image, dtype=np.float64)
    kept = []
    for i in ids:
        px = labeling.pixel_lists[i - 1]
        mean_rgb = image[px[:, 0], px[:, 1]].mean(axis=0)
        if uv_transform(mean_rgb).magnitude <= T2:
            kept.append(i)
    return kept


def filter_by_aspect(ids, stats, mu: float):
    kept = []
    for i in ids:
        s = stats[i]
        if s.lambda1 > 0 and s.lambda1 / max(s.lambda2, ASPECT_EPS) >= mu:
            kept.append(i)
    return kept


# --- pipeline ----------------------------------------------------------------

@dataclass
class DetectionResult:
    """Everything produced on the way to the final rain mask."""

    labeling: object
    stats: dict
    stage_masks: dict = field(default_factory=dict)
    removed_at: dict = field(default_factory=dict)

    @property
    def mask(self) -> np.ndarray:
        return self.stage_masks["dilated"]

    def report_lines(self):
        """One tab-separated line per component."""
        yield "id\tN\tlambda1\tlambda2\tD\tW\tstage"
        for i in range(1, self.labeling.count + 1):
            s = self.stats[i]
            yield (f"{i}\t{s.size}\t{s.lambda1:.6g}\t{s.lambda2:.6g}\t"
                   f"{s.direction:.4f}\t{s.width:.6g}\t{self.removed_at[i]}")


def run_detection(image, config: DetectionConfig = DetectionConfig()) -> DetectionResult:
    image = as_image(image)
    initial = detect_initial(image, config)
    labeling = label_components(initial, config.connectivity)
    stats = {i: component_stats(px, config.c)
             for i, px in enumerate(labeling.pixel_lists, start=1)}

    result = DetectionResult(labeling=labeling, stats=stats)
    result.stage_masks["initial"] = initial
    ids = list(range(1, labeling.count + 1))
    stages = (
        ("width", lambda ids: filter_by_width(ids, stats, config)),
        ("direction", lambda ids: filter_by_direction(ids, stats, config.T1)),
        ("color", lambda ids: filter_by_color(image, labeling, ids, config.T2)),
        ("aspect", lambda ids: filter_by_aspect(ids, stats, config.mu)),
    )
    for name, stage in stages:
        survivors = stage(ids)
        for i in set(ids) - set(survivors):
            result.removed_at[i] = name
        ids = survivors
        result.stage_masks[name] = labeling.mask_of(ids)
    for i in ids:
        result.removed_at[i] = "kept"
    result.stage_masks["dilated"] = dilate(result.stage_masks["aspect"], config.element)
    return result


def detect_rain(image, config: DetectionConfig = DetectionConfig()) -> np.ndarray:
    """Refined rain-location mask of ``image``."""
    return run_detection(image, config).mask
