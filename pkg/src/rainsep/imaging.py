"""Image and mask containers, PNG I/O, connected components and dilation.

Images are plain ``float64`` arrays of shape ``(H, W, 3)`` holding channel
intensities in ``[0, 1]``; masks are ``bool`` arrays of shape ``(H, W)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

# (dr, dc) offsets; both must contain the origin.
DISK1 = frozenset({(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)})
SQUARE1 = frozenset((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1))

ELEMENTS = {"disk1": DISK1, "square1": SQUARE1}

_STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def as_image(data) -> np.ndarray:
    """Validate and return ``data`` as an ``(H, W, 3)`` float64 image."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite intensities")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    return img


def as_mask(data, shape=None) -> np.ndarray:
    mask = np.asarray(data, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"expected an (H, W) mask, got shape {mask.shape}")
    if shape is not None and mask.shape != tuple(shape[:2]):
        raise ValueError(f"mask shape {mask.shape} does not match image {tuple(shape[:2])}")
    return mask


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize ``[0, 1]`` intensities to 8 bits, rounding half up."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def from_uint8(data: np.ndarray) -> np.ndarray:
    return np.asarray(data, dtype=np.float64) / 255.0


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return from_uint8(arr)


def save_image(path, img: np.ndarray) -> None:
    Image.fromarray(to_uint8(img), mode="RGB").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def save_mask(path, mask: np.ndarray) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


@dataclass(frozen=True)
class ComponentLabeling:
    """Connected components of a mask.

    ``labels`` is 0 on background and ``1..count`` on components, numbered
    in raster-scan order of each component's first pixel.  ``pixel_lists[p]``
    holds the ``(row, col)`` coordinates of component ``p + 1`` as an
    ``(N, 2)`` integer array in raster order.
    """

    labels: np.ndarray
    count: int
    pixel_lists: list

    def mask_of(self, ids) -> np.ndarray:
        """Mask covering the components whose 1-based ids are in ``ids``."""
        keep = np.zeros(self.count + 1, dtype=bool)
        keep[np.asarray(list(ids), dtype=np.intp)] = True
        keep[0] = False
        return keep[self.labels]


def label_components(mask, connectivity: int = 8) -> ComponentLabeling:
    mask = as_mask(mask)
    if connectivity not in _STRUCTURE:
        raise ValueError("connectivity must be 4 or 8")
    # ndimage.label numbers features in raster order of their first pixel.
    labels, count = ndimage.label(mask, structure=_STRUCTURE[connectivity])
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(count + 2))
    width = mask.shape[1]
    pixel_lists = []
    for p in range(1, count + 1):
        idx = order[bounds[p]:bounds[p + 1]]
        pixel_lists.append(np.column_stack(np.divmod(idx, width)))
    return ComponentLabeling(labels=labels, count=int(count), pixel_lists=pixel_lists)


def _shifted(mask: np.ndarray, dr: int, dc: int) -> np.ndarray:
    # out[i, j] = mask[i - dr, j - dc], False where that falls outside.
    h, w = mask.shape
    out = np.zeros_like(mask)
    if abs(dr) >= h or abs(dc) >= w:
        return out
    out[max(dr, 0):h + min(dr, 0), max(dc, 0):w + min(dc, 0)] = \
        mask[max(-dr, 0):h + min(-dr, 0), max(-dc, 0):w + min(-dc, 0)]
    return out


def dilate(mask, element=DISK1) -> np.ndarray:
    """Binary dilation by an offset set that contains the origin."""
    mask = as_mask(mask)
    element = frozenset(element)
    if (0, 0) not in element:
        raise ValueError("structuring element must contain the origin")
    out = mask.copy()
    for dr, dc in element:
        if dr or dc:
            out |= _shifted(mask, dr, dc)
    return out
