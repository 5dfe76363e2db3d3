"""Figure rendering for the CLI report paths."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}


def _panel(ax, img, title):
    if img.ndim == 2:
        ax.imshow(img, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    else:
        ax.imshow(np.clip(img, 0, 1), interpolation="nearest")
    ax.set_title(title)
    ax.set_axis_off()


def save_detection_figure(path, image, result) -> None:
    """Input image followed by the mask after each cascade stage."""
    names = list(result.stage_masks)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(names) + 1, figsize=(2.2 * (len(names) + 1), 2.6))
        _panel(axes[0], image, "input")
        for ax, name in zip(axes[1:], names):
            mask = result.stage_masks[name]
            _panel(ax, mask.astype(float), f"{name} ({int(mask.sum())} px)")
        fig.savefig(path)
        plt.close(fig)


def save_derain_figure(path, image, mask, layers) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(6, 6))
        _panel(axes[0, 0], image, "input")
        _panel(axes[0, 1], mask.astype(float), "rain locations")
        rain = layers.rain
        scale = rain.max() or 1.0
        _panel(axes[1, 0], rain / scale, f"rain layer (x{1 / scale:.1f})")
        _panel(axes[1, 1], layers.background, "background")
        fig.savefig(path)
        plt.close(fig)


def save_eval_figure(path, reference, test, report) -> None:
    diff = np.abs(np.asarray(test) - np.asarray(reference)).mean(axis=-1)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(8, 3))
        _panel(axes[0], reference, "reference")
        _panel(axes[1], test, "test")
        im = axes[2].imshow(diff, cmap="magma", interpolation="nearest")
        axes[2].set_title("|difference|")
        axes[2].set_axis_off()
        fig.colorbar(im, ax=axes[2], fraction=0.046)
        fig.suptitle(str(report))
        fig.savefig(path)
        plt.close(fig)
