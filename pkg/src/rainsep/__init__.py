"""Single-image rain streak removal with a quasi-sparse gradient prior."""

from .detection import DetectionConfig, detect_initial, detect_rain, run_detection
from .imaging import dilate, label_components, load_image, save_image
from .metrics import evaluate, psnr, ssim
from .separation import SeparationConfig, separate_layers
from .synthesis import RainSynthConfig, synth_rain

__all__ = [
    "DetectionConfig",
    "RainSynthConfig",
    "SeparationConfig",
    "detect_initial",
    "detect_rain",
    "dilate",
    "evaluate",
    "label_components",
    "load_image",
    "psnr",
    "run_detection",
    "save_image",
    "separate_layers",
    "ssim",
    "synth_rain",
]
