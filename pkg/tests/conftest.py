import numpy as np
import pytest

from rainsep.imaging import from_uint8, to_uint8

# Bundled scikit-image photographs used as clean scenes, one synthesis seed each.
CORPUS = (
    "camera",
    "coins",
    "moon",
    "clock",
    "rocket",
    "hubble_deep_field",
    "immunohistochemistry",
    "retina",
    "cell",
    "page",
)


def load_clean(name, size=256):
    """Center square crop of a scikit-image sample, resized and quantized to 8 bits."""
    from skimage import data, transform

    img = getattr(data, name)()
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    img = img[..., :3]
    h, w = img.shape[:2]
    s = min(h, w)
    img = img[(h - s) // 2:(h - s) // 2 + s, (w - s) // 2:(w - s) // 2 + s]
    img = transform.resize(img, (size, size), anti_aliasing=True)
    return from_uint8(to_uint8(img))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
