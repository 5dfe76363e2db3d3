import math

import numpy as np
import pytest

from rainsep.imaging import from_uint8
from rainsep.metrics import QualityReport, evaluate, luminance, psnr, ssim


def const(level, shape=(16, 16)):
    return np.full(shape + (3,), level / 255.0)


def test_psnr_identical_is_infinite(rng):
    img = rng.random((8, 8, 3))
    assert psnr(img, img) == math.inf


def test_psnr_constant_offset():
    assert psnr(const(0), const(10)) == pytest.approx(10 * math.log10(255 ** 2 / 100))
    assert psnr(const(0), const(10)) == pytest.approx(28.13, abs=0.005)


def test_psnr_symmetric(rng):
    a, b = rng.random((10, 12, 3)), rng.random((10, 12, 3))
    assert psnr(a, b) == psnr(b, a)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(const(0), const(0, (16, 17)))


def test_psnr_decreases_with_nested_noise(rng):
    img = from_uint8(rng.integers(40, 216, (32, 32, 3)))
    noise = rng.standard_normal(img.shape)
    values = [psnr(img, np.clip(img + s * noise, 0, 1)) for s in (0.01, 0.02, 0.05, 0.1)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_ssim_identical(rng):
    img = rng.random((20, 20, 3))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constants():
    expected = (2 * 100 * 150 + 6.5025) / (100 ** 2 + 150 ** 2 + 6.5025)
    assert ssim(const(100), const(150)) == pytest.approx(expected, abs=1e-9)
    assert ssim(const(100), const(150)) == pytest.approx(0.9231, abs=5e-5)


def test_ssim_bounds(rng):
    for _ in range(10):
        a, b = rng.random((24, 24, 3)), rng.random((24, 24, 3))
        assert -1 <= ssim(a, b) <= 1
    assert -1 <= ssim(const(0), const(255)) <= 1


def test_ssim_too_small():
    with pytest.raises(ValueError):
        ssim(const(0, (10, 40)), const(0, (10, 40)))


def test_ssim_matches_skimage(rng):
    from skimage.metrics import structural_similarity

    for _ in range(5):
        a = from_uint8(rng.integers(0, 256, (40, 52, 3)))
        b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
        la, lb = luminance(a), luminance(b)
        full = structural_similarity(la, lb, gaussian_weights=True, sigma=1.5,
                                     use_sample_covariance=False, data_range=255, full=True)[1]
        # skimage averages over a 5-pixel-cropped map; ours covers valid windows only
        assert ssim(a, b) == pytest.approx(full[5:-5, 5:-5].mean(), abs=1e-9)


def test_report_format():
    report = evaluate(const(0), const(10))
    assert str(report) == f"PSNR=28.13dB SSIM={report.ssim:.4f}"
    assert str(QualityReport(math.inf, 1.0)).startswith("PSNR=inf")
