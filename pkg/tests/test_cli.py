import subprocess
import sys

import numpy as np
import pytest

from rainsep import cli
from rainsep.config import build_config, config_keys, dump_config, read_config_file
from rainsep.imaging import load_image, load_mask, save_image, to_uint8
from rainsep.synthesis import RainSynthConfig, synth_rain


@pytest.fixture
def rainy_png(tmp_path, rng):
    clean = 0.2 + 0.3 * np.tile(np.linspace(0, 1, 48), (48, 1))[..., None] * np.ones(3)
    rainy, _ = synth_rain(clean, RainSynthConfig(seed=1, streak_count=12))
    path = tmp_path / "rainy.png"
    save_image(path, rainy)
    return path


@pytest.fixture
def gray_png(tmp_path):
    path = tmp_path / "gray.png"
    save_image(path, np.full((32, 32, 3), 128 / 255))
    return path


# --- configuration ---------------------------------------------------------------

def test_every_field_has_a_key():
    keys = {f"{s}.{k}" for s, k, _, _ in config_keys()}
    assert {"detection.T1", "detection.T2", "detection.mu", "separation.lambda",
            "separation.eta", "separation.irls_iters", "synth.seed"} <= keys


def test_defaults():
    cfg = build_config()
    assert (cfg.detection.T1, cfg.detection.T2, cfg.detection.mu) == (10, 0.08, 2)
    assert (cfg.separation.lambda_, cfg.separation.eta, cfg.separation.irls_iters) == (0.25, 0.1, 3)


def test_precedence_flag_over_file_over_default(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# thresholds\ndetection.T1=12\ndetection.T2 = 0.05\nio.note=x\n")
    entries = read_config_file(path)
    cfg = build_config(entries, {"detection.T2": 0.2, "detection.mu": None})
    assert cfg.detection.T1 == 12
    assert cfg.detection.T2 == 0.2
    assert cfg.detection.mu == 2
    assert cfg.io == {"note": "x"}


def test_dump_round_trip(tmp_path):
    cfg = build_config({"separation.lambda": "0.5", "detection.element": "square1"})
    path = tmp_path / "dump.cfg"
    path.write_text(dump_config(cfg))
    assert build_config(read_config_file(path)) == cfg


@pytest.mark.parametrize("entries", [
    {"detection.bogus": "1"}, {"detection.T1": "abc"}, {"detection.T1": "-3"},
    {"separation.clamp_rain": "maybe"}, {"detection.element": "hexagon"},
])
def test_bad_entries_rejected(entries):
    with pytest.raises(ValueError):
        build_config(entries)


def test_malformed_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("detection.T1\n")
    with pytest.raises(ValueError):
        read_config_file(path)


# --- commands --------------------------------------------------------------------

def test_detect_writes_mask_report_and_figure(rainy_png, tmp_path):
    out, report, fig = tmp_path / "m.png", tmp_path / "r.tsv", tmp_path / "f.png"
    assert cli.main(["detect", str(rainy_png), str(out), "--report", str(report),
                     "--figure", str(fig)]) == 0
    mask = load_mask(out)
    assert mask.shape == (48, 48) and mask.any()
    lines = report.read_text().splitlines()
    assert lines[0].split("\t") == ["id", "N", "lambda1", "lambda2", "D", "W", "stage"]
    assert all(len(l.split("\t")) == 7 for l in lines[1:])
    assert fig.stat().st_size > 0


def test_detect_constant_gray(gray_png, tmp_path):
    out = tmp_path / "m.png"
    assert cli.main(["detect", str(gray_png), str(out)]) == 0
    assert not load_mask(out).any()


def test_missing_input_leaves_no_output(tmp_path):
    out, report = tmp_path / "m.png", tmp_path / "r.tsv"
    status = cli.main(["detect", str(tmp_path / "nope.png"), str(out), "--report", str(report)])
    assert status == 2
    assert not out.exists() and not report.exists()
    assert list(tmp_path.iterdir()) == []


def test_undecodable_input(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    assert cli.main(["derain", str(bad), str(tmp_path / "o.png")]) == 2
    assert not (tmp_path / "o.png").exists()


def test_failed_write_leaves_no_partial_outputs(rainy_png, tmp_path):
    out = tmp_path / "m.png"
    status = cli.main(["detect", str(rainy_png), str(out),
                       "--report", str(tmp_path / "missing_dir" / "r.tsv")])
    assert status == 2
    assert not out.exists()


def test_derain_outputs(rainy_png, tmp_path):
    out, rain, mask = tmp_path / "o.png", tmp_path / "rain.png", tmp_path / "mask.png"
    fig = tmp_path / "fig.png"
    assert cli.main(["derain", str(rainy_png), str(out), "--rain-layer", str(rain),
                     "--mask", str(mask), "--figure", str(fig)]) == 0
    src, background, rain_img = (to_uint8(load_image(p)) for p in (rainy_png, out, rain))
    assert background.shape == src.shape
    assert np.abs(background.astype(int) + rain_img - src).max() <= 1
    assert load_mask(mask).any() and fig.exists()


def test_derain_constant_image_unchanged(gray_png, tmp_path):
    out = tmp_path / "o.png"
    assert cli.main(["derain", str(gray_png), str(out)]) == 0
    diff = np.abs(to_uint8(load_image(out)).astype(int) - to_uint8(load_image(gray_png)))
    assert diff.max() <= 1


def test_derain_deterministic(rainy_png, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    cli.main(["derain", str(rainy_png), str(a)])
    cli.main(["derain", str(rainy_png), str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_derain_flags_change_result(rainy_png, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    cli.main(["derain", str(rainy_png), str(a)])
    cli.main(["derain", str(rainy_png), str(b), "--separation.eta", "1.0"])
    assert a.read_bytes() != b.read_bytes()


def test_synth_and_eval(gray_png, tmp_path, capsys):
    rainy, mask = tmp_path / "r.png", tmp_path / "m.png"
    assert cli.main(["synth", str(gray_png), str(rainy), str(mask),
                     "--synth.seed", "4", "--synth.streak_count", "5"]) == 0
    assert load_mask(mask).any()
    again = tmp_path / "r2.png"
    cli.main(["synth", str(gray_png), str(again), str(tmp_path / "m2.png"),
              "--synth.seed", "4", "--synth.streak_count", "5"])
    assert rainy.read_bytes() == again.read_bytes()

    capsys.readouterr()
    fig = tmp_path / "e.png"
    assert cli.main(["eval", str(gray_png), str(rainy), "--figure", str(fig)]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("PSNR=") and "dB SSIM=0." in line
    assert fig.exists()


def test_eval_identical(gray_png, capsys):
    assert cli.main(["eval", str(gray_png), str(gray_png)]) == 0
    assert capsys.readouterr().out.strip() == "PSNR=infdB SSIM=1.0000"


def test_eval_size_mismatch(gray_png, tmp_path):
    other = tmp_path / "small.png"
    save_image(other, np.zeros((20, 32, 3)))
    assert cli.main(["eval", str(gray_png), str(other)]) == 1


def test_config_file_flag(gray_png, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("synth.streak_count=0\n")
    rainy = tmp_path / "r.png"
    assert cli.main(["synth", str(gray_png), str(rainy), str(tmp_path / "m.png"),
                     "--config", str(cfg)]) == 0
    assert np.array_equal(load_image(rainy), load_image(gray_png))


def test_unknown_config_key_is_usage_error(gray_png, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("detection.nope=1\n")
    assert cli.main(["detect", str(gray_png), str(tmp_path / "m.png"), "--config", str(cfg)]) == 1


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        cli.main(["detect"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["detect", "a.png", "b.png", "--detection.T1", "abc"])
    assert exc.value.code == 1


def test_invalid_config_value_is_usage_error(gray_png, tmp_path):
    assert cli.main(["detect", str(gray_png), str(tmp_path / "m.png"),
                     "--detection.T1", "-5"]) == 1


def test_module_entry_point(gray_png, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rainsep", "eval", str(gray_png), str(gray_png)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("PSNR=inf")
