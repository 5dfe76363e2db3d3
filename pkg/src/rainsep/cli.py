"""Command-line interface: ``detect``, ``derain``, ``synth`` and ``eval``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
import time

import numpy as np
from PIL import UnidentifiedImageError

from . import imaging
from .config import build_config, config_keys, read_config_file
from .detection import run_detection
from .metrics import evaluate
from .separation import SolverError, separate_layers
from .synthesis import synth_rain

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("rainsep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser, sections):
    parser.add_argument("--config", metavar="PATH", help="key=value configuration file")
    for section, key, _, parse in config_keys():
        if section in sections:
            flag = f"{section}.{key}"
            parser.add_argument(f"--{flag}", dest=flag, type=parse, default=None,
                                metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rainsep", description="Single-image rain streak removal.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and timing")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="write the rain-location mask")
    p.add_argument("input")
    p.add_argument("output_mask")
    p.add_argument("--report", metavar="PATH", help="tab-separated per-component report")
    p.add_argument("--figure", metavar="PATH", help="PNG figure of the detection stages")
    _add_config_flags(p, {"detection"})

    p = sub.add_parser("derain", help="remove rain streaks")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--rain-layer", metavar="PATH", help="also write the rain layer")
    p.add_argument("--mask", metavar="PATH", help="also write the rain-location mask")
    p.add_argument("--figure", metavar="PATH", help="PNG figure of input, mask and layers")
    _add_config_flags(p, {"detection", "separation"})

    p = sub.add_parser("synth", help="render synthetic rain onto a clean image")
    p.add_argument("clean")
    p.add_argument("output_rainy")
    p.add_argument("output_mask")
    _add_config_flags(p, {"synth"})

    p = sub.add_parser("eval", help="print PSNR and SSIM of a test image against a reference")
    p.add_argument("clean")
    p.add_argument("test")
    p.add_argument("--figure", metavar="PATH", help="PNG figure with the difference map")
    return parser


def _load_config(args):
    entries = {}
    if getattr(args, "config", None):
        try:
            entries = read_config_file(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
    overrides = {k: v for k, v in vars(args).items() if "." in k}
    try:
        return build_config(entries, overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _load(path):
    try:
        return imaging.load_image(path)
    except UnidentifiedImageError as exc:
        raise OSError(f"cannot decode image {path}") from exc


def _write_all(outputs):
    """Write ``(path, writer)`` pairs atomically as a group.

    Everything goes to temporary files first; on any failure the temporaries
    and any outputs that did not exist beforehand are removed.
    """
    staged, committed = [], []
    try:
        for path, writer in outputs:
            directory = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(prefix=".rainsep-", suffix=os.path.splitext(path)[1],
                                       dir=directory)
            os.close(fd)
            staged.append((tmp, path))
            writer(tmp)
        for tmp, path in staged:
            existed = os.path.exists(path)
            os.replace(tmp, path)
            committed.append((path, existed))
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.remove(tmp)
        for path, existed in committed:
            if not existed and os.path.exists(path):
                os.remove(path)
        raise


def _write_text(lines):
    def writer(path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return writer


def cmd_detect(args) -> int:
    config = _load_config(args)
    image = _load(args.input)
    result = run_detection(image, config.detection)
    log.info("detected %d rain pixels in %d components", result.mask.sum(), result.labeling.count)
    outputs = [(args.output_mask, lambda p: imaging.save_mask(p, result.mask))]
    if args.report:
        outputs.append((args.report, _write_text(list(result.report_lines()))))
    if args.figure:
        from .plotting import save_detection_figure
        outputs.append((args.figure, lambda p: save_detection_figure(p, image, result)))
    _write_all(outputs)
    return EXIT_OK


def cmd_derain(args) -> int:
    config = _load_config(args)
    image = _load(args.input)
    mask = run_detection(image, config.detection).mask
    layers = separate_layers(image, mask, config.separation)
    outputs = [(args.output, lambda p: imaging.save_image(p, layers.background))]
    if args.rain_layer:
        outputs.append((args.rain_layer, lambda p: imaging.save_image(p, layers.rain)))
    if args.mask:
        outputs.append((args.mask, lambda p: imaging.save_mask(p, mask)))
    if args.figure:
        from .plotting import save_derain_figure
        outputs.append((args.figure, lambda p: save_derain_figure(p, image, mask, layers)))
    _write_all(outputs)
    return EXIT_OK


def cmd_synth(args) -> int:
    config = _load_config(args)
    clean = _load(args.clean)
    rainy, truth = synth_rain(clean, config.synth)
    _write_all([
        (args.output_rainy, lambda p: imaging.save_image(p, rainy)),
        (args.output_mask, lambda p: imaging.save_mask(p, truth)),
    ])
    return EXIT_OK


def cmd_eval(args) -> int:
    clean = _load(args.clean)
    test = _load(args.test)
    if clean.shape != test.shape:
        raise UsageError(f"image sizes differ: {clean.shape[:2]} vs {test.shape[:2]}")
    try:
        report = evaluate(clean, test)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.figure:
        from .plotting import save_eval_figure
        _write_all([(args.figure, lambda p: save_eval_figure(p, clean, test, report))])
    print(report)
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "derain": cmd_derain, "synth": cmd_synth, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    start = time.perf_counter()
    try:
        status = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rainsep {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rainsep {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"rainsep {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return status


if __name__ == "__main__":
    sys.exit(main())
