"""Run configuration: built-in defaults, ``key=value`` files and overrides.

Keys are ``<section>.<field>``, e.g. ``detection.T1=10`` or
``separation.lambda=0.25``.  Later sources win: defaults, then the config
file, then command-line flags.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .detection import DetectionConfig
from .imaging import ELEMENTS
from .separation import SeparationConfig
from .synthesis import RainSynthConfig

SECTIONS = {
    "detection": DetectionConfig,
    "separation": SeparationConfig,
    "synth": RainSynthConfig,
}


def parse_bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_element(text: str):
    if text not in ELEMENTS:
        raise ValueError(f"unknown structuring element {text!r}; choose from {sorted(ELEMENTS)}")
    return text


def key_name(f: dataclasses.Field) -> str:
    # ``lambda_`` is spelled ``lambda`` in files and flags.
    return f.name.rstrip("_")


def field_parser(cls, f: dataclasses.Field):
    default = getattr(cls(), f.name)
    if f.name == "element":
        return parse_element
    if isinstance(default, bool):
        return parse_bool
    if isinstance(default, int):
        return int
    return float


def config_keys():
    """Yield ``(section, key, field name, parser)`` for every configurable field."""
    for section, cls in SECTIONS.items():
        for f in dataclasses.fields(cls):
            yield section, key_name(f), f.name, field_parser(cls, f)


@dataclass(frozen=True)
class RunConfig:
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    separation: SeparationConfig = field(default_factory=SeparationConfig)
    synth: RainSynthConfig = field(default_factory=RainSynthConfig)
    io: dict = field(default_factory=dict)


def read_config_file(path) -> dict:
    """Parse a flat ``key=value`` file; ``#`` starts a comment."""
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            entries[key.strip()] = value.strip()
    return entries


def build_config(file_entries=None, overrides=None) -> RunConfig:
    """Combine defaults, file entries (strings) and overrides (already typed).

    Unknown keys are rejected, except ``io.*`` entries which are collected
    verbatim into ``RunConfig.io``.
    """
    file_entries = dict(file_entries or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    known = {f"{s}.{k}": (s, name, parse) for s, k, name, parse in config_keys()}

    values = {s: {} for s in SECTIONS}
    io = {}
    for key, raw in file_entries.items():
        if key.startswith("io."):
            io[key[3:]] = raw
            continue
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        section, name, parse = known[key]
        values[section][name] = parse(raw)
    for key, value in overrides.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        section, name, _ = known[key]
        values[section][name] = value
    return RunConfig(io=io, **{s: SECTIONS[s](**values[s]) for s in SECTIONS})


def dump_config(config: RunConfig) -> str:
    lines = []
    for section, key, name, _ in config_keys():
        value = getattr(getattr(config, section), name)
        if name == "element":
            value = next((k for k, v in ELEMENTS.items() if v == value), value)
        lines.append(f"{section}.{key}={value}")
    return "\n".join(lines) + "\n"
