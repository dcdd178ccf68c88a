"""Experiment configuration: flat `key = value` text grouped in sections.

    [experiment]
    kind = spectrum

    [geometry]
    name = cross
    params = 5, 5, 5, 5

    [solver]
    h = 0.03125
    modes = 5

Unknown sections or keys are rejected.  Values are typed by SCHEMA and
serialized back in a canonical form so that parse -> dump -> parse is the
identity.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMA", "KINDS", "parse_config",
           "load_config", "dump_config", "DEFAULTS"]

KINDS = ("condition", "spectrum", "sweep", "reduced", "bent-coeffs", "decay", "amin")


class ConfigError(ValueError):
    pass


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


def _float(text):
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {t!r}")
        return t
    return parse


_FMT = ("csv", "json")

SCHEMA = {
    "experiment": {"kind": _choice(*KINDS)},
    "geometry": {"name": str.strip, "params": _floats},
    "solver": {"h": _float, "modes": int, "extrapolate": _bool, "truncation": int,
               "tol": _float},
    "condition": {"trial": _choice("l_shape", "square", "cross", "bent_strip"),
                  "alpha": _float, "eps_coth": _float, "numeric": _bool},
    "sweep": {"variable": str.strip, "start": _float, "stop": _float, "step": _float},
    "amin": {"lo": _float, "hi": _float, "atol": _float},
    "bent": {"alpha": _floats, "N": int, "eps_coth": _float},
    "reduced": {"grid_points": int, "extrapolate": _bool, "tol": _float},
    "output": {"dir": str.strip, "format": _choice(*_FMT), "mesh": _bool, "fields": _bool},
}

DEFAULTS = {
    "solver": {"modes": 1, "extrapolate": True, "truncation": 32, "tol": 1e-8},
    "condition": {"alpha": 1 / 3, "eps_coth": 1e-3, "numeric": False},
    "amin": {"atol": 5e-3},
    "bent": {"N": 1000, "eps_coth": 0.0},
    "reduced": {"grid_points": 20, "extrapolate": False, "tol": 1e-10},
    "output": {"format": "csv", "mesh": False, "fields": False},
}


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)

    def get(self, section: str, key: str, default=None):
        if key in self.sections.get(section, {}):
            return self.sections[section][key]
        return DEFAULTS.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value) -> None:
        _validate_key(section, key)
        self.sections.setdefault(section, {})[key] = value

    @property
    def kind(self):
        return self.get("experiment", "kind")

    def require(self, section: str, key: str):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return v

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.sections == other.sections


def _validate_key(section, key):
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]")


def parse_value(section: str, key: str, text: str):
    _validate_key(section, key)
    try:
        return SCHEMA[section][key](text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = ExperimentConfig()
    for section in cp.sections():
        for key, raw in cp.items(section):
            cfg.sections.setdefault(section, {})[key] = parse_value(section, key, raw)
        cfg.sections.setdefault(section, {})
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section in SCHEMA:                   # canonical section and key order
        if section not in cfg.sections:
            continue
        lines.append(f"[{section}]")
        for key in SCHEMA[section]:
            if key in cfg.sections[section]:
                lines.append(f"{key} = {_format(cfg.sections[section][key])}")
        lines.append("")
    return "\n".join(lines)
