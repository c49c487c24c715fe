"""Command configuration: sectioned ``key = value`` files plus flag overrides.

Sections and keys are fixed by :data:`SCHEMA`; anything else is rejected.
Values are parsed according to the type of their default (tuples are
comma-separated, booleans accept true/false/1/0/yes/no).
"""
import configparser
from dataclasses import fields

from .model import ModelConfig, desk_config
from .training import TrainConfig


class RunConfigError(ValueError):
    """Unknown key, unknown section or unparsable value."""


def _model_defaults():
    base = desk_config().to_dict()
    return {k: tuple(v) if isinstance(v, list) else v for k, v in base.items()}


def _train_defaults():
    tc = TrainConfig()
    return {f.name: getattr(tc, f.name) for f in fields(TrainConfig) if f.name != "seed"}


DATA_DEFAULTS = {
    "n_train": 20000,
    "n_val": 2000,
    "sequence_length": 1,
    "gaussian_sigma": 0.02,
    "outlier_prob": 0.05,
    "outlier_radius": 0.2,
}

RUN_DEFAULTS = {
    "seed": 0,
    "seeds": (0, 1, 2),
    "threads": 0,
    "workers": 1,
}

SCHEMA = {
    "model": _model_defaults(),
    "train": _train_defaults(),
    "data": DATA_DEFAULTS,
    "run": RUN_DEFAULTS,
}


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_scalar(text, like):
    if isinstance(like, bool):
        return _parse_bool(text)
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text.strip()


def parse_value(text, default):
    """Parse ``text`` into the type of ``default``."""
    if isinstance(default, tuple):
        items = [t for t in text.replace("(", "").replace(")", "").split(",") if t.strip()]
        like = default[0] if default else 0
        return tuple(_parse_scalar(t, like) for t in items)
    return _parse_scalar(text, default)


def format_value(value):
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunConfig:
    """Resolved configuration: defaults, then the file, then flags."""

    def __init__(self):
        self.values = {sec: dict(keys) for sec, keys in SCHEMA.items()}

    def set(self, section, key, value):
        if section not in SCHEMA:
            raise RunConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise RunConfigError(f"unknown key {section}.{key}")
        if isinstance(value, str):
            try:
                value = parse_value(value, SCHEMA[section][key])
            except ValueError as exc:
                raise RunConfigError(f"{section}.{key}: {exc}") from exc
        self.values[section][key] = value

    def get(self, section, key):
        return self.values[section][key]

    def load_file(self, path):
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise RunConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, text in parser.items(section):
                self.set(section, key, text)
        return self

    def apply_overrides(self, items):
        """Apply ``section.key=value`` strings."""
        for item in items or ():
            name, sep, text = item.partition("=")
            section, dot, key = name.strip().partition(".")
            if not sep or not dot:
                raise RunConfigError(f"override must look like section.key=value: {item!r}")
            self.set(section, key.strip(), text)
        return self

    def model_config(self):
        try:
            return ModelConfig.from_dict(dict(self.values["model"]))
        except ValueError as exc:
            raise RunConfigError(str(exc)) from exc

    def train_config(self):
        values = dict(self.values["train"])
        values["seed"] = self.get("run", "seed")
        try:
            return TrainConfig.from_dict(values)
        except ValueError as exc:
            raise RunConfigError(str(exc)) from exc

    def snapshot(self):
        """Resolved configuration in the file format (stable key order)."""
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            for key, value in keys.items():
                lines.append(f"{key} = {format_value(value)}")
            lines.append("")
        return "\n".join(lines)


def describe_keys():
    """One line per accepted key, for ``--help``."""
    lines = []
    for section, keys in SCHEMA.items():
        for key, value in keys.items():
            lines.append(f"  {section}.{key} (default: {format_value(value)})")
    return "\n".join(lines)
