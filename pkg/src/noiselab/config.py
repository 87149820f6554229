"""Plain-text ``key = value`` run configuration with ``[section]`` headers.

Every key except ``[train] epochs`` has a default.  Unknown sections or keys
are errors so typos never pass silently.
"""

import configparser
from pathlib import Path

from noiselab.errors import ConfigError

REQUIRED = object()

# section -> key -> (type, default, help)
SCHEMA = {
    "data": {
        "source": (str, "blobs", "train-clean input: blobs | csv | idx"),
        "classes": (int, 4, "blobs: class count C"),
        "n_per_class": (int, 250, "blobs: examples per class"),
        "dim": (int, 8, "blobs: feature dimension"),
        "confusability": (float, 0.5, "blobs: pair overlap in [0, 1)"),
        "seed": (int, 0, "blobs: generator seed"),
        "csv": (str, "", "csv: dataset CSV path"),
        "idx_images": (str, "", "idx: image file"),
        "idx_labels": (str, "", "idx: label file"),
        "test_fraction": (float, 0.2, "held-out share for train-clean"),
        "split_seed": (int, 0, "train/test split seed"),
        "standardize": (bool, True, "z-score features with train statistics"),
        "train": (str, "", "train-noisy: noisy training dataset CSV"),
        "test": (str, "", "train-noisy: test dataset CSV"),
    },
    "model": {
        "kind": (str, "mlp", "mlp | cnn-s"),
        "hidden": (str, "64,64", "comma-separated hidden widths (cnn-s: one width)"),
        "conv_channels": (str, "8,16", "cnn-s: output channels of the two conv blocks"),
        "seed": (int, 0, "weight-init seed"),
    },
    "train": {
        "epochs": (int, REQUIRED, "number of epochs"),
        "batch_size": (int, 128, "mini-batch size"),
        "lr": (float, 0.001, "initial Adam learning rate"),
        "schedule": (str, "decay1", "constant | decay1 | decay2"),
        "shuffle_seed": (int, 0, "mini-batch order seed"),
        "method": (str, "standard", "standard | coteaching | sce | gce | bootsoft"),
        "beta1": (float, 0.9, "Adam first-moment decay"),
        "beta2": (float, 0.999, "Adam second-moment decay"),
        "eps": (float, 1e-8, "Adam epsilon"),
        "sce_a": (float, 0.1, "SCE cross-entropy weight"),
        "sce_b": (float, 1.0, "SCE reverse cross-entropy weight"),
        "sce_log_zero": (float, -4.0, "SCE value substituted for log 0"),
        "gce_q": (float, 0.7, "GCE exponent"),
        "boot_beta": (float, 0.95, "bootstrap-soft label weight"),
        "coteach_tau": (float, 0.2, "co-teaching forget rate"),
        "coteach_ramp": (int, 10, "co-teaching epochs to reach the full forget rate"),
    },
}


def _convert(section, key, typ, raw: str):
    try:
        if typ is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return typ(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def parse_config(text: str, required=(("train", "epochs"),)) -> dict:
    """Resolve a config text against :data:`SCHEMA`; returns section -> key -> value."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__", inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
    resolved = {}
    for section, keys in SCHEMA.items():
        resolved[section] = {}
        for key, (typ, default, _) in keys.items():
            if parser.has_option(section, key):
                resolved[section][key] = _convert(section, key, typ, parser[section][key])
            elif default is REQUIRED:
                if (section, key) in required:
                    raise ConfigError(f"missing required config key {key!r} in [{section}]")
                resolved[section][key] = None
            else:
                resolved[section][key] = default
    return resolved


def load_config(path, required=(("train", "epochs"),)) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, required)


def dump_config(resolved: dict) -> str:
    """Serialize a resolved config; parsing the result reproduces it."""
    lines = []
    for section, keys in resolved.items():
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        for key, value in keys.items():
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def int_tuple(text: str, what: str):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{what}: expected comma-separated integers, got {text!r}") from exc
