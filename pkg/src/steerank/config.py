"""Run-config loading: JSON schema validation, defaults, --set overrides.

A config file may specify any subset of keys; unknown keys are
rejected (typos should fail loudly, not silently fall back to a
default). Validation happens twice: on the raw file and again after
command-line overrides.
"""

import copy
import importlib.resources
import json

import jsonschema

from .datagen import DATAGEN_DEFAULTS


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    "data_dir": "data",
    "datagen": dict(DATAGEN_DEFAULTS),
    "model": {
        "d_emb": 16,
        "d_hid": 16,
        "head_hidden": 32,
        "enc1_hidden": 32,
        "enc2_hidden": 32,
        "heads": 2,
        "local_window": 3,
        "eval_emb": 16,
        "eval_hidden": 32,
        "fc_hidden": 16,
        "fc_out": 8,
        "attn_width": 16,
        "eval_rnn": 16,
        "mlp5_hidden": 64,
        "hyper_hidden": 64,
        # decoder rows are centered and soft-clipped to (-bound, bound)
        # before the softmax; None restores unbounded linear scores
        "score_bound": 6.0,
    },
    "train": {
        "preset": "lambda",
        "steps": 20000,
        "batch_size": 64,
        "eval_steps": 2000,
        "eval_batch": 64,
        "lr_actor": 1e-3,
        "lr_hypernet": 1e-3,
        "lr_evaluator": 1e-3,
        "clip": 5.0,
        "joint_wbar": True,
        "checkpoint_every": 0,
    },
    "utilities": [],
    "eval": {"k": 5, "weights": None, "n_samples": None},
    "sweep": {"grid": 11, "axis": None},
}


def _schema():
    ref = importlib.resources.files("steerank") / "schema" / "run_config_v1.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate(config):
    try:
        jsonschema.validate(config, _schema())
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {e.message}") from e
    return config


def merge_defaults(config):
    """Defaults overlaid with the user's values. Lists replace, dicts
    merge one level deep (the schema nests at most one level)."""
    out = copy.deepcopy(DEFAULTS)
    for key, val in config.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key].update(copy.deepcopy(val))
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None, overrides=()):
    """Validated, fully-defaulted config from a JSON file plus
    dotted key=value overrides."""
    raw = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    validate(raw)
    config = merge_defaults(raw)
    for item in overrides:
        apply_override(config, item)
    validate(config)
    return config


def apply_override(config, item):
    """Apply one ``dotted.path=value`` override in place. Values parse
    as JSON when possible, else as a bare string. Integer segments
    index into lists."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, _, raw_val = item.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw_val)
    except json.JSONDecodeError:
        value = raw_val
    parts = key.split(".")
    node = config
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            node = _index(node, part, key)
        elif isinstance(node, dict):
            if part not in node:
                node[part] = {}
            node = node[part]
        else:
            raise ConfigError(
                f"override {key!r}: {'.'.join(parts[:i + 1])} is not a container")
    last = parts[-1]
    if isinstance(node, list):
        idx = _index_pos(node, last, key)
        node[idx] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"override {key!r}: parent is not a container")


def _index_pos(node, part, key):
    try:
        idx = int(part)
    except ValueError:
        raise ConfigError(f"override {key!r}: {part!r} is not a list index") from None
    if not 0 <= idx < len(node):
        raise ConfigError(f"override {key!r}: index {idx} out of range")
    return idx


def _index(node, part, key):
    return node[_index_pos(node, part, key)]
