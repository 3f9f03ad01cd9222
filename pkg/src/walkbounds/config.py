"""Experiment configuration: per-command defaults, schema validation, JSON loading."""

import copy
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .functions import function_from_config

COMMANDS = ("mp-verify", "markov-audit", "manifold-build", "spectrum-compare", "walk-experiment", "tail-audit")

_FN = {"anyOf": [{"type": "string"}, {"type": "object"}]}
_INTERVAL = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_SEED = {"type": "integer", "minimum": 0}
_MANIFOLD = {"anyOf": [{"type": "string", "enum": ["circle", "sphere2", "flat-torus", "torus"]},
                       {"type": "object", "required": ["kind"]}]}

DEFAULTS = {
    "mp-verify": {
        "seed": 0,
        "ensembles": 200,
        "max_steps": 5,
        "max_side": 9,
        "interval": [1.0, 2.0],
        "pairs": [["square", "identity"], ["exp", "identity"], ["square", "sqrt"], ["cube", "identity"]],
        "c_r": [-2.0, -0.5, 0.5, 2.0],
        "envelope_intervals": 100,
        "envelope_points": 1000,
    },
    "markov-audit": {
        "seed": 0,
        "count": 1000,
        "sizes": [2, 8],
        "qs": [0.0, 0.25, 0.5, 0.75],
        "ub2_q": 0.5,
        "max_reproducers": 50,
    },
    "manifold-build": {
        "seed": 0,
        "manifold": "circle",
        "N": 64,
        "kappa": None,
        "kappa_factor": 3.0,
    },
    "spectrum-compare": {
        "seed": 0,
        "manifold": "circle",
        "N": 256,
        "kappa": None,
        "kappa_factor": 3.0,
        "i_max": 5,
    },
    "walk-experiment": {
        "seed": 0,
        "instances": 20,
        "sizes": [2, 5],
        "max_steps": 3,
        "shape": [2],
        "interval": [1.0, 2.0],
        "g": "square",
        "h": "identity",
        "psi": {"kind": "identity"},
        "norm": {"kind": "spectral"},
        "paths": 100_000,
    },
    "tail-audit": {
        "seed": 0,
        "paths": 100_000,
        "plan": None,
        "modes": None,
    },
}

SCHEMAS = {
    "mp-verify": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED, "ensembles": {"type": "integer", "minimum": 0},
            "max_steps": {"type": "integer", "minimum": 1}, "max_side": {"type": "integer", "minimum": 2},
            "interval": _INTERVAL, "pairs": {"type": "array", "items": {"type": "array", "items": _FN,
                                                                           "minItems": 2, "maxItems": 2}},
            "c_r": {"type": "array", "items": {"type": "number"}},
            "envelope_intervals": {"type": "integer", "minimum": 0},
            "envelope_points": {"type": "integer", "minimum": 2},
        },
    },
    "markov-audit": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED, "count": {"type": "integer", "minimum": 0},
            "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2, "maxItems": 2},
            "qs": {"type": "array", "items": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}},
            "ub2_q": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "max_reproducers": {"type": "integer", "minimum": 0},
        },
    },
    "manifold-build": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED, "manifold": _MANIFOLD, "N": {"type": "integer", "minimum": 4},
            "kappa": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "kappa_factor": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "spectrum-compare": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED, "manifold": _MANIFOLD, "N": {"type": "integer", "minimum": 4},
            "kappa": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "kappa_factor": {"type": "number", "exclusiveMinimum": 0},
            "i_max": {"type": "integer", "minimum": 1},
        },
    },
    "walk-experiment": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED, "instances": {"type": "integer", "minimum": 0},
            "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2, "maxItems": 2},
            "max_steps": {"type": "integer", "minimum": 1},
            "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "interval": _INTERVAL, "g": _FN, "h": _FN,
            "psi": {"anyOf": [{"type": "string"}, {"type": "object"}]},
            "norm": {"anyOf": [{"type": "string"}, {"type": "object"}]},
            "paths": {"type": "integer", "minimum": 1},
        },
    },
    "tail-audit": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "seed": _SEED, "paths": {"type": "integer", "minimum": 1},
            "plan": {"type": ["object", "null"], "properties": {"seed": _SEED, "entries": {"type": "array"}}},
            "modes": {"type": ["array", "null"],
                      "items": {"type": "string", "enum": ["graph-exact", "manifold-derived"]}},
        },
    },
}


def _path(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _check_functions(cfg):
    specs = []
    for key in ("g", "h"):
        if key in cfg:
            specs.append(cfg[key])
    for pair in cfg.get("pairs", []):
        specs.extend(pair)
    for spec in specs:
        function_from_config(spec)


def materialize(command, raw=None):
    """Defaults filled in, then validated; unknown function names raise :class:`ConfigError`."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = copy.deepcopy(DEFAULTS[command])
    cfg.update(copy.deepcopy(raw))
    errors = sorted(jsonschema.Draft202012Validator(SCHEMAS[command]).iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config field {_path(e)}: {e.message}")
    _check_functions(cfg)
    return cfg


def parse_json(text, source="<config>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_config(path, command):
    """Read, default-fill and validate a config file for ``command``."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    return materialize(command, parse_json(p.read_text(encoding="utf-8"), str(p)))
