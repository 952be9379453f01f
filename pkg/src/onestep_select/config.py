"""Versioned YAML configuration for the benchmark harness.

One structured file drives an experiment; every knob has a default, user
files override by deep merge, and the merged result is validated against
a JSON schema before anything runs.  schema_version is checked first so
old files fail loudly rather than half-working.
"""

from __future__ import annotations

import copy

import jsonschema
import yaml

SCHEMA_VERSION = 1

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "experiment": {
        "replications": 10,
        "master_seed": 0,
        "burnin": {"kind": "fraction", "fraction": 0.5},
        "rmse": {"enabled": True, "n_test": None},
    },
    "sim": {
        "n": 300,
        "p": 1000,
        "rho": 0.0,
        "s_star": 10,
        "signal_low": 2.0,
        "signal_high": 3.0,
        "family": "logistic",
    },
    "net": {
        "lambda2": 0.0,
        "folds": 5,
        "grid_size": 30,
        "grid_ratio": 1e-3,
    },
    "olap": {"u": 0.8, "cache_cap": None},
    "chain": {"steps": 3000, "J": 100, "init": "lasso", "thin": 1},
    "da": {
        "enabled": False,
        "steps": 2000,
        "rho0": None,
        "mala_step": 0.1,
        "adapt": True,
    },
    "coupling": {
        "enabled": False,
        "records": 30,
        "L": 1,
        "max_steps": 100000,
        "threshold": 0.25,
        "J": 1,
        "init": "lasso",
    },
}

_POS_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}
_UNIT_OPEN = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "replications": _POS_INT,
                "master_seed": _SEED,
                "burnin": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["fraction", "mixing"]},
                        "fraction": _UNIT_OPEN,
                    },
                },
                "rmse": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "enabled": {"type": "boolean"},
                        "n_test": {"type": ["integer", "null"], "minimum": 1},
                    },
                },
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": _POS_INT,
                "p": _POS_INT,
                "rho": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "s_star": {"type": "integer", "minimum": 0},
                "signal_low": {"type": "number", "exclusiveMinimum": 0},
                "signal_high": {"type": "number", "exclusiveMinimum": 0},
                "family": {"enum": ["logistic", "poisson", "gaussian"]},
            },
        },
        "net": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda2": {"type": "number", "minimum": 0},
                "folds": {"type": "integer", "minimum": 2},
                "grid_size": _POS_INT,
                "grid_ratio": _UNIT_OPEN,
            },
        },
        "olap": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "u": {"type": "number", "exclusiveMinimum": 0},
                "cache_cap": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "chain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "steps": _POS_INT,
                "J": _POS_INT,
                "init": {"enum": ["lasso", "null", "truth"]},
                "thin": _POS_INT,
            },
        },
        "da": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "steps": _POS_INT,
                "rho0": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "mala_step": {"type": "number", "exclusiveMinimum": 0},
                "adapt": {"type": "boolean"},
            },
        },
        "coupling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "records": _POS_INT,
                "L": _POS_INT,
                "max_steps": _POS_INT,
                "threshold": _UNIT_OPEN,
                "J": _POS_INT,
                "init": {"enum": ["lasso", "null", "truth"]},
            },
        },
    },
}


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate_config(raw):
    """Merge a partial config onto the defaults and validate the result.

    Raises jsonschema.ValidationError on schema violations and ValueError
    on cross-field inconsistencies the schema cannot express.
    """
    if not isinstance(raw, dict):
        raise ValueError("config must be a mapping")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"config schema_version must be {SCHEMA_VERSION}, "
            f"got {raw.get('schema_version')!r}"
        )
    merged = _deep_merge(DEFAULT_CONFIG, raw)
    jsonschema.validate(merged, CONFIG_SCHEMA)
    sim = merged["sim"]
    if sim["s_star"] > sim["p"]:
        raise ValueError(f"sim.s_star={sim['s_star']} exceeds sim.p={sim['p']}")
    if sim["signal_low"] >= sim["signal_high"]:
        raise ValueError("sim.signal_low must be below sim.signal_high")
    if merged["chain"]["J"] > sim["p"]:
        raise ValueError("chain.J cannot exceed sim.p")
    if merged["coupling"]["J"] > sim["p"]:
        raise ValueError("coupling.J cannot exceed sim.p")
    burnin = merged["experiment"]["burnin"]
    if burnin["kind"] == "mixing" and not merged["coupling"]["enabled"]:
        raise ValueError(
            "experiment.burnin.kind 'mixing' requires coupling.enabled true"
        )
    return merged


def load_config(path):
    """Read a YAML config file, merge with defaults, and validate."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {"schema_version": SCHEMA_VERSION}
    return validate_config(raw)
