"""Config merging, schema validation, and cross-field checks."""

import copy

import jsonschema
import pytest
import yaml

from onestep_select import DEFAULT_CONFIG, load_config, validate_config
from onestep_select.config import SCHEMA_VERSION

MINIMAL = {"schema_version": SCHEMA_VERSION}


def test_defaults_validate():
    merged = validate_config(MINIMAL)
    assert merged == DEFAULT_CONFIG


def test_schema_version_checked_before_anything_else():
    # even a file full of junk must fail on the version line first
    with pytest.raises(ValueError, match="schema_version"):
        validate_config({"schema_version": 2, "sim": {"n": "junk"}})
    with pytest.raises(ValueError, match="schema_version"):
        validate_config({"sim": {"n": 100}})
    with pytest.raises(ValueError, match="must be a mapping"):
        validate_config(["schema_version", 1])


def test_deep_merge_preserves_siblings():
    merged = validate_config({"schema_version": 1, "sim": {"n": 50, "p": 150}})
    assert merged["sim"]["n"] == 50
    assert merged["sim"]["p"] == 150
    # untouched keys in the same section keep their defaults
    assert merged["sim"]["s_star"] == DEFAULT_CONFIG["sim"]["s_star"]
    assert merged["chain"] == DEFAULT_CONFIG["chain"]


def test_merge_does_not_mutate_defaults():
    before = copy.deepcopy(DEFAULT_CONFIG)
    validate_config({"schema_version": 1, "net": {"folds": 3}})
    assert DEFAULT_CONFIG == before


def test_unknown_keys_rejected():
    with pytest.raises(jsonschema.ValidationError):
        validate_config({"schema_version": 1, "typo_section": {}})
    with pytest.raises(jsonschema.ValidationError):
        validate_config({"schema_version": 1, "sim": {"nn": 100}})


def test_type_and_range_violations():
    with pytest.raises(jsonschema.ValidationError):
        validate_config({"schema_version": 1, "sim": {"n": 0}})
    with pytest.raises(jsonschema.ValidationError):
        validate_config({"schema_version": 1, "sim": {"rho": 1.0}})
    with pytest.raises(jsonschema.ValidationError):
        validate_config({"schema_version": 1, "olap": {"u": 0}})
    with pytest.raises(jsonschema.ValidationError):
        validate_config({"schema_version": 1, "chain": {"init": "random"}})
    with pytest.raises(jsonschema.ValidationError):
        validate_config(
            {"schema_version": 1, "experiment": {"burnin": {"fraction": 1.5}}}
        )


def test_cross_field_checks():
    with pytest.raises(ValueError, match="s_star.*exceeds"):
        validate_config({"schema_version": 1, "sim": {"p": 5, "s_star": 6}})
    with pytest.raises(ValueError, match="signal_low"):
        validate_config(
            {"schema_version": 1,
             "sim": {"signal_low": 3.0, "signal_high": 2.0}}
        )
    with pytest.raises(ValueError, match="chain.J"):
        validate_config({"schema_version": 1, "sim": {"p": 50}})
    with pytest.raises(ValueError, match="coupling.J"):
        validate_config(
            {"schema_version": 1, "sim": {"p": 5, "s_star": 2},
             "chain": {"J": 5}, "coupling": {"J": 6}}
        )
    with pytest.raises(ValueError, match="burnin.*mixing"):
        validate_config(
            {"schema_version": 1,
             "experiment": {"burnin": {"kind": "mixing"}}}
        )
    # and the consistent variant passes
    merged = validate_config(
        {"schema_version": 1,
         "experiment": {"burnin": {"kind": "mixing"}},
         "coupling": {"enabled": True}}
    )
    assert merged["experiment"]["burnin"]["kind"] == "mixing"


def test_load_config_yaml(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        "schema_version: 1\nsim:\n  n: 120\n  p: 200\n  family: gaussian\n"
    )
    merged = load_config(path)
    assert merged["sim"]["n"] == 120
    assert merged["sim"]["family"] == "gaussian"
    assert merged["net"]["folds"] == 5


def test_load_config_empty_file_is_defaults(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("")
    assert load_config(path) == DEFAULT_CONFIG


def test_load_config_bad_version(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("schema_version: 99\n")
    with pytest.raises(ValueError, match="schema_version"):
        load_config(path)
