import json
import math

import jsonschema
import numpy as np
import pytest

from fblab.config import DEFAULTS, ConfigError, LabConfig, load_schema
from fblab.report import (
    CASCADE_COLUMNS,
    ExperimentReport,
    csv_text,
    dumps,
    format_float,
    plain,
    validate_report,
)


def test_defaults_roundtrip():
    cfg = LabConfig.load()
    assert cfg.grid.h == 1 / 256 and cfg.grid.dim_n == 2
    assert cfg.constants.c0 == 0.1 and cfg.constants.C_cfg == 10 and cfg.constants.eps_bar == 0.05
    assert cfg.minimize.continuation_schedule == (0.2, 0.1, 0.05, 0.02)
    again = LabConfig.from_dict(cfg.to_dict())
    assert again == cfg
    jsonschema.validate(cfg.to_dict(), load_schema("config.schema.json"))


def test_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"grid": {"dim_n": 3, "per_unit": 32}, "seed": 4}))
    cfg = LabConfig.load(path, {"seed": 9, "constants.c0": 0.2, "grid.per_unit": None})
    assert cfg.grid.dim_n == 3 and cfg.grid.h == 1 / 32
    assert cfg.seed == 9 and cfg.constants.c0 == 0.2


@pytest.mark.parametrize("raw", [
    {"grid": {"dim_n": 4}},
    {"constants": {"tol": 0}},
    {"constants": {"gamma": 0.5}},
    {"minimize": {"continuation_schedule": [0.1, 0.2]}},
    {"bogus": 1},
    {"seed": "x"},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        LabConfig.from_dict(raw)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        LabConfig.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        LabConfig.load(bad)


def test_defaults_dict_matches_schema_keys():
    schema = load_schema("config.schema.json")
    for section, val in DEFAULTS.items():
        assert section in schema["properties"]
        if isinstance(val, dict):
            assert set(val) <= set(schema["properties"][section]["properties"])


def _report():
    r = ExperimentReport("certify", LabConfig.load().to_dict())
    r.add("flatness", {"epsilon": np.float64(0.01), "paper_anchor": "x"}, passed=True)
    r.add("harnack_cascade", {"alpha_estimate": math.inf, "paper_anchor": "y"})
    return r


def test_report_validates_and_is_deterministic():
    a, b = _report(), _report()
    a.validate()
    assert dumps(a.to_dict()) == dumps(b.to_dict())
    d = a.to_dict()
    assert d["certificates"]["harnack_cascade"]["alpha_estimate"] == "inf"
    assert d["passed"] and d["exit_code"] == 0


def test_report_requires_anchor():
    with pytest.raises(ValueError, match="paper_anchor"):
        _report().add("x", {"value": 1})


def test_failed_certificate_sets_exit():
    r = _report()
    r.add("fbgrad", {"paper_anchor": "z"}, passed=False)
    d = r.to_dict()
    assert not d["passed"] and d["exit_code"] == 1
    validate_report(d)


def test_schema_rejects_missing_anchor():
    d = _report().to_dict()
    del d["certificates"]["flatness"]["paper_anchor"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report(d)
    d = _report().to_dict()
    d["provenance"] = {"kind": "snapshot", "hash": "abc"}
    with pytest.raises(jsonschema.ValidationError):
        validate_report(d)


def test_plain_and_csv():
    assert plain({"a": np.array([1.0, np.nan]), "b": np.int64(3)}) == {"a": [1.0, None], "b": 3}
    assert format_float(0.1) == "0.1" and format_float(None) == "" and format_float(True) == "true"
    text = csv_text(CASCADE_COLUMNS, [{"k": 1, "radius": 0.05, "a": 0.0, "b": 0.0,
                                       "width": 0.0, "shrink_factor": 0.0}])
    assert text.splitlines()[0] == "k,radius,a,b,width,shrink_factor"
    assert text.splitlines()[1] == "1,0.05,0.0,0.0,0.0,0.0"
