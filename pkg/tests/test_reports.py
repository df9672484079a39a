import json
import math

import numpy as np
import pytest

from fock_toeplitz.errors import ConfigError
from fock_toeplitz.scenarios.reports import RatioEntry, Report, jsonable, new_report


@pytest.fixture
def report():
    return Report("demo", {"ratio_window": 10.0, "identity": 1e-6, "jensen": 1e-9})


def test_flags_pass_and_fail(report):
    assert report.flag_close("identity", 1.0 + 1e-8, 1.0, "identity")
    assert not report.flag_below("jensen", 1e-3, "jensen")
    assert report.flag_true("covering", True)
    assert not report.passed
    assert report.failed_flags == ["jensen"]


def test_spread_flag(report):
    stable = report.ratio("a/b", [1.0, 2.0, 4.0])
    assert stable.spread == 4.0
    assert report.flag_spread("a/b.stable", stable)
    wild = report.ratio("c/d", [0.0, 1.0])
    assert wild.spread == math.inf
    assert not report.flag_spread("c/d.stable", wild)
    with pytest.raises(ValueError):
        report.ratio("empty", [])


def test_widened_spread_flag(report):
    entry = report.ratio("b/c", [1.0, 50.0])
    assert not report.flag_spread("b/c.stable", entry)
    assert report.flag_spread("b/c.widened", entry, widen=8.0)
    flag = report.flags["b/c.widened"]
    assert flag["limit"] == 80.0
    assert flag["widen"] == 8.0
    assert "widen" not in report.flags["b/c.stable"]
    with pytest.raises(ValueError):
        report.flag_spread("b/c.narrowed", entry, widen=0.5)


def test_unknown_threshold_is_a_config_error(report):
    with pytest.raises(ConfigError):
        report.flag_below("x", 0.0, "missing")


def test_jsonable_handles_numpy_and_nonfinite():
    converted = jsonable({"a": np.float64(math.inf), "b": np.arange(3), "c": 1 + 2j,
                          "d": (np.bool_(True), np.int64(4))})
    assert converted == {"a": "inf", "b": [0, 1, 2], "c": [1.0, 2.0], "d": [True, 4]}


def test_write_produces_strict_json(report, tmp_path):
    report.scalar("norm", 0.5)
    report.ratio("a/b", [1.0, 3.0])
    path = report.write(tmp_path / "out")
    doc = json.loads(path.read_text())
    assert path.name == "demo.json"
    assert doc["format"] == "fock-toeplitz-report"
    assert doc["scalars"] == {"norm": 0.5}
    assert doc["ratios"]["a/b"]["median"] == 2.0


def test_new_report_carries_provenance(small_cfg):
    rep = new_report("trace", small_cfg)
    assert rep.provenance["config_hash"] == small_cfg.hash
    assert rep.provenance["seed"] == 0
    assert "numpy" in rep.provenance["versions"]
    assert rep.tolerances["identity"] == 1e-6
    assert isinstance(RatioEntry((1.0,)).as_dict()["values"], list)
