"""End-to-end scenario runs on the trimmed config; marked slow."""

import copy
import itertools
import json
import math

import pytest

from fock_toeplitz.config import ExperimentConfig
from fock_toeplitz.errors import InputError
from fock_toeplitz.main import run_scenarios, scenario_names
from fock_toeplitz.scenarios.carleson import run_carleson
from fock_toeplitz.scenarios.geometry import run_geometry
from fock_toeplitz.scenarios.schatten import QUANTITIES, pair_window, run_schatten
from fock_toeplitz.scenarios.toeplitz_norms import run_toeplitz
from fock_toeplitz.scenarios.trace import run_trace

pytestmark = pytest.mark.slow

# r^2 rho^2 for the Gaussian weight at the trimmed config's r = 0.4.
SMALL_S = 0.4 ** 2 / (2.0 * math.pi)


def _passed(report, name):
    return report.flags[name]["passed"]


def test_trace_scenario_passes(small_cfg):
    report = run_trace(small_cfg)
    assert report.passed, report.failed_flags
    assert report.scalars["pair.trace_sigma_ratio"] == pytest.approx(2.0 * math.pi ** 2,
                                                                     rel=1e-4)
    assert report.scalars["dirac.trace"] == pytest.approx(1.0 / math.pi, rel=1e-10)


def test_geometry_scenario_passes(small_cfg):
    report = run_geometry(small_cfg)
    assert report.passed, report.failed_flags
    assert report.details["christ_fit"]["exponent"] == pytest.approx(0.5)
    assert report.scalars["doubling_constant"] == pytest.approx(4.0, rel=1e-8)


def test_toeplitz_scenario_flags(small_cfg):
    report = run_toeplitz(small_cfg)
    for name in ("area_c0.5.identity_defect", "area_c4.sup_berezin", "dirac.rank_one_norm",
                 "dirac.quadratic_form", "pair.quadratic_form", "norm_order_preserved"):
        assert _passed(report, name), name
    assert report.scalars["dirac.norm"] == pytest.approx(1.0 / math.pi, rel=1e-10)


def test_schatten_scenario_flags(small_cfg):
    report = run_schatten(small_cfg)
    for name in ("lattice_r0.4.covering", "lattice_r0.4.comparison_bound",
                 "partition.separated", "partition.classes_within_M_R",
                 "partition.counting_bound", "dirac.rank_one_schatten", "dirac.homogeneity"):
        assert _passed(report, name), name
    assert report.scalars["dirac.p1.a"] == pytest.approx(1.0 / math.pi, rel=1e-10)
    assert "p1.a/c" in report.ratios


def test_schatten_flags_every_quantity_pair(small_cfg):
    report = run_schatten(small_cfg)
    overlap = int(report.scalars["lattice_r0.4.overlap_index"])
    bound = report.scalars["point_mass_bound"]
    assert bound == pytest.approx(math.exp(SMALL_S) / SMALL_S, rel=1e-8)
    pairs = list(itertools.combinations(QUANTITIES, 2))
    assert len(pairs) == 6
    for p in small_cfg.schatten_exponents:
        for x, y in pairs:
            flag = report.flags[f"p{p:g}.{x}/{y}.stable"]
            assert flag["passed"], (p, x, y, flag)
            assert flag["limit"] == pytest.approx(
                10.0 * pair_window(x, y, p, bound, overlap))
            assert f"p{p:g}.{y}/{x}.stable" not in report.flags
    # p = 1: (b) and (c) both integrate to mu(C) / rho^2; the window is the plain one.
    assert report.flags["p1.b/c.stable"]["limit"] == 10.0
    assert report.flags["p1.b/c.stable"]["value"] < 1.5


def test_pair_window():
    assert pair_window("a", "c", 2.0, 40.0, 12) == 1.0
    assert pair_window("b", "d", 2.0, 40.0, 12) == 12.0
    assert pair_window("a", "b", 1.0, 40.0, 12) == 1.0
    assert pair_window("b", "c", 0.5, 16.0, 12) == pytest.approx(4.0)
    assert pair_window("c", "d", 2.0, 40.0, 12) == pytest.approx(480.0)


def test_carleson_scenario_flags(small_cfg):
    report = run_carleson(small_cfg)
    for key in ("sup_averaging", "sup_berezin", "embedding_p1", "embedding_p2"):
        assert _passed(report, f"area.{key}"), key
    for name in ("dirac", "gaussian", "pair"):
        for check in ("averaging_shift", "homogeneity", "berezin_bound.single_constant"):
            assert _passed(report, f"{name}.{check}"), (name, check)
    for name in ("sup_order_preserved", "sup_averaging/sup_berezin.single_constant",
                 "averaging/berezin_bound.single_constant", "dirac.vanishing_agree"):
        assert _passed(report, name), name
    assert report.scalars["point_mass_bound"] == pytest.approx(math.exp(SMALL_S) / SMALL_S,
                                                               rel=1e-8)


def test_carleson_point_mass_is_the_extremal_symbol(small_cfg):
    """A unit mass at a grid point gives mu^_r / mu~ = 1 / (r^2 rho^2) there."""
    report = run_carleson(small_cfg)
    assert report.scalars["dirac.berezin_bound"] == pytest.approx(1.0 / SMALL_S, rel=1e-8)
    # Smooth symbols stay far below the point-mass constant, so no window fits both.
    assert report.scalars["gaussian.berezin_bound"] < 3.0
    assert report.ratios["averaging/berezin_bound"].spread > 10.0


def _scalars_at_degree(config, degree):
    raw = copy.deepcopy(config)
    raw["degree"] = degree
    cfg = ExperimentConfig.from_dict(raw)
    scalars = {}
    for run in (run_trace, run_toeplitz, run_schatten):
        report = run(cfg)
        scalars.update({f"{report.scenario}:{k}": v for k, v in report.scalars.items()})
    return scalars


def test_scalars_do_not_depend_on_the_truncation_degree(small_config):
    coarse = _scalars_at_degree(small_config, 30)
    fine = _scalars_at_degree(small_config, 60)
    # The tail estimate compares against the half-degree matrix by construction.
    shared = [k for k in coarse if k in fine and not k.endswith(".tail")]
    assert len(shared) > 40
    drift = {k: abs(coarse[k] - fine[k]) / max(abs(fine[k]), 1e-300) for k in shared}
    worst = max(drift, key=drift.get)
    assert drift[worst] < 1e-4, (worst, coarse[worst], fine[worst])


def test_run_scenarios_writes_reports(small_cfg):
    results = run_scenarios(small_cfg, ["trace"])
    path = results["paths"]["trace"]
    assert path == small_cfg.output_dir / "trace.json"
    doc = json.loads(path.read_text())
    assert doc["scenario"] == "trace"
    assert "seconds" not in doc["provenance"]
    assert results["timings"]["trace"] >= 0
    assert results["passed"]
    assert results["failed_flags"] == {"trace": []}


def test_reports_are_byte_identical_across_runs(small_cfg):
    first = run_scenarios(small_cfg, ["trace"])["paths"]["trace"].read_bytes()
    second = run_scenarios(small_cfg, ["trace"])["paths"]["trace"].read_bytes()
    assert first == second


def test_run_scenarios_rejects_unknown_names(small_cfg):
    with pytest.raises(InputError):
        run_scenarios(small_cfg, ["nope"])
    with pytest.raises(InputError):
        run_scenarios(small_cfg, [])
    assert scenario_names() == ["geometry", "carleson", "toeplitz", "schatten", "trace"]
