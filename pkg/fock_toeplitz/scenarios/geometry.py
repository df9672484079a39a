"""Geometry scenario: the radius function, disk masses, sigma and the geodesic distance."""

import logging
import math

import numpy as np

from ..config import ExperimentConfig
from ..errors import FitFailure, InputError
from ..geometry.geodesic import (
    GeodesicGrid,
    distance_estimate_report,
    geodesic_distance,
    triangle_excess,
)
from ..geometry.potential import (
    PotentialKind,
    christ_fit,
    disk_masses,
    doubling_constant,
    lipschitz_excess,
    rho_ball_excess,
    rho_outside_fit,
    sigma_weight,
)
from ..operators.transforms import TransformField, sigma_disk_mass
from .reports import Report, new_report
from .workbench import Workbench

logger = logging.getLogger(__name__)

GEOMETRY_STREAM = 3


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    modulus = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    return modulus * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, n))


def _radius_checks(bench: Workbench, report: Report, rng: np.random.Generator) -> None:
    p, rf, geo = bench.potential, bench.rf, bench.cfg.geometry
    domain = float(geo["domain"])
    rho = rf(bench.z_grid)
    report.scalar("rho_min", float(rho.min()))
    report.scalar("rho_max", float(rho.max()))
    report.scalar("sigma_weight_at_0", sigma_weight(rf, 0j))

    if p.kind == PotentialKind.GAUSSIAN_ALPHA:
        expected = 1.0 / math.sqrt(2.0 * math.pi * p.params["alpha"])
        report.flag_below("rho_closed_form", float(np.max(np.abs(rho / expected - 1.0))),
                          "closed_form")
    masses = disk_masses(p, bench.z_grid, rho)
    report.flag_below("rho_unit_mass", float(np.max(np.abs(masses - 1.0))), "rho_mass")

    n = int(geo["lipschitz_pairs"])
    z = _uniform_disk(rng, n, domain)
    near = z[: n // 2] + rf(z[: n // 2]) * _uniform_disk(rng, n // 2, 1.0)
    w = np.concatenate([near, _uniform_disk(rng, n - n // 2, domain)])
    report.flag_below("rho_lipschitz", lipschitz_excess(rf, z, w), "lipschitz_slack")

    centers = _uniform_disk(rng, int(geo["centers"]), domain)
    for r in geo["rho_r"]:
        report.flag_below(f"rho_ball_r{r:g}", rho_ball_excess(rf, centers, float(r), rng),
                          "lipschitz_slack")
    for r in geo["sigma_r"]:
        scaled = sigma_disk_mass(rf, centers, float(r)) / float(r) ** 2
        report.scalar(f"sigma_disk_min_r{r:g}", float(scaled.min()))
        report.scalar(f"sigma_disk_max_r{r:g}", float(scaled.max()))
        report.flag_true(f"sigma_disk_lower_r{r:g}",
                         bool(scaled.min() >= report.tolerances["sigma_low"]), "sigma_low")
        report.flag_true(f"sigma_disk_upper_r{r:g}",
                         bool(scaled.max() <= report.tolerances["sigma_high"]), "sigma_high")


def _doubling_checks(bench: Workbench, report: Report, rng: np.random.Generator) -> None:
    p, rf = bench.potential, bench.rf
    domain = float(bench.cfg.geometry["domain"])
    centers = np.concatenate([[0j], _uniform_disk(rng, 7, domain)])
    report.scalar("doubling_constant", doubling_constant(p, centers, [0.25, 0.5, 1.0]))

    pairs = []
    for c in centers:
        for big in (0.5, 1.0):
            for t in (0.1, 0.25, 0.5):
                shift = 0.5 * big * np.exp(2j * np.pi * rng.uniform())
                pairs.append(((complex(c), big), (complex(c + shift), t * big)))
    try:
        fit = christ_fit(p, pairs)
        report.details["christ_fit"] = fit.as_dict()
        report.flag_true("christ_feasible", True)
    except FitFailure as e:
        logger.warning("⚠️  %s", e)
        report.flag_true("christ_feasible", False)

    z = _uniform_disk(rng, 200, domain)
    step = rf(z) * rng.uniform(1.0, 4.0, z.size)
    w = z + step * np.exp(2j * np.pi * rng.uniform(0.0, 1.0, z.size))
    try:
        fit = rho_outside_fit(rf, list(zip(z, w)))
        report.details["rho_outside_fit"] = fit.as_dict()
        report.flag_true("rho_outside_feasible", True)
    except FitFailure as e:
        logger.warning("⚠️  %s", e)
        report.flag_true("rho_outside_feasible", False)


def _geodesic_checks(bench: Workbench, report: Report, rng: np.random.Generator) -> None:
    geo, rf = bench.cfg.geometry, bench.rf
    half = float(geo["geodesic_half_width"])
    grid = GeodesicGrid(rf, half, geo.get("geodesic_spacing"))
    report.details["geodesic_grid"] = {"half_width": half, "spacing": grid.spacing,
                                       "nodes": int(grid.nodes.size)}

    centers = np.concatenate([[0j], _uniform_disk(rng, 2, 0.4 * half)])
    far_pairs = []
    for z in centers:
        for s in np.linspace(1.0, 3.0, 5):
            w = z + s * float(rf(np.array([z]))[0]) * np.exp(2j * np.pi * rng.uniform())
            if max(abs(w.real), abs(w.imag)) < 0.95 * half:
                far_pairs.append((complex(z), complex(w)))
    estimates = []
    for r in geo["distance_r"]:
        try:
            entry = distance_estimate_report(grid, centers, float(r), far_pairs)
        except InputError as e:
            logger.warning("⚠️  distance estimate at r=%g skipped: %s", r, e)
            continue
        estimates.append(entry)
        report.flag_true(f"distance_near_diagonal_r{r:g}", entry["near_diagonal_ok"])
        report.flag_true(f"distance_far_field_r{r:g}", entry["far_field"] is not None)
    report.details["distance_estimates"] = estimates

    triples = _uniform_disk(rng, 30, 0.6 * half).reshape(10, 3)
    report.flag_below("geodesic_triangle", triangle_excess(grid, triples), "metric")
    asymmetry = max(abs(geodesic_distance(grid, a, b) - geodesic_distance(grid, b, a))
                    for a, b, _ in triples)
    report.flag_below("geodesic_symmetry", asymmetry, "metric")
    report.flag_below("geodesic_diagonal", geodesic_distance(grid, triples[0][0], triples[0][0]),
                      "metric")
    if bench.potential.has_constant_laplacian:
        x = min(1.0, 0.5 * half)
        straight = x / float(rf(np.array([0j]))[0])
        report.scalar("geodesic_straight_line_ratio", geodesic_distance(grid, 0j, x) / straight)


def run_geometry(cfg: ExperimentConfig, progress: bool = False) -> Report:
    """Radius-function, disk-mass, sigma and geodesic invariants for the configured potential."""
    bench = Workbench(cfg, progress)
    report = new_report("geometry", cfg)
    report.details["potential"] = bench.potential.describe()
    rng = bench.rng(GEOMETRY_STREAM)
    steps = [_radius_checks, _doubling_checks, _geodesic_checks]
    for step in bench.track(steps, desc="geometry"):
        step(bench, report, rng)
    out = bench.csv_dir("geometry")
    if out is not None:
        TransformField(bench.z_grid, bench.rf(bench.z_grid), "rho").to_csv(out / "rho.csv")
    return report
