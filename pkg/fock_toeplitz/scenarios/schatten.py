"""Schatten scenario: spectrum, L^p(dsigma) norms of both transforms and lattice sums."""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..config import ExperimentConfig
from ..errors import LatticeError
from ..operators.lattice import (
    Lattice,
    build_lattice,
    counting_bound,
    is_separated,
    lattice_comparison_check,
    m_r_index,
    partition_separated,
    probe_grid,
    save_lattice,
)
from ..operators.symbols import Scaled, SymbolMeasure, averaging_transform
from ..operators.toeplitz import (
    ToeplitzMatrix,
    assemble,
    schatten_norm,
    schatten_power,
    schatten_tail_estimate,
)
from ..operators.transforms import (
    TransformField,
    averaging_field,
    berezin_field,
    point_mass_bound,
    sigma_disk_mass,
    sigma_lp_power,
    vanishing_detector,
)
from .reports import Report, new_report
from .toeplitz_norms import rank_one_eigenvalue
from .workbench import Workbench

logger = logging.getLogger(__name__)

QUANTITIES = ("a", "b", "c", "d")
PARTITION_RADIUS = 2.0
PARTITION_WINDOW = 1.0
COMPARISON_RADIUS = 0.5


@dataclass
class SchattenFields:
    """Everything the four quantities need for one symbol at one averaging radius."""

    matrix: ToeplitzMatrix
    berezin: TransformField
    averaging: TransformField
    lattice_values: np.ndarray
    lattice_sigma: np.ndarray


def schatten_fields(bench: Workbench, mu: SymbolMeasure, r: float,
                    lattice: Lattice) -> SchattenFields:
    sigma_rule = bench.sigma_rule
    return SchattenFields(
        matrix=assemble(bench.basis, mu),
        berezin=berezin_field(bench.kernel, mu, sigma_rule.nodes, bench.basis.rule),
        averaging=averaging_field(mu, bench.rf, r, bench.averaging_rule(r).nodes),
        lattice_values=averaging_transform(mu, bench.rf, r, lattice.points),
        lattice_sigma=sigma_disk_mass(bench.rf, lattice.points, r),
    )


def lattice_sums(fields: SchattenFields, p: float) -> Tuple[float, float]:
    """(sum_j mu^_r(z_j)^p, sum_j mu^_r(z_j)^p sigma(D^r(z_j)))."""
    values = fields.lattice_values
    powered = np.where(values > 0, values, 0.0) ** p
    return float(powered.sum()), float(powered @ fields.lattice_sigma)


def schatten_quantities(bench: Workbench, fields: SchattenFields, r: float,
                        p: float) -> Dict[str, float]:
    raw, weighted = lattice_sums(fields, p)
    return {
        "a": schatten_power(fields.matrix, p),
        "b": sigma_lp_power(fields.averaging, p, bench.rf, bench.averaging_rule(r)),
        "c": sigma_lp_power(fields.berezin, p, bench.rf, bench.sigma_rule),
        "d": weighted,
        "d_raw": raw,
    }


class LatticeCache:
    """One greedy lattice per radius, built on first use."""

    def __init__(self, bench: Workbench):
        self.bench = bench
        self._lattices: Dict[float, Lattice] = {}

    def __call__(self, r: float) -> Lattice:
        if r not in self._lattices:
            cfg = self.bench.cfg
            self._lattices[r] = build_lattice(self.bench.rf, r, cfg.lattice_domain,
                                              cfg.probe_refinement)
            self.bench.logger.info("lattice r=%g: %d points, N_r=%d", r,
                                   self._lattices[r].size, self._lattices[r].overlap_index)
        return self._lattices[r]


def _lattice_checks(bench: Workbench, report: Report, lattices: LatticeCache) -> None:
    cfg = bench.cfg
    out = bench.csv_dir("schatten")
    built: Dict[float, Lattice] = {}
    for r in cfg.lattice_radii:
        try:
            lat = lattices(r)
        except LatticeError as e:
            logger.warning("⚠️  %s", e)
            report.flag_true(f"lattice_r{r:g}.covering", False)
            continue
        built[r] = lat
        report.scalar(f"lattice_r{r:g}.points", lat.size)
        report.scalar(f"lattice_r{r:g}.overlap_index", lat.overlap_index)
        report.flag_true(f"lattice_r{r:g}.covering", lat.covering_certificate == 1.0)
        if out is not None:
            save_lattice(lat, out / f"lattice_r{r:g}.csv")
    if not built:
        return

    r = max(built)
    lat = built[r]
    if r < 1:
        probes = probe_grid(bench.rf, r, cfg.lattice_domain, cfg.probe_refinement)
        n_big, bound = lattice_comparison_check(lat, COMPARISON_RADIUS, probes)
        report.scalar(f"lattice_r{r:g}.overlap_R{COMPARISON_RADIUS:g}", n_big)
        report.flag_true(f"lattice_r{r:g}.comparison_bound", n_big <= bound)

    # Partition a window of the lattice; whole-lattice passes are quadratic in its size.
    window = lat.points[np.abs(lat.points) <= PARTITION_WINDOW]
    classes = partition_separated(window, PARTITION_RADIUS, bench.rf)
    m_r = m_r_index(window, PARTITION_RADIUS, bench.rf)
    report.scalar("partition.classes", len(classes))
    report.scalar("partition.M_R", m_r)
    report.flag_true("partition.separated",
                     all(is_separated(c, PARTITION_RADIUS, bench.rf) for c in classes))
    report.flag_true("partition.classes_within_M_R", len(classes) <= m_r)
    if r < 1:
        report.flag_true("partition.counting_bound",
                         m_r <= counting_bound(PARTITION_RADIUS, r, lat.overlap_index))


def pair_window(x: str, y: str, p: float, bound: float, overlap: int) -> float:
    """Factor on ratio_window for the spread of x/y over a symbol family.

    (a) and (c) are kernel-side, (b) and (d) averaging-side. Averaging against Berezin costs up
    to the point-mass constant per power away from p = 1; (d) against (b) costs up to the
    lattice overlap index.
    """
    widen = 1.0
    if "d" in (x, y):
        widen *= max(1, overlap)
    if {x, y} & {"a", "c"} and {x, y} & {"b", "d"}:
        widen *= max(1.0, bound) ** abs(p - 1.0)
    return widen


def _matrix_ratios(report: Report, table: Dict[str, Dict[float, Dict[str, float]]],
                   exponents: List[float], bound: float, overlap: int) -> None:
    names = sorted(table)
    for p in exponents:
        for x, y in itertools.permutations(QUANTITIES, 2):
            values = [table[n][p][x] / table[n][p][y] for n in names if table[n][p][y] > 0]
            if not values:
                continue
            entry = report.ratio(f"p{p:g}.{x}/{y}", values)
            # x/y and y/x share a spread; one flag per pair.
            if x < y:
                report.flag_spread(f"p{p:g}.{x}/{y}.stable", entry,
                                   widen=pair_window(x, y, p, bound, overlap))
        report.flag_true(f"p{p:g}.finite_together", all(
            len({np.isfinite(table[n][p][q]) and table[n][p][q] > 0 for q in QUANTITIES}) == 1
            for n in names))


def run_schatten(cfg: ExperimentConfig, progress: bool = False) -> Report:
    """The four Schatten quantities (a)-(d) per symbol, their ratios and homogeneity."""
    bench = Workbench(cfg, progress)
    report = new_report("schatten", cfg)
    report.details["basis"] = bench.basis.describe()
    exponents = list(cfg.schatten_exponents)
    lattices = LatticeCache(bench)
    half_basis = bench.basis_of_degree(max(1, cfg.degree // 2))
    annuli = bench.usable_annuli()
    ring = bench.annulus_points(annuli)

    _lattice_checks(bench, report, lattices)
    base_lattice = lattices(cfg.r)
    bound = 0.0
    if bench.z_grid.size:
        bound = float(np.max(point_mass_bound(bench.kernel, bench.rf, cfg.r, bench.z_grid)))
    report.scalar("point_mass_bound", bound)

    table: Dict[str, Dict[float, Dict[str, float]]] = {}
    for name, mu in bench.track(bench.symbols.items(), desc="schatten",
                                total=len(bench.symbols)):
        if len(annuli) >= 3:
            decay = vanishing_detector(berezin_field(bench.kernel, mu, ring), annuli,
                                       cfg.tolerances["vanish"])
            report.details[f"{name}.vanishing"] = decay.as_dict()
            if not decay.vanishing:
                logger.warning("⚠️  %s does not look vanishing; Schatten sums are truncation "
                               "dependent", name)

        fields = schatten_fields(bench, mu, cfg.r, base_lattice)
        t_half = assemble(half_basis, mu)
        table[name] = {}
        for p in exponents:
            q = schatten_quantities(bench, fields, cfg.r, p)
            table[name][p] = q
            for key, value in q.items():
                report.scalar(f"{name}.p{p:g}.{key}", value)
            report.scalar(f"{name}.p{p:g}.tail",
                          schatten_tail_estimate(fields.matrix, t_half, p))

        expected = rank_one_eigenvalue(bench.basis, mu)
        if expected is not None:
            worst = max(abs(schatten_norm(fields.matrix, p) / expected - 1.0) for p in exponents)
            report.flag_below(f"{name}.rank_one_schatten", worst, "rank_one")

        drift = 0.0
        for c in cfg.scales:
            scaled = schatten_fields(bench, Scaled(c, mu), cfg.r, base_lattice)
            for p in exponents:
                q = schatten_quantities(bench, scaled, cfg.r, p)
                for key in QUANTITIES:
                    base = table[name][p][key]
                    if base > 0:
                        drift = max(drift, abs(q[key] / (c ** p * base) - 1.0))
        report.flag_below(f"{name}.homogeneity", drift, "homogeneity")

        # Lattice refinement: (d)/(b) at every lattice radius.
        refinements: Dict[float, List[float]] = {p: [] for p in exponents}
        for r in cfg.lattice_radii:
            try:
                lat = lattices(r)
            except LatticeError:
                continue
            f_r = fields if r == cfg.r else schatten_fields(bench, mu, r, lat)
            for p in exponents:
                q = schatten_quantities(bench, f_r, r, p)
                if q["b"] > 0:
                    refinements[p].append(q["d"] / q["b"])
        for p, refinement in refinements.items():
            if refinement:
                entry = report.ratio(f"{name}.p{p:g}.lattice_d/b", refinement)
                report.flag_spread(f"{name}.p{p:g}.lattice_d/b.stable", entry)

    _matrix_ratios(report, table, exponents, bound, base_lattice.overlap_index)
    return report
