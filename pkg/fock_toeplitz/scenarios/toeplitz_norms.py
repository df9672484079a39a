"""Toeplitz scenario: operator norm, kernel action statistic and Berezin sup per symbol."""

import logging
from typing import Dict, Optional

import numpy as np

from ..config import ExperimentConfig
from ..operators.basis import OrthonormalBasis, random_coefficients
from ..operators.symbols import Atomic, Scaled, SymbolMeasure, area
from ..operators.toeplitz import (
    assemble,
    compactness_indicator,
    export_spectrum_csv,
    kernel_action_statistic,
    operator_norm,
    quadratic_form,
)
from ..operators.transforms import berezin_field, berezin_power_check
from .reports import Report, new_report
from .workbench import POLYNOMIAL_STREAM, Workbench

logger = logging.getLogger(__name__)

QUADRATIC_FORM_SAMPLES = 20


def rank_one_eigenvalue(basis: OrthonormalBasis, mu: SymbolMeasure) -> Optional[float]:
    """m K_N(a, a) e^{-2 phi(a)} when mu = m delta_a, else None."""
    if not isinstance(mu, Atomic) or mu.points.size != 1:
        return None
    a = mu.points[:1]
    diagonal = float(np.sum(np.abs(basis.evaluate(a)) ** 2))
    return float(mu.masses[0]) * diagonal * float(np.exp(-2.0 * basis.potential.phi(a))[0])


def _identity_checks(bench: Workbench, report: Report) -> None:
    basis, z = bench.basis, bench.z_grid
    for c in bench.cfg.scales:
        mu = Scaled(c, area())
        t = assemble(basis, mu)
        defect = float(np.max(np.abs(t.matrix / c - np.eye(basis.dimension))))
        report.flag_below(f"area_c{c:g}.identity_defect", defect, "identity")
        report.flag_close(f"area_c{c:g}.norm", operator_norm(t) / c, 1.0, "identity")
        for p in bench.cfg.kernel_exponents:
            m = kernel_action_statistic(t, basis, p, z)
            report.flag_close(f"area_c{c:g}.M_p{p:g}", m / c, 1.0, "identity")
        sup = berezin_field(bench.kernel, mu, z).sup
        report.flag_close(f"area_c{c:g}.sup_berezin", sup / c, 1.0, "identity")


def run_toeplitz(cfg: ExperimentConfig, progress: bool = False) -> Report:
    """||T_mu||, M_{p,mu} and sup mu~ across the symbol family, with a compactness proxy."""
    bench = Workbench(cfg, progress)
    report = new_report("toeplitz", cfg)
    basis, z = bench.basis, bench.z_grid
    report.details["basis"] = basis.describe()
    coeffs = random_coefficients(basis, QUADRATIC_FORM_SAMPLES, bench.rng(POLYNOMIAL_STREAM))
    large_basis = bench.basis_of_degree(2 * cfg.degree)
    out = bench.csv_dir("toeplitz")

    _identity_checks(bench, report)
    flat = compactness_indicator(assemble(basis, area()), assemble(large_basis, area()))
    report.details["area.compactness"] = flat.as_dict()

    per_symbol: Dict[str, Dict[str, float]] = {}
    for name, mu in bench.track(bench.symbols.items(), desc="toeplitz",
                                total=len(bench.symbols)):
        t = assemble(basis, mu)
        values = {"norm": operator_norm(t)}
        for p in cfg.kernel_exponents:
            values[f"M_p{p:g}"] = kernel_action_statistic(t, basis, p, z)
        values["sup_berezin"] = berezin_field(bench.kernel, mu,
                                              np.concatenate([z, mu.atoms()])).sup
        for key, value in values.items():
            report.scalar(f"{name}.{key}", value)
        per_symbol[name] = values

        lhs, rhs = quadratic_form(t, basis, mu, coeffs)
        gap = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))
        report.flag_below(f"{name}.quadratic_form", gap, "quadratic_form")

        for p in cfg.schatten_exponents:
            report.flag_below(f"{name}.berezin_power_p{p:g}",
                              berezin_power_check(t, basis, p, z), "jensen")

        expected = rank_one_eigenvalue(basis, mu)
        if expected is not None:
            report.flag_close(f"{name}.rank_one_norm", values["norm"] / expected, 1.0,
                              "rank_one")

        compact = compactness_indicator(t, assemble(large_basis, mu))
        report.details[f"{name}.compactness"] = compact.as_dict()
        if out is not None:
            export_spectrum_csv(t, out / f"{name}_spectrum.csv")

    names = sorted(per_symbol)
    positive = [n for n in names if per_symbol[n]["norm"] > 0]
    report.flag_true("norm_order_preserved", all(
        (per_symbol[n]["norm"] > 0) == (per_symbol[n]["sup_berezin"] > 0) for n in names))
    if positive:
        entry = report.ratio("norm/sup_berezin", [per_symbol[n]["norm"]
                                                  / per_symbol[n]["sup_berezin"]
                                                  for n in positive])
        report.flag_spread("norm/sup_berezin.stable", entry)
        for p in cfg.kernel_exponents:
            key = f"M_p{p:g}"
            entry = report.ratio(f"{key}/norm", [per_symbol[n][key] / per_symbol[n]["norm"]
                                                 for n in positive])
            report.flag_spread(f"{key}/norm.stable", entry)
    return report
