"""Trace scenario: tr T_mu from the matrix, from the Berezin integral and in sigma form."""

import logging
from typing import Optional

import numpy as np

from ..config import ExperimentConfig
from ..operators.basis import OrthonormalBasis
from ..operators.symbols import Atomic, SymbolMeasure, area
from ..operators.toeplitz import assemble, identity
from ..operators.transforms import trace_exact, trace_integral, trace_sigma_form
from .reports import Report, new_report
from .workbench import Workbench

logger = logging.getLogger(__name__)


def atomic_trace(basis: OrthonormalBasis, mu: SymbolMeasure) -> Optional[float]:
    """sum_j m_j K_N(a_j, a_j) e^{-2 phi(a_j)} for atomic symbols, else None."""
    if not isinstance(mu, Atomic):
        return None
    diagonal = np.sum(np.abs(basis.evaluate(mu.points)) ** 2, axis=-1)
    return float(mu.masses @ (diagonal * np.exp(-2.0 * basis.potential.phi(mu.points))))


def run_trace(cfg: ExperimentConfig, progress: bool = False) -> Report:
    bench = Workbench(cfg, progress)
    report = new_report("trace", cfg)
    basis = bench.basis
    report.details["basis"] = basis.describe()
    constant_laplacian = bench.potential.has_constant_laplacian
    if not constant_laplacian:
        logger.warning("⚠️  sigma-form trace has no closed-form ratio for %s; reported only",
                       bench.potential.kind.value)

    target = float(report.tolerances["trace_sigma_ratio"])
    eye = identity(basis.dimension)
    report.flag_close("identity.trace", trace_exact(eye), basis.dimension, "trace")
    report.flag_close("identity.trace_integral", trace_integral(eye, basis),
                      basis.dimension, "trace")
    report.flag_close("area.trace", trace_exact(assemble(basis, area())), basis.dimension,
                      "trace")

    for name, mu in bench.track(bench.symbols.items(), desc="trace",
                                total=len(bench.symbols)):
        t = assemble(basis, mu)
        exact = report.scalar(f"{name}.trace", trace_exact(t))
        integral = report.scalar(f"{name}.trace_integral", trace_integral(t, basis))
        sigma = report.scalar(f"{name}.trace_sigma",
                              trace_sigma_form(t, basis, bench.rf, bench.sigma_rule))
        if exact <= 0:
            logger.warning("⚠️  %s has zero trace on the truncated space", name)
            continue
        report.flag_close(f"{name}.trace_integral", integral / exact, 1.0, "trace")

        ratio = report.scalar(f"{name}.trace_sigma_ratio", sigma / exact)
        # Gaussian weights: int mu~ dsigma = 2 pi mu(C) while tr T_mu = mu(C) / pi.
        if constant_laplacian:
            report.flag_close(f"{name}.trace_sigma_ratio", ratio / target, 1.0,
                              "trace_sigma_tol")

        oracle = atomic_trace(basis, mu)
        if oracle is not None:
            report.flag_close(f"{name}.atomic_trace", exact / oracle, 1.0, "trace")
    return report
