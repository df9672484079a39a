"""Objects shared by every scenario: potential, radius field, basis, kernels and symbols."""

import logging
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
from tqdm import tqdm

from ..config import ExperimentConfig
from ..geometry.potential import Potential, RadiusField, potential_from_spec
from ..geometry.quadrature import PlaneRule
from ..operators.basis import KernelEvaluator, OrthonormalBasis, build_basis
from ..operators.lattice import min_rho
from ..operators.symbols import (
    Scaled,
    SymbolMeasure,
    Sum,
    dirac,
    gaussian_density,
    indicator_disk,
    random_atomic,
    symbol_from_spec,
)

logger = logging.getLogger(__name__)

# Independent streams so adding symbols never changes the test polynomials.
FAMILY_STREAM = 1
POLYNOMIAL_STREAM = 2
ANNULUS_FRACTIONS = (0.0, 1.0 / 3.0, 2.0 / 3.0)
MAX_AXIS_NODES = 800


def symbol_family(rng: np.random.Generator) -> Dict[str, SymbolMeasure]:
    """Point mass, atom cloud, two Gaussian densities, a disk indicator and a mixture."""
    return {
        "dirac": dirac(),
        "atomic_cloud": random_atomic(6, 1.5, rng),
        "gaussian_1": gaussian_density(1.0),
        "gaussian_2": gaussian_density(2.0),
        "disk": indicator_disk(0.5 + 0j, 1.0),
        "mixed": Sum([Scaled(0.5, dirac(0.5 + 0.5j)), gaussian_density(1.0)]),
    }


class Workbench:
    """Lazily built numerical context for one experiment config."""

    def __init__(self, cfg: ExperimentConfig, progress: bool = False):
        self.cfg = cfg
        self.progress = progress
        self.logger = logging.getLogger(__name__)
        spec = dict(cfg.potential)
        if "path" in spec and not Path(spec["path"]).is_absolute():
            spec["path"] = str(cfg.base_dir / spec["path"])
        self.potential: Potential = potential_from_spec(spec)
        self.rf = RadiusField(self.potential)
        self._averaging_rules: Dict[float, PlaneRule] = {}

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, stream])

    @cached_property
    def basis(self) -> OrthonormalBasis:
        basis = build_basis(self.potential, self.cfg.degree)
        self.logger.info("basis: degree %d, trust radius %.3f", basis.degree, basis.trust_radius)
        return basis

    def basis_of_degree(self, degree: int) -> OrthonormalBasis:
        if degree == self.cfg.degree:
            return self.basis
        return build_basis(self.potential, degree)

    @cached_property
    def kernel(self) -> KernelEvaluator:
        return KernelEvaluator(self.basis)

    @cached_property
    def symbols(self) -> Dict[str, SymbolMeasure]:
        rng = self.rng(FAMILY_STREAM)
        if self.cfg.symbols is None:
            return symbol_family(rng)
        family: Dict[str, SymbolMeasure] = {}
        for i, spec in enumerate(self.cfg.symbols):
            name = str(spec.get("name") or f"{spec.get('kind', 'symbol')}_{i}")
            family[name] = symbol_from_spec(spec, self.cfg.base_dir, rng)
        return family

    @property
    def z_grid(self) -> np.ndarray:
        return self.cfg.z_grid

    @cached_property
    def sigma_rule(self) -> PlaneRule:
        """Polar rule for dsigma integrals of smooth fields such as the Berezin transform."""
        cutoff = self.cfg.sigma_cutoff
        if not self.kernel.exact:
            cutoff = min(cutoff, self.basis.trust_radius)
        n_radial, n_angular = self.cfg.sigma_rule
        return PlaneRule.polar(n_radial, n_angular, cutoff)

    def averaging_rule(self, r: float) -> PlaneRule:
        """Cartesian rule fine enough to see every disk D^r(z) around an atom."""
        if r not in self._averaging_rules:
            cutoff = self.sigma_rule.cutoff
            spacing = max(r * min_rho(self.rf, cutoff) / 4.0, cutoff / MAX_AXIS_NODES)
            self._averaging_rules[r] = PlaneRule.cartesian(spacing, cutoff)
        return self._averaging_rules[r]

    def annulus_points(self, annuli: Optional[Iterable] = None) -> np.ndarray:
        annuli = self.cfg.annuli if annuli is None else annuli
        n = self.cfg.annulus_samples
        angles = np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)
        radii = [a + f * (b - a) for a, b in annuli for f in ANNULUS_FRACTIONS]
        return np.concatenate([[0j] if s == 0 else s * angles for s in radii])

    def usable_annuli(self):
        """Annuli the kernel can be evaluated on (all of them when the kernel is exact)."""
        if self.kernel.exact:
            return list(self.cfg.annuli)
        return [(a, b) for a, b in self.cfg.annuli if b <= self.basis.trust_radius]

    def csv_dir(self, scenario: str) -> Optional[Path]:
        if not self.cfg.write_csv:
            return None
        path = self.cfg.output_dir / "csv" / scenario
        path.mkdir(parents=True, exist_ok=True)
        return path

    def track(self, items: Iterable, desc: str, total: Optional[int] = None):
        return tqdm(items, desc=desc, total=total, disable=not self.progress, leave=False)
