"""Truncated orthonormal bases of F^2_phi, reproducing kernels and the Bergman projection."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from ..errors import ConfigError, DimensionMismatchError, DomainError, FitFailure, InputError
from ..geometry.geodesic import GeodesicGrid
from ..geometry.potential import Potential, RadiusField
from ..geometry.quadrature import PlaneRule, radial_moments, unit_disk_rule, weight_cutoff

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-8
TRUST_TAIL_TOL = 1e-8
TRUST_TOP_FRACTION = 0.1
DECAY_CONSTANT_CAP = 1e3
EPSILON_GRID = np.round(np.arange(1, 41) * 0.05, 2)
R0_GRID = (0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05)
R0_WINDOW = (0.2, 5.0)
BASIS_FORMAT = "fock-toeplitz-basis"
BASIS_VERSION = 1


def default_rule(p: Potential, degree: int, n_radial: Optional[int] = None,
                 n_angular: Optional[int] = None) -> PlaneRule:
    """Polar rule resolving degree-2N integrands against e^{-2 phi}.

    The cutoff is where r^(2N+1) e^{-2 phi(r)} falls below 1e-20 of its peak; for
    non-radial weights the smallest phi over a ring of directions is used.
    """
    if p.is_radial:
        def log_weight(r):
            return -2.0 * p.radial_phi(r)
    else:
        angles = np.exp(2j * np.pi * np.arange(16) / 16)

        def log_weight(r):
            return -2.0 * np.min(p.phi(np.asarray(r)[:, None] * angles[None, :]), axis=1)

    cutoff = weight_cutoff(log_weight, 2 * degree + 1)
    return PlaneRule.polar(
        n_radial or 4 * degree + 80,
        n_angular or 2 * degree + 16,
        cutoff,
    )


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """e_n = sum_k C[n, k] z^k for n = 0..degree, orthonormal in L^2(e^{-2 phi} dA).

    ``norms`` holds the monomial norms h_n when the potential is radial, in which case C is
    diagonal with C[n, n] = h_n^{-1/2}.
    """

    potential: Potential
    degree: int
    coefficients: np.ndarray
    trust_radius: float = 0.0
    norms: Optional[np.ndarray] = None
    rule: Optional[PlaneRule] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.degree + 1

    def monomials(self, z: Union[complex, np.ndarray]) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return z[..., None] ** np.arange(self.dimension)

    def evaluate(self, z: Union[complex, np.ndarray]) -> np.ndarray:
        """Matrix of e_n(z); the last axis runs over n."""
        if self.norms is not None:
            return self.monomials(z) * (1.0 / np.sqrt(self.norms))
        return self.monomials(z) @ self.coefficients.T

    def reconstruct(self, coeffs: np.ndarray, z: Union[complex, np.ndarray]) -> np.ndarray:
        """sum_n coeffs[n] e_n(z)."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.dimension:
            raise DimensionMismatchError(
                f"{coeffs.shape[0]} coefficients for a basis of dimension {self.dimension}")
        return self.evaluate(z) @ coeffs

    def with_trust_radius(self, radius: float) -> "OrthonormalBasis":
        return OrthonormalBasis(self.potential, self.degree, self.coefficients, radius,
                                self.norms, self.rule)

    def describe(self) -> dict:
        return {
            "degree": self.degree,
            "trust_radius": self.trust_radius,
            "potential": self.potential.describe(),
            "path": "radial" if self.norms is not None else "gram",
        }


def build_basis(p: Potential, degree: int, rule: Optional[PlaneRule] = None) -> OrthonormalBasis:
    """Orthonormalize 1, z, ..., z^N.

    Radial potentials use the monomial norms directly. Otherwise the Gram matrix is
    equilibrated, Cholesky-factored, and truncated at the first degree where it stops being
    numerically positive definite.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    rule = rule or default_rule(p, degree)
    if p.is_radial:
        norms = radial_moments(lambda r: np.exp(-2.0 * p.radial_phi(r)), degree)
        if np.any(norms <= 0):
            raise InputError("monomial norms vanish; e^{-2 phi} is not a usable weight")
        basis = OrthonormalBasis(p, degree, np.diag(1.0 / np.sqrt(norms)).astype(complex),
                                 norms=norms, rule=rule)
    else:
        basis = _gram_basis(p, degree, rule)
    radius = trust_radius(basis)
    logger.debug("basis degree %d (%s), trust radius %.3f", basis.degree,
                 "radial" if basis.norms is not None else "gram", radius)
    return basis.with_trust_radius(radius)


def _gram_basis(p: Potential, degree: int, rule: PlaneRule) -> OrthonormalBasis:
    z = rule.nodes
    w = rule.weights * np.exp(-2.0 * p.phi(z))
    v = z[:, None] ** np.arange(degree + 1)
    gram = (v.T * w) @ np.conj(v)
    gram = 0.5 * (gram + gram.conj().T)
    scale = 1.0 / np.sqrt(np.real(np.diag(gram)))
    equilibrated = gram * scale[:, None] * scale[None, :]

    usable = degree + 1
    try:
        lower = linalg.cholesky(equilibrated, lower=True)
    except linalg.LinAlgError:
        for k in range(1, degree + 2):
            try:
                linalg.cholesky(equilibrated[:k, :k], lower=True)
            except linalg.LinAlgError:
                usable = k - 1
                break
        if usable < 1:
            raise InputError("Gram matrix is not positive definite even at degree 0")
        logger.warning("⚠️  Gram matrix not positive definite at degree %d; basis truncated to "
                       "degree %d", usable, usable - 1)
        equilibrated = equilibrated[:usable, :usable]
        scale = scale[:usable]
        lower = linalg.cholesky(equilibrated, lower=True)
    inverse = linalg.solve_triangular(lower, np.eye(usable), lower=True)
    coefficients = inverse * scale[None, :]
    return OrthonormalBasis(p, usable - 1, coefficients, rule=rule)


def orthonormality_defect(basis: OrthonormalBasis, rule: Optional[PlaneRule] = None) -> float:
    """max |<e_m, e_n> - delta_mn| measured with ``rule``."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    e = basis.evaluate(rule.nodes)
    w = rule.weights * np.exp(-2.0 * basis.potential.phi(rule.nodes))
    gram = (e.T * w) @ np.conj(e)
    return float(np.max(np.abs(gram - np.eye(basis.dimension))))


def trust_radius(basis: OrthonormalBasis, n_radii: int = 400) -> float:
    """Largest R such that the top 10% of indices carry < 1e-8 of K_z(z) on |z| <= R."""
    top = max(1, int(math.ceil(TRUST_TOP_FRACTION * basis.dimension)))
    if top >= basis.dimension:
        return 0.0
    hi = basis.rule.cutoff if basis.rule is not None else 4.0 * math.sqrt(basis.dimension)
    radii = np.linspace(0.0, hi, n_radii)
    n_angles = 1 if basis.norms is not None else 16
    angles = np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    z = radii[:, None] * angles[None, :]
    sq = np.abs(basis.evaluate(z)) ** 2
    fraction = np.max(sq[..., -top:].sum(axis=-1) / sq.sum(axis=-1), axis=1)
    bad = np.nonzero(fraction >= TRUST_TAIL_TOL)[0]
    if bad.size == 0:
        return float(hi)
    return float(radii[bad[0] - 1]) if bad[0] > 0 else 0.0


class KernelEvaluator:
    """Reproducing kernel K_z(w) = sum_n e_n(w) conj(e_n(z)), or its closed form when known."""

    def __init__(self, basis: OrthonormalBasis, use_exact: bool = True):
        self.basis = basis
        self.potential = basis.potential
        self.exact = use_exact and self.potential.exact_kernel is not None

    def check_domain(self, points: Union[complex, np.ndarray]) -> None:
        if self.exact:
            return
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        outside = points[np.abs(points) > self.basis.trust_radius + 1e-12]
        if outside.size:
            raise DomainError(
                f"{outside.size} point(s) beyond the trust radius "
                f"{self.basis.trust_radius:.3f} of the degree-{self.basis.degree} basis",
                list(outside[:10]),
            )

    def coefficients(self, z: Union[complex, np.ndarray]) -> np.ndarray:
        """Basis coefficients of the truncated K_z: conj(e_n(z))."""
        return np.conj(self.basis.evaluate(z))

    def __call__(self, z, w) -> np.ndarray:
        """K_z(w) with z and w broadcast against each other."""
        z, w = np.asarray(z, dtype=complex), np.asarray(w, dtype=complex)
        if self.exact:
            return self.potential.exact_kernel(z, w)
        self.check_domain(z)
        return np.sum(self.basis.evaluate(w) * np.conj(self.basis.evaluate(z)), axis=-1)

    def diagonal(self, z) -> np.ndarray:
        """K_z(z) = ||K_z||_2^2."""
        z = np.asarray(z, dtype=complex)
        if self.exact:
            return np.real(self.potential.exact_kernel(z, z))
        self.check_domain(z)
        return np.sum(np.abs(self.basis.evaluate(z)) ** 2, axis=-1)


def kernel_eval(k: KernelEvaluator, z: complex, w: complex) -> complex:
    return complex(k(np.asarray(z), np.asarray(w)))


def kernel_norm(k: KernelEvaluator, p_exp: float, z: complex,
                rule: Optional[PlaneRule] = None) -> float:
    """||K_z||_{p, phi} by quadrature; p = inf is the sup over the rule nodes."""
    if not p_exp >= 1:
        raise ValueError("kernel norms need p in [1, inf]")
    k.check_domain(z)
    rule = rule or k.basis.rule or default_rule(k.potential, k.basis.degree)
    values = np.abs(k(np.asarray(z), rule.nodes)) * np.exp(-k.potential.phi(rule.nodes))
    if math.isinf(p_exp):
        return float(np.max(values))
    return float(np.dot(rule.weights, values ** p_exp) ** (1.0 / p_exp))


class NormalizedKernel:
    """K_{p,z} = K_z / ||K_z||_{p,phi}."""

    def __init__(self, k: KernelEvaluator, p_exp: float, z: complex,
                 rule: Optional[PlaneRule] = None):
        self.kernel = k
        self.p_exp = p_exp
        self.z = complex(z)
        self.norm = kernel_norm(k, p_exp, z, rule)
        if not self.norm > 0:
            raise ArithmeticError(f"kernel at {z} has zero {p_exp}-norm")

    def __call__(self, w) -> np.ndarray:
        return self.kernel(np.asarray(self.z), np.asarray(w, dtype=complex)) / self.norm

    def coefficients(self) -> np.ndarray:
        return self.kernel.coefficients(self.z) / self.norm


def normalized_kernel(k: KernelEvaluator, p_exp: float, z: complex,
                      rule: Optional[PlaneRule] = None) -> NormalizedKernel:
    return NormalizedKernel(k, p_exp, z, rule)


def bergman_project(basis: OrthonormalBasis, f: Callable[[np.ndarray], np.ndarray],
                    rule: Optional[PlaneRule] = None) -> np.ndarray:
    """Coefficients <f, e_n>_phi of the projection of f onto span{e_0..e_N}."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    w = rule.weights * np.exp(-2.0 * basis.potential.phi(rule.nodes))
    values = np.asarray(f(rule.nodes), dtype=complex)
    return (w * values) @ np.conj(basis.evaluate(rule.nodes))


def random_coefficients(basis: OrthonormalBasis, count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """``count`` coefficient vectors (columns) with unit-variance complex normal entries."""
    shape = (basis.dimension, count)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def lp_norms(basis: OrthonormalBasis, coeffs: np.ndarray, p_exp: float,
             rule: Optional[PlaneRule] = None) -> np.ndarray:
    """||f e^{-phi}||_{L^p(dA)} for f = E coeffs, one per column."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    values = np.abs(basis.evaluate(rule.nodes) @ coeffs)
    values = values * np.exp(-basis.potential.phi(rule.nodes))[:, None]
    if math.isinf(p_exp):
        return np.max(values, axis=0)
    return (rule.weights @ values ** p_exp) ** (1.0 / p_exp)


@dataclass(frozen=True)
class DecayFit:
    epsilon: float
    constant: float
    table: Mapping[float, float]

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "constant": self.constant,
                "table": {f"{e:.2f}": c for e, c in self.table.items()}}


def decay_fit(k: KernelEvaluator, rf: RadiusField, g: GeodesicGrid, z: complex,
              far_points: Sequence[complex]) -> DecayFit:
    """Largest eps with |K_z(w)| rho(z) rho(w) e^{-phi(z)-phi(w)} <= C e^{-d(z,w)^eps}, C <= 1e3."""
    far = np.asarray(far_points, dtype=complex)
    k.check_domain(np.append(far, z))
    p = k.potential
    lhs = (np.abs(k(np.asarray(z), far)) * rf(np.array([z]))[0] * rf(far)
           * np.exp(-p.phi(np.asarray(z)) - p.phi(far)))
    d = g.distances(z, far)
    table: Dict[float, float] = {}
    for eps in EPSILON_GRID:
        with np.errstate(over="ignore"):
            table[float(eps)] = float(np.max(lhs * np.exp(d ** eps)))
    feasible = [eps for eps, c in table.items() if c <= DECAY_CONSTANT_CAP]
    if not feasible:
        raise FitFailure(f"kernel decay at {z}: no eps with C <= {DECAY_CONSTANT_CAP:g}")
    best = max(feasible)
    return DecayFit(best, table[best], table)


def near_diagonal_ratios(k: KernelEvaluator, rf: RadiusField, z: complex, r: float,
                         n_angles: int = 12) -> np.ndarray:
    """|K_z(w)| / (||K_z||_2 ||K_w||_2) on the circle |w - z| = r rho(z)."""
    rz = float(rf(np.array([z]))[0])
    w = z + r * rz * np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    k.check_domain(np.append(w, z))
    num = np.abs(k(np.asarray(z), w))
    return num / np.sqrt(k.diagonal(np.asarray(z)) * k.diagonal(w))


def estimate_r0(k: KernelEvaluator, rf: RadiusField, centers: Sequence[complex]) -> float:
    """Largest r <= 1/2 for which the near-diagonal comparison stays within [0.2, 5]."""
    lo, hi = R0_WINDOW
    for r in R0_GRID:
        ratios = np.concatenate([near_diagonal_ratios(k, rf, z, r) for z in centers])
        if np.all((ratios >= lo) & (ratios <= hi)):
            return float(r)
    raise FitFailure("no r in (0, 1/2] gives a two-sided near-diagonal kernel comparison")


def mean_value_fit(basis: OrthonormalBasis, rf: RadiusField, p_exp: float,
                   centers: Sequence[complex], r: float, coeffs: np.ndarray,
                   n_radial: int = 16, n_angular: int = 32) -> np.ndarray:
    """Per-center C with |f(z) e^{-phi(z)}|^p <= C int_{D^r(z)} |f e^{-phi}|^p dsigma."""
    p = basis.potential
    centers = np.asarray(centers, dtype=complex)
    rho = rf(centers)
    offsets, unit_weights = unit_disk_rule(n_radial, n_angular)
    out = np.empty(centers.size)
    for i, z in enumerate(centers):
        radius = r * rho[i]
        nodes = z + radius * offsets
        weights = radius ** 2 * unit_weights / rf(nodes) ** 2
        values = np.abs(basis.reconstruct(coeffs, nodes)) * np.exp(-p.phi(nodes))[:, None]
        disk = weights @ values ** p_exp
        at_z = np.abs(basis.reconstruct(coeffs, z)) * np.exp(-p.phi(z))
        out[i] = float(np.max(at_z ** p_exp / disk))
    return out


def pointwise_bound_fit(basis: OrthonormalBasis, rf: RadiusField, p_exp: float,
                        centers: Sequence[complex], coeffs: np.ndarray,
                        rule: Optional[PlaneRule] = None) -> np.ndarray:
    """Per-center C with |f(z)| <= C e^{phi(z)} rho(z)^{-2/p} ||f||_{p,phi}."""
    p = basis.potential
    centers = np.asarray(centers, dtype=complex)
    norms = lp_norms(basis, coeffs, p_exp, rule)
    values = np.abs(basis.reconstruct(coeffs, centers))
    scale = np.exp(p.phi(centers)) * rf(centers) ** (-2.0 / p_exp)
    return np.max(values / (scale[:, None] * norms[None, :]), axis=1)


def save_basis(basis: OrthonormalBasis, path: Union[str, Path]) -> Path:
    """Write the basis as versioned JSON (norms for radial bases, C otherwise)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": BASIS_FORMAT,
        "version": BASIS_VERSION,
        "degree": basis.degree,
        "trust_radius": basis.trust_radius,
        "potential": basis.potential.describe(),
    }
    if basis.norms is not None:
        doc["norms"] = [float(h) for h in basis.norms]
    else:
        doc["coefficients"] = [[[float(c.real), float(c.imag)] for c in row]
                               for row in basis.coefficients]
    if basis.rule is not None:
        doc["rule"] = basis.rule.describe()
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
    return path


def load_basis(path: Union[str, Path], p: Potential) -> OrthonormalBasis:
    """Read a basis written by :func:`save_basis` for the same potential."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read basis file {path}: {e}") from e
    if doc.get("format") != BASIS_FORMAT or doc.get("version") != BASIS_VERSION:
        raise ConfigError(f"{path} is not a version-{BASIS_VERSION} basis file")
    if doc["potential"] != json.loads(json.dumps(p.describe())):
        raise ConfigError(f"{path} was built for a different potential: {doc['potential']}")
    degree = int(doc["degree"])
    rule = None
    if "rule" in doc and doc["rule"]["scheme"] == "polar_tensor":
        rule = PlaneRule.polar(doc["rule"]["n_radial"], doc["rule"]["n_angular"],
                               doc["rule"]["cutoff"])
    if "norms" in doc:
        norms = np.array(doc["norms"], dtype=float)
        coefficients = np.diag(1.0 / np.sqrt(norms)).astype(complex)
    else:
        norms = None
        raw = np.array(doc["coefficients"], dtype=float)
        coefficients = raw[..., 0] + 1j * raw[..., 1]
    return OrthonormalBasis(p, degree, coefficients, float(doc["trust_radius"]), norms, rule)
