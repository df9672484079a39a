"""Berezin and averaging transforms, trace functionals and L^p(dsigma) norms."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DimensionMismatchError, DomainError, InputError
from ..geometry.potential import RadiusField
from ..geometry.quadrature import PlaneRule, disk_sums
from .basis import KernelEvaluator, OrthonormalBasis, default_rule, kernel_norm, lp_norms
from .symbols import SymbolMeasure, averaging_transform
from .toeplitz import ToeplitzMatrix, matrix_power

logger = logging.getLogger(__name__)

NONNEGATIVE_SLACK = 1e-12
VANISH_TOL = 1e-3
Z_CHUNK = 64


@dataclass(frozen=True, eq=False)
class TransformField:
    """Values of one transform on a set of points."""

    points: np.ndarray
    values: np.ndarray
    kind: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=complex).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if points.shape != values.shape:
            raise InputError("a transform field needs one value per point")
        if values.size and values.min() < -NONNEGATIVE_SLACK:
            raise InputError(f"{self.kind} field has a negative value {values.min():.3e}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    @property
    def sup(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def scaled(self, c: float) -> "TransformField":
        return TransformField(self.points, c * self.values, self.kind, dict(self.params))

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Rows ``re, im, value``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["re", "im", "value"])
            for z, v in zip(self.points, self.values):
                writer.writerow([repr(z.real), repr(z.imag), repr(float(v))])
        return path


def _check_atoms(k: KernelEvaluator, mu: SymbolMeasure) -> None:
    if k.exact:
        return
    atoms = mu.atoms()
    outside = atoms[np.abs(atoms) > k.basis.trust_radius + 1e-12]
    if outside.size:
        raise DomainError(
            f"{outside.size} atom(s) of the symbol lie beyond the trust radius "
            f"{k.basis.trust_radius:.3f}",
            list(outside[:10]),
        )


def berezin_measure(k: KernelEvaluator, mu: SymbolMeasure, z: Union[complex, np.ndarray],
                    rule: Optional[PlaneRule] = None) -> np.ndarray:
    """mu~(z) = int |K_z(w)|^2 e^{-2 phi(w)} dmu(w) / K_z(z), vectorized over z."""
    z = np.asarray(z, dtype=complex)
    k.check_domain(z)
    _check_atoms(k, mu)
    rule = rule or k.basis.rule or default_rule(k.potential, k.basis.degree)
    points, weights = mu.discretize(rule)
    w = weights * np.exp(-2.0 * k.potential.phi(points))
    keep = w > 0
    points, w = points[keep], w[keep]
    flat = z.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, Z_CHUNK):
        chunk = flat[start:start + Z_CHUNK]
        kernel = k(chunk[:, None], points[None, :])
        out[start:start + Z_CHUNK] = (np.abs(kernel) ** 2 @ w) / k.diagonal(chunk)
    return out.reshape(z.shape)


def berezin_operator(t: ToeplitzMatrix, basis: OrthonormalBasis,
                     z: Union[complex, np.ndarray]) -> np.ndarray:
    """T~(z) = <T a, a> / <a, a> with a the coefficients of the truncated K_z."""
    if t.dimension != basis.dimension:
        raise DimensionMismatchError(
            f"matrix of dimension {t.dimension} against a basis of dimension {basis.dimension}")
    z = np.asarray(z, dtype=complex)
    outside = np.atleast_1d(z)[np.abs(np.atleast_1d(z)) > basis.trust_radius + 1e-12]
    if outside.size:
        raise DomainError("points beyond the trust radius", list(outside[:10]))
    a = np.conj(basis.evaluate(z))
    num = np.real(np.sum(np.conj(a) * (a @ t.matrix.T), axis=-1))
    return num / np.sum(np.abs(a) ** 2, axis=-1)


def _operator_field(t: ToeplitzMatrix, basis: OrthonormalBasis,
                    z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """<T a, a> and <a, a> at every z, without the trust-radius restriction."""
    a = np.conj(basis.evaluate(z))
    num = np.real(np.sum(np.conj(a) * (a @ t.matrix.T), axis=-1))
    return num, np.sum(np.abs(a) ** 2, axis=-1)


def trace_exact(t: ToeplitzMatrix) -> float:
    return float(np.real(np.trace(t.matrix)))


def trace_integral(t: ToeplitzMatrix, basis: OrthonormalBasis,
                   rule: Optional[PlaneRule] = None) -> float:
    """int T~(z) ||K_z||_2^2 e^{-2 phi(z)} dA(z), which equals tr T."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    num, _ = _operator_field(t, basis, rule.nodes)
    return float(rule.weights @ (num * np.exp(-2.0 * basis.potential.phi(rule.nodes))))


def trace_sigma_form(t: ToeplitzMatrix, basis: OrthonormalBasis, rf: RadiusField,
                     rule: Optional[PlaneRule] = None) -> float:
    """int T~ dsigma with dsigma = dA / rho^2; differs from tr T by a normalization factor."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    num, den = _operator_field(t, basis, rule.nodes)
    return float(rule.weights @ (num / den * rf.sigma(rule.nodes)))


def berezin_field(k: KernelEvaluator, mu: SymbolMeasure, points: np.ndarray,
                  rule: Optional[PlaneRule] = None) -> TransformField:
    values = berezin_measure(k, mu, points, rule)
    return TransformField(points, np.maximum(values, 0.0), "berezin", {"symbol": mu.describe()})


def averaging_field(mu: SymbolMeasure, rf: RadiusField, r: float,
                    points: np.ndarray) -> TransformField:
    values = averaging_transform(mu, rf, r, points)
    return TransformField(points, values, "averaging", {"r": r, "symbol": mu.describe()})


def sigma_lp_power(field: TransformField, p: float, rf: RadiusField, rule: PlaneRule) -> float:
    """int |field|^p dA / rho^2 over the rule."""
    if field.points.size != rule.size or not np.allclose(field.points, rule.nodes):
        raise InputError("transform field is not sampled on the nodes of this rule")
    if not p > 0:
        raise ValueError("exponent must be positive")
    values = np.abs(field.values)
    powered = np.where(values > 0, values, 0.0) ** p
    return float(rule.weights @ (powered * rf.sigma(rule.nodes)))


def sigma_lp_norm(field: TransformField, p: float, rf: RadiusField, rule: PlaneRule) -> float:
    """(int |field|^p dsigma)^(1/p)."""
    return sigma_lp_power(field, p, rf, rule) ** (1.0 / p)


@dataclass(frozen=True)
class VanishingReport:
    sups: List[float]
    global_sup: float
    vanishing: bool

    def as_dict(self) -> dict:
        return {"sups": self.sups, "global_sup": self.global_sup, "vanishing": self.vanishing}


def vanishing_detector(field: TransformField, annuli: Sequence[Tuple[float, float]],
                       tol: float = VANISH_TOL) -> VanishingReport:
    """Sup of the field over each annulus a <= |z| < b.

    Flags vanishing when the last three sups do not increase and the final one is below
    ``tol`` times the global sup.
    """
    if len(annuli) < 3:
        raise InputError("vanishing detection needs at least three annuli")
    modulus = np.abs(field.points)
    sups = []
    for a, b in annuli:
        inside = (modulus >= a) & (modulus < b)
        if not np.any(inside):
            raise InputError(f"field has no samples in the annulus {a} <= |z| < {b}")
        sups.append(float(field.values[inside].max()))
    global_sup = field.sup
    tail = sups[-3:]
    monotone = tail[0] >= tail[1] >= tail[2]
    vanishing = monotone and (global_sup == 0.0 or tail[2] < tol * global_sup)
    return VanishingReport(sups, global_sup, bool(vanishing))


# ---------------------------------------------------------------------------
# Supplementary checks
# ---------------------------------------------------------------------------


def local_kernel_mass(k: KernelEvaluator, mu: SymbolMeasure, p_exp: float, r: float,
                      z: complex, rf: RadiusField, rule: Optional[PlaneRule] = None) -> float:
    """int over D^r(z) of |K_{p,z} e^{-phi}|^p dmu."""
    rule = rule or k.basis.rule or default_rule(k.potential, k.basis.degree)
    radius = r * float(rf(np.array([z]))[0])
    points, weights = mu.discretize_disk(z, radius)
    if points.size == 0 or not np.any(weights > 0):
        return 0.0
    norm = kernel_norm(k, p_exp, z, rule)
    values = np.abs(k(np.asarray(z), points)) / norm
    values = values * np.exp(-k.potential.phi(points))
    return float(weights @ values ** p_exp)


def sigma_disk_mass(rf: RadiusField, z: Union[complex, np.ndarray], r: float,
                    n_radial: int = 16, n_angular: int = 32) -> np.ndarray:
    """sigma(D^r(z)) = int over D(z, r rho(z)) of dA / rho^2."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return disk_sums(rf.sigma, z, r * rf(z), n_radial, n_angular)


def averaging_shift_check(mu: SymbolMeasure, rf: RadiusField, r: float,
                          centers: Sequence[complex], rng: np.random.Generator,
                          samples: int = 16) -> float:
    """max of mu^_{r/4}(z) rho(z)^2 / (16 mu^_r(w) rho(w)^2) over w in D^{r/4}(z).

    D^{r/4}(z) lies inside D^r(w), so the ratio is at most 1 for r < 2.
    """
    centers = np.asarray(centers, dtype=complex)
    rho = rf(centers)
    quarter = averaging_transform(mu, rf, r / 4.0, centers)
    radius = (r / 4.0) * rho[:, None] * np.sqrt(rng.uniform(0.0, 1.0, (centers.size, samples)))
    w = centers[:, None] + radius * np.exp(1j * rng.uniform(0.0, 2 * np.pi, radius.shape))
    full = averaging_transform(mu, rf, r, w) * rf(w) ** 2
    num = np.broadcast_to((quarter * rho ** 2)[:, None], full.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(num > 0, num / (16.0 * full), 0.0)
    return float(np.max(ratio))


def berezin_power_check(t: ToeplitzMatrix, basis: OrthonormalBasis, p: float,
                        z: Sequence[complex]) -> float:
    """Worst relative violation of <T^p x, x> >= <T x, x>^p (p >= 1) or <= (0 < p <= 1).

    x runs over the unit truncated kernels at z. Nonpositive means no violation.
    """
    z = np.asarray(z, dtype=complex)
    a = np.conj(basis.evaluate(z))
    x = a / np.linalg.norm(a, axis=-1, keepdims=True)
    tp = matrix_power(t, p)
    powered = np.real(np.sum(np.conj(x) * (x @ tp.T), axis=-1))
    plain = np.maximum(np.real(np.sum(np.conj(x) * (x @ t.matrix.T), axis=-1)), 0.0) ** p
    scale = np.maximum(np.maximum(np.abs(powered), np.abs(plain)), 1e-300)
    gap = (plain - powered) if p >= 1 else (powered - plain)
    return float(np.max(gap / scale))


def embedding_ratio(basis: OrthonormalBasis, mu: SymbolMeasure, coeffs: np.ndarray,
                    p_exp: float, rule: Optional[PlaneRule] = None) -> np.ndarray:
    """int |f e^{-phi}|^p dmu / ||f||_{p,phi}^p, one per column of ``coeffs``."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    points, weights = mu.discretize(rule)
    values = np.abs(basis.reconstruct(coeffs, points))
    values = values * np.exp(-basis.potential.phi(points))[:, None]
    num = weights @ values ** p_exp
    return num / lp_norms(basis, coeffs, p_exp, rule) ** p_exp


def averaging_berezin_ratio(averaging: TransformField, berezin: TransformField) -> float:
    """max of mu^_r / mu~ over points where mu~ > 0."""
    mask = berezin.values > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(averaging.values[mask] / berezin.values[mask]))


def point_mass_bound(k: KernelEvaluator, rf: RadiusField, r: float,
                     z: Union[complex, np.ndarray], n_radial: int = 4,
                     n_angular: int = 128) -> np.ndarray:
    """C(z) with mu^_r(z) <= C(z) mu~(z) for every positive measure mu.

    C(z) = 1 / (pi r^2 rho(z)^2 min_{w in D^r(z)} |K_z(w)|^2 e^{-2 phi(w)} / K_z(z)), attained by
    a unit mass at the minimizing w. The minimum is taken over a polar grid of the closed disk.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    k.check_domain(z)
    rho = rf(z)
    s = np.linspace(0.0, 1.0, n_radial + 1)
    theta = np.linspace(0.0, 2.0 * np.pi, n_angular, endpoint=False)
    offsets = (s[:, None] * np.exp(1j * theta)[None, :]).ravel()
    out = np.empty(z.size)
    for start in range(0, z.size, Z_CHUNK):
        chunk = z[start:start + Z_CHUNK]
        radius = r * rho[start:start + Z_CHUNK]
        w = chunk[:, None] + radius[:, None] * offsets[None, :]
        mass = np.abs(k(chunk[:, None], w)) ** 2 * np.exp(-2.0 * k.potential.phi(w))
        smallest = np.min(mass, axis=1) / k.diagonal(chunk)
        out[start:start + Z_CHUNK] = 1.0 / (np.pi * radius ** 2 * smallest)
    return out
