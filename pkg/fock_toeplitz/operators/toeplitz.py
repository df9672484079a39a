"""Toeplitz matrices T_mu in a truncated orthonormal basis and their spectra."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from ..errors import AssemblyError, DimensionMismatchError, DomainError
from ..geometry.quadrature import PlaneRule
from .basis import OrthonormalBasis, default_rule, lp_norms
from .symbols import SymbolMeasure

logger = logging.getLogger(__name__)

PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ToeplitzMatrix:
    """Hermitian matrix T[m, n] = int e_n conj(e_m) e^{-2 phi} dmu."""

    matrix: np.ndarray
    symbol: Mapping = field(default_factory=dict)
    basis: Mapping = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def scaled(self, c: float) -> "ToeplitzMatrix":
        return ToeplitzMatrix(c * self.matrix, {"kind": "scaled", "c": c, "inner": self.symbol},
                              self.basis)


def identity(dimension: int) -> ToeplitzMatrix:
    return ToeplitzMatrix(np.eye(dimension, dtype=complex), {"kind": "identity"})


def check_support(basis: OrthonormalBasis, mu: SymbolMeasure) -> None:
    """Atoms must sit inside the trust radius of the basis."""
    atoms = mu.atoms()
    outside = atoms[np.abs(atoms) > basis.trust_radius + 1e-12]
    if outside.size:
        raise DomainError(
            f"{outside.size} atom(s) beyond the trust radius {basis.trust_radius:.3f}",
            list(outside[:10]),
        )


def assemble(basis: OrthonormalBasis, mu: SymbolMeasure,
             rule: Optional[PlaneRule] = None) -> ToeplitzMatrix:
    """Assemble, symmetrize and PSD-check the matrix of T_mu."""
    check_support(basis, mu)
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    points, weights = mu.discretize(rule)
    w = weights * np.exp(-2.0 * basis.potential.phi(points))
    e = basis.evaluate(points)
    matrix = (np.conj(e).T * w) @ e
    matrix = 0.5 * (matrix + matrix.conj().T)
    spectrum = linalg.eigvalsh(matrix)
    top = max(float(spectrum[-1]), 0.0)
    if spectrum[0] < -PSD_TOL * max(top, 1e-300):
        raise AssemblyError(
            f"assembled matrix has eigenvalue {spectrum[0]:.3e} below -{PSD_TOL:g} * "
            f"{top:.3e}; the quadrature does not resolve the symbol"
        )
    return ToeplitzMatrix(matrix, mu.describe(), basis.describe())


def eigenvalues(t: ToeplitzMatrix) -> np.ndarray:
    """Eigenvalues in descending order."""
    return linalg.eigvalsh(t.matrix)[::-1]


def _clamped(t: ToeplitzMatrix) -> np.ndarray:
    """Eigenvalues with roundoff (below dimension * eps * lambda_max) set to 0."""
    lam = eigenvalues(t)
    if not lam.size:
        return lam
    top = max(float(lam[0]), 0.0)
    if lam[-1] < -PSD_TOL * max(top, 1e-300):
        raise AssemblyError(f"matrix is not positive semidefinite (min eigenvalue {lam[-1]:.3e})")
    floor = lam.size * np.finfo(float).eps * top
    return np.where(lam > floor, lam, 0.0)


def operator_norm(t: ToeplitzMatrix) -> float:
    return float(max(eigenvalues(t)[0], 0.0))


def schatten_power(t: ToeplitzMatrix, p: float) -> float:
    """sum_n lambda_n^p = ||T||_{S_p}^p."""
    if not p > 0:
        raise ValueError("Schatten exponent must be positive")
    lam = _clamped(t)
    return float(np.sum(lam[lam > 0] ** p))


def schatten_norm(t: ToeplitzMatrix, p: float) -> float:
    return schatten_power(t, p) ** (1.0 / p)


def schatten_tail_estimate(t_full: ToeplitzMatrix, t_half: ToeplitzMatrix, p: float) -> float:
    """|‖T_N‖_{S_p} - ‖T_{N/2}‖_{S_p}| as a truncation proxy."""
    return abs(schatten_norm(t_full, p) - schatten_norm(t_half, p))


def matrix_power(t: ToeplitzMatrix, p: float) -> np.ndarray:
    """T^p through the eigendecomposition, roundoff eigenvalues clamped to 0."""
    lam, vec = linalg.eigh(t.matrix)
    floor = lam.size * np.finfo(float).eps * max(float(lam[-1]), 0.0)
    lam = np.where(lam > floor, lam, 0.0)
    return (vec * lam ** p) @ vec.conj().T


def kernel_action_statistic(t: ToeplitzMatrix, basis: OrthonormalBasis, p_exp: float,
                            z_grid: Sequence[complex],
                            rule: Optional[PlaneRule] = None) -> float:
    """max over the grid of ||T K_{p,z}||_{p,phi}, using the truncated kernels."""
    if t.dimension != basis.dimension:
        raise DimensionMismatchError(
            f"matrix of dimension {t.dimension} against a basis of dimension {basis.dimension}")
    z = np.asarray(z_grid, dtype=complex)
    outside = z[np.abs(z) > basis.trust_radius + 1e-12]
    if outside.size:
        raise DomainError("grid points beyond the trust radius", list(outside[:10]))
    kernels = np.conj(basis.evaluate(z)).T
    norms = lp_norms(basis, kernels, p_exp, rule)
    images = lp_norms(basis, t.matrix @ kernels, p_exp, rule)
    return float(np.max(images / norms))


def quadratic_form(t: ToeplitzMatrix, basis: OrthonormalBasis, mu: SymbolMeasure,
                   coeffs: np.ndarray,
                   rule: Optional[PlaneRule] = None) -> Tuple[np.ndarray, np.ndarray]:
    """<T f, f> against int |f|^2 e^{-2 phi} dmu for f = E coeffs, per column."""
    rule = rule or basis.rule or default_rule(basis.potential, basis.degree)
    lhs = np.real(np.sum(np.conj(coeffs) * (t.matrix @ coeffs), axis=0))
    points, weights = mu.discretize(rule)
    values = np.abs(basis.reconstruct(coeffs, points)) ** 2
    rhs = (weights * np.exp(-2.0 * basis.potential.phi(points))) @ values
    return lhs, rhs


@dataclass(frozen=True)
class CompactnessReport:
    leading_drift: float
    tail_ratio: float
    tail_decay: float
    flat: bool
    compact_like: bool
    leading: List[float]

    def as_dict(self) -> dict:
        return {
            "leading_drift": self.leading_drift,
            "tail_ratio": self.tail_ratio,
            "tail_decay": self.tail_decay,
            "flat": self.flat,
            "compact_like": self.compact_like,
            "leading": self.leading,
        }


def compactness_indicator(t_small: ToeplitzMatrix, t_large: ToeplitzMatrix,
                          tail_fraction: float = 0.25, n_leading: int = 5) -> CompactnessReport:
    """Compare spectra at truncations N and 2N.

    A compact-looking symbol keeps its leading eigenvalues while the tail of the larger
    spectrum falls away; c dA keeps a flat spectrum at c.
    """
    small, large = _clamped(t_small), _clamped(t_large)
    top = float(large[0]) if large.size else 0.0
    if top == 0.0:
        return CompactnessReport(0.0, 0.0, 0.0, False, True, [])
    k = min(n_leading, small.size)
    drift = float(np.max(np.abs(large[:k] - small[:k])) / top)
    tail = large[-max(1, int(math.ceil(tail_fraction * large.size))):]
    tail_ratio = float(np.mean(tail) / top)
    positive = large[large > PSD_TOL * top]
    if positive.size >= 3:
        tail_decay = float(np.median(positive[1:] / positive[:-1]))
    else:
        tail_decay = 0.0
    flat = tail_ratio > 0.5
    return CompactnessReport(
        leading_drift=drift,
        tail_ratio=tail_ratio,
        tail_decay=tail_decay,
        flat=flat,
        compact_like=tail_ratio < 1e-2 and drift < 1e-4,
        leading=[float(x) for x in large[:k]],
    )


def export_matrix_csv(t: ToeplitzMatrix, path: Union[str, Path]) -> Path:
    """Rows ``m, n, re, im``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["m", "n", "re", "im"])
        for (m, n), value in np.ndenumerate(t.matrix):
            writer.writerow([m, n, repr(float(value.real)), repr(float(value.imag))])
    return path


def export_spectrum_csv(t: ToeplitzMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["k", "eigenvalue"])
        for k, lam in enumerate(eigenvalues(t)):
            writer.writerow([k, repr(float(lam))])
    return path
