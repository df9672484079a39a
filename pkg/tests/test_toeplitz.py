import csv
import math

import numpy as np
import pytest

from fock_toeplitz.errors import DimensionMismatchError, DomainError
from fock_toeplitz.operators.basis import build_basis, random_coefficients
from fock_toeplitz.operators.symbols import Atomic, area, dirac, gaussian_density
from fock_toeplitz.operators.toeplitz import (
    assemble,
    compactness_indicator,
    eigenvalues,
    export_matrix_csv,
    export_spectrum_csv,
    identity,
    kernel_action_statistic,
    matrix_power,
    operator_norm,
    quadratic_form,
    schatten_norm,
    schatten_power,
    schatten_tail_estimate,
)


@pytest.fixture(scope="module")
def small_basis(gaussian):
    return build_basis(gaussian, 20)


def test_area_symbol_gives_identity(basis):
    t = assemble(basis, area())
    np.testing.assert_allclose(t.matrix, np.eye(basis.dimension), atol=1e-8)
    assert operator_norm(t) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("at", [0j, 0.5 - 0.5j])
def test_dirac_is_rank_one(basis, at):
    """T_delta_a = K_a (x) K_a e^{-2 phi(a)}: one eigenvalue K(a, a) e^{-2 phi(a)} = 1/pi."""
    t = assemble(basis, dirac(at))
    lam = eigenvalues(t)
    assert lam[0] == pytest.approx(1.0 / math.pi, rel=1e-10)
    assert np.all(np.abs(lam[1:]) < 1e-12)
    for p in (0.5, 1.0, 2.0, 4.0):
        assert schatten_norm(t, p) == pytest.approx(1.0 / math.pi, rel=1e-10)


def test_gaussian_density_is_diagonal(basis):
    """e^{-|z|^2} dA acts on z^n by 2^{-(n+1)}."""
    t = assemble(basis, gaussian_density(1.0))
    expected = 0.5 ** (np.arange(basis.dimension) + 1)
    np.testing.assert_allclose(np.real(np.diag(t.matrix)), expected, rtol=1e-8)
    off = t.matrix - np.diag(np.diag(t.matrix))
    assert np.max(np.abs(off)) < 1e-12
    assert schatten_power(t, 1.0) == pytest.approx(1.0 - 0.5 ** 41, rel=1e-8)


def test_schatten_homogeneity(basis):
    t = assemble(basis, Atomic(np.array([0.2j, -0.4]), np.array([1.0, 3.0])))
    for c in (0.25, 7.0):
        scaled = t.scaled(c)
        for p in (0.5, 1.0, 3.0):
            assert schatten_power(scaled, p) == pytest.approx(c ** p * schatten_power(t, p),
                                                              rel=1e-10)
    with pytest.raises(ValueError):
        schatten_power(t, 0.0)


def test_atoms_outside_trust_radius_are_rejected(basis):
    with pytest.raises(DomainError) as info:
        assemble(basis, dirac(10.0 + 0j))
    assert info.value.points == [10.0 + 0j]


def test_quadratic_form_matches_integral(basis):
    mu = Atomic(np.array([0.3 + 0.1j, -0.7j]), np.array([2.0, 0.5]))
    t = assemble(basis, mu)
    coeffs = random_coefficients(basis, 4, np.random.default_rng(2))
    lhs, rhs = quadratic_form(t, basis, mu, coeffs)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_kernel_action_of_identity_is_one(basis):
    t = identity(basis.dimension)
    value = kernel_action_statistic(t, basis, 2.0, [0j, 0.5 + 0.5j, -1.0])
    assert value == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(DimensionMismatchError):
        kernel_action_statistic(identity(3), basis, 2.0, [0j])
    with pytest.raises(DomainError):
        kernel_action_statistic(t, basis, 2.0, [20.0 + 0j])


def test_compactness_indicator(gaussian, basis, small_basis):
    decaying = compactness_indicator(assemble(small_basis, gaussian_density(1.0)),
                                     assemble(basis, gaussian_density(1.0)))
    assert decaying.compact_like and not decaying.flat
    assert decaying.tail_decay == pytest.approx(0.5, rel=1e-6)
    flat = compactness_indicator(assemble(small_basis, area()), assemble(basis, area()))
    assert flat.flat and not flat.compact_like


def test_tail_estimate_and_matrix_power(basis, small_basis):
    mu = dirac(0.25 + 0j)
    assert schatten_tail_estimate(assemble(basis, mu), assemble(small_basis, mu), 1.0) < 1e-10
    t = assemble(basis, gaussian_density(1.0))
    root = matrix_power(t, 0.5)
    np.testing.assert_allclose(root @ root, t.matrix, atol=1e-12)


def test_csv_exports(tmp_path, small_basis):
    t = assemble(small_basis, dirac())
    with open(export_spectrum_csv(t, tmp_path / "spectrum.csv"), newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["k", "eigenvalue"]
    assert len(rows) == small_basis.dimension + 1
    assert float(rows[1][1]) == pytest.approx(1.0 / math.pi)
    with open(export_matrix_csv(t, tmp_path / "matrix.csv"), newline="") as f:
        assert sum(1 for _ in f) == small_basis.dimension ** 2 + 1
