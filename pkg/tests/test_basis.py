import math

import numpy as np
import pytest

from fock_toeplitz.errors import ConfigError, DimensionMismatchError, DomainError
from fock_toeplitz.geometry.potential import gaussian_alpha, potential_from_spec
from fock_toeplitz.operators.basis import (
    KernelEvaluator,
    bergman_project,
    build_basis,
    kernel_eval,
    kernel_norm,
    load_basis,
    lp_norms,
    near_diagonal_ratios,
    normalized_kernel,
    orthonormality_defect,
    random_coefficients,
    save_basis,
)


def test_radial_basis_uses_factorial_moments(basis):
    """e^{-|z|^2}: h_n = pi n!."""
    assert basis.norms[3] == pytest.approx(6.0 * math.pi, rel=1e-9)
    assert basis.dimension == 41
    assert orthonormality_defect(basis) < 1e-8


def test_trust_radius_for_degree_forty(basis):
    assert 2.5 < basis.trust_radius < 6.0
    assert basis.rule.cutoff > basis.trust_radius


def test_gram_basis_for_general_potential():
    p = potential_from_spec({"kind": "custom_general", "alpha": 1.0, "beta": 0.25})
    b = build_basis(p, 8)
    assert b.norms is None
    assert b.degree == 8
    assert orthonormality_defect(b) < 1e-8


def test_kernel_closed_form(kernel):
    assert kernel_eval(kernel, 0j, 0j) == pytest.approx(1.0 / math.pi)
    z = 0.6 - 0.3j
    assert kernel.diagonal(np.asarray(z)) == pytest.approx(math.exp(abs(z) ** 2) / math.pi)


def test_truncated_kernel_matches_closed_form(basis, kernel):
    truncated = KernelEvaluator(basis, use_exact=False)
    z, w = 0.5 + 0.5j, -1.0 + 0.2j
    assert kernel_eval(truncated, z, w) == pytest.approx(kernel_eval(kernel, z, w), rel=1e-10)
    with pytest.raises(DomainError):
        kernel_eval(truncated, 10.0 + 0j, 0j)


def test_kernel_norms(kernel):
    z = 0.8 + 0.1j
    assert kernel_norm(kernel, 2.0, z) == pytest.approx(
        math.exp(abs(z) ** 2 / 2) / math.sqrt(math.pi), rel=1e-8)
    assert kernel_norm(kernel, 1.0, z) == pytest.approx(2.0 * math.exp(abs(z) ** 2 / 2),
                                                        rel=1e-8)
    assert normalized_kernel(kernel, 2.0, z).norm == pytest.approx(kernel_norm(kernel, 2.0, z))
    with pytest.raises(ValueError):
        kernel_norm(kernel, 0.5, z)


def test_near_diagonal_ratios_are_bounded(kernel, gaussian_rf):
    ratios = near_diagonal_ratios(kernel, gaussian_rf, 0.3j, 0.5)
    # |K_z(w)| / (|K_z| |K_w|) = e^{-|z-w|^2 / 2} on the Gaussian space.
    expected = math.exp(-0.5 * (0.5 / math.sqrt(2.0 * math.pi)) ** 2)
    np.testing.assert_allclose(ratios, expected, rtol=1e-8)


def test_bergman_projection_of_monomial(basis):
    coeffs = bergman_project(basis, lambda z: z ** 2)
    expected = np.zeros(basis.dimension)
    expected[2] = math.sqrt(2.0 * math.pi)
    np.testing.assert_allclose(coeffs, expected, atol=1e-8)


def test_lp_norms_and_reconstruct(basis):
    unit = np.zeros((basis.dimension, 1))
    unit[0, 0] = 1.0
    assert lp_norms(basis, unit, 2.0)[0] == pytest.approx(1.0, rel=1e-10)
    assert lp_norms(basis, unit, math.inf)[0] == pytest.approx(1.0 / math.sqrt(math.pi))
    coeffs = random_coefficients(basis, 3, np.random.default_rng(1))
    assert coeffs.shape == (41, 3)
    with pytest.raises(DimensionMismatchError):
        basis.reconstruct(np.ones(4), 0j)


def test_basis_file_round_trip(tmp_path, gaussian, basis):
    path = save_basis(basis, tmp_path / "basis.json")
    loaded = load_basis(path, gaussian)
    np.testing.assert_allclose(loaded.norms, basis.norms)
    assert loaded.trust_radius == basis.trust_radius
    with pytest.raises(ConfigError):
        load_basis(path, gaussian_alpha(2.0))
    with pytest.raises(ConfigError):
        load_basis(tmp_path / "missing.json", gaussian)
