import math

import numpy as np
import pytest

from fock_toeplitz.errors import ConfigError, InputError
from fock_toeplitz.geometry.potential import (
    PotentialKind,
    RadiusField,
    christ_fit,
    custom_general,
    disk_mass,
    disk_masses,
    doubling_constant,
    gaussian_alpha,
    laplacian_mismatch,
    lipschitz_excess,
    load_radial_profile,
    potential_from_spec,
    radius,
    rho_ball_excess,
    rho_outside_fit,
    sigma_weight,
)

from .conftest import GAUSSIAN_RHO


def test_gaussian_disk_mass_is_two_pi_r_squared(gaussian):
    assert disk_mass(gaussian, 0j, 1.0) == pytest.approx(2.0 * math.pi, rel=1e-12)
    masses = disk_masses(gaussian, np.array([1 + 1j, -3.0]), np.array([0.5, 2.0]))
    np.testing.assert_allclose(masses, 2.0 * math.pi * np.array([0.25, 4.0]), rtol=1e-12)


def test_gaussian_radius_has_closed_form(gaussian, gaussian_rf):
    assert radius(gaussian, 0j) == pytest.approx(GAUSSIAN_RHO, rel=1e-9)
    z = np.array([0j, 2 + 1j, -5j])
    np.testing.assert_allclose(gaussian_rf(z), GAUSSIAN_RHO, rtol=1e-9)
    assert sigma_weight(gaussian_rf, 1 + 1j) == pytest.approx(2.0 * math.pi, rel=1e-8)


def test_gaussian_alpha_scales_radius():
    p = gaussian_alpha(4.0)
    assert radius(p, 0.3j) == pytest.approx(1.0 / math.sqrt(8.0 * math.pi), rel=1e-9)


def test_quartic_masses_and_radius(quartic, quartic_rf):
    """phi = |z|^4: mu(D(0, r)) = 8 pi r^4, rho(0) = (8 pi)^(-1/4)."""
    assert disk_mass(quartic, 0j, 0.7) == pytest.approx(8.0 * math.pi * 0.7 ** 4, rel=1e-9)
    assert quartic_rf(np.array([0j]))[0] == pytest.approx((8.0 * math.pi) ** -0.25, rel=1e-7)


def test_quartic_radius_shrinks_away_from_origin(quartic_rf):
    rho = quartic_rf(np.array([0.0, 1.0, 2.0, 4.0]))
    assert np.all(np.diff(rho) < 0)
    # Far out Delta phi ~ 16 |z|^2, so rho(z) ~ (16 pi |z|^2)^(-1/2).
    assert rho[-1] == pytest.approx(1.0 / math.sqrt(16.0 * math.pi * 16.0), rel=2e-2)


def test_rho_is_one_lipschitz(quartic_rf):
    rng = np.random.default_rng(7)
    z = rng.uniform(-2, 2, 200) + 1j * rng.uniform(-2, 2, 200)
    w = z + 0.1 * np.exp(2j * np.pi * rng.uniform(size=200))
    assert lipschitz_excess(quartic_rf, z, w) <= 2e-10


def test_rho_ball_bound(quartic_rf):
    rng = np.random.default_rng(3)
    centers = np.array([0j, 0.5, 1 + 1j, -2.0])
    assert rho_ball_excess(quartic_rf, centers, 0.3, rng) <= 2e-10
    with pytest.raises(ValueError):
        rho_ball_excess(quartic_rf, centers, 1.0, rng)


def test_doubling_constants(gaussian, quartic):
    assert doubling_constant(gaussian, [0j, 1 + 1j], [0.25, 1.0]) == pytest.approx(4.0, rel=1e-9)
    assert doubling_constant(quartic, [0j], [0.5]) == pytest.approx(16.0, rel=1e-9)


def test_christ_fit_for_constant_laplacian(gaussian):
    pairs = [((0j, 1.0), (0.2 + 0j, 0.25)), ((1j, 0.5), (1j, 0.1)), ((2.0, 1.0), (2.5, 0.5))]
    fit = christ_fit(gaussian, pairs)
    assert fit.constant == pytest.approx(1.0)
    assert fit.exponent == pytest.approx(0.5)
    assert "0.50" in fit.as_dict()["table"]


def test_christ_fit_rejects_disjoint_disks(gaussian):
    with pytest.raises(InputError):
        christ_fit(gaussian, [((0j, 1.0), (5.0 + 0j, 0.5))])


def test_rho_outside_fit_is_feasible(gaussian_rf):
    pairs = [(0j, 1.0 + 0j), (1j, 3.0 + 1j), (0.5, -0.5 + 0.5j)]
    fit = rho_outside_fit(gaussian_rf, pairs)
    assert fit.constant == pytest.approx(1.0)


def test_custom_general_checks_laplacian():
    def phi(z):
        return np.abs(z) ** 2

    with pytest.raises(InputError):
        custom_general(phi, lambda z: np.full(np.shape(z), 1.0))
    p = custom_general(phi, lambda z: np.full(np.shape(z), 4.0))
    assert laplacian_mismatch(p) < 1e-3
    assert p.kind == PotentialKind.CUSTOM_GENERAL
    assert not p.is_radial


def test_load_radial_profile(tmp_path):
    """A tabulated alpha = 1 Gaussian reproduces the closed-form radius."""
    path = tmp_path / "profile.csv"
    r = np.linspace(0.0, 6.0, 61)
    rows = ["r,phi,laplacian"] + [f"{x!r},{0.5 * x * x!r},2.0" for x in r]
    path.write_text("\n".join(rows) + "\n")
    p = load_radial_profile(path)
    assert p.kind == PotentialKind.CUSTOM_RADIAL
    rf = RadiusField(p)
    np.testing.assert_allclose(rf(np.array([0j, 1.0, 1 + 1j])), GAUSSIAN_RHO, rtol=1e-7)


def test_potential_from_spec():
    assert potential_from_spec({"kind": "gaussian_alpha", "alpha": 2.0}).params["alpha"] == 2.0
    assert potential_from_spec({"kind": "radial_power", "m": 3}).params["m"] == 3.0
    general = potential_from_spec({"kind": "custom_general", "alpha": 1.0, "beta": 0.25})
    assert disk_mass(general, 0j, 1.0) == pytest.approx(math.pi * 2.5, rel=1e-9)
    with pytest.raises(ConfigError):
        potential_from_spec({"kind": "nope"})
    with pytest.raises(ConfigError):
        potential_from_spec({"kind": "custom_radial"})
    with pytest.raises(ConfigError):
        gaussian_alpha(0.0)
