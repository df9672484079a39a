import math

import numpy as np
import pytest

from fock_toeplitz.errors import DimensionMismatchError, InputError
from fock_toeplitz.geometry.quadrature import PlaneRule
from fock_toeplitz.operators.basis import random_coefficients
from fock_toeplitz.operators.symbols import area, dirac, gaussian_density, indicator_disk
from fock_toeplitz.operators.toeplitz import assemble, identity
from fock_toeplitz.operators.transforms import (
    TransformField,
    averaging_berezin_ratio,
    averaging_field,
    averaging_shift_check,
    berezin_field,
    berezin_measure,
    berezin_operator,
    berezin_power_check,
    embedding_ratio,
    local_kernel_mass,
    point_mass_bound,
    sigma_disk_mass,
    sigma_lp_norm,
    sigma_lp_power,
    trace_exact,
    trace_integral,
    trace_sigma_form,
    vanishing_detector,
)

from .conftest import GAUSSIAN_RHO

POINTS = np.array([0j, 0.5 + 0.5j, -1.0 + 0.2j, 1.5j])


def test_berezin_of_dirac(kernel):
    """delta_0~(z) = |K_z(0)|^2 / K_z(z) = e^{-|z|^2} / pi."""
    values = berezin_measure(kernel, dirac(), POINTS)
    np.testing.assert_allclose(values, np.exp(-np.abs(POINTS) ** 2) / math.pi, rtol=1e-10)


def test_berezin_of_area_is_one(kernel):
    np.testing.assert_allclose(berezin_measure(kernel, area(), POINTS), 1.0, rtol=1e-8)


def test_berezin_operator_agrees_with_measure(basis, kernel):
    mu = gaussian_density(1.0)
    t = assemble(basis, mu)
    np.testing.assert_allclose(berezin_operator(t, basis, POINTS),
                               berezin_measure(kernel, mu, POINTS), rtol=1e-8)
    with pytest.raises(DimensionMismatchError):
        berezin_operator(identity(2), basis, POINTS)


def test_trace_forms(basis, gaussian_rf):
    t = assemble(basis, gaussian_density(1.0))
    exact = trace_exact(t)
    assert exact == pytest.approx(1.0, rel=1e-8)
    assert trace_integral(t, basis) == pytest.approx(exact, rel=1e-8)
    # int mu~ dsigma = 2 pi mu(C) = 2 pi^2 while tr T = mu(C) / pi.
    sigma_rule = PlaneRule.polar(64, 64, 8.0)
    assert trace_sigma_form(t, basis, gaussian_rf, sigma_rule) / exact == pytest.approx(
        2.0 * math.pi ** 2, rel=1e-6)


def test_sigma_lp_power_of_constant_field(gaussian_rf):
    rule = PlaneRule.polar(8, 16, 2.0)
    field = TransformField(rule.nodes, np.full(rule.size, 3.0), "constant")
    # dsigma = 2 pi dA on the Gaussian space.
    assert sigma_lp_power(field, 2.0, gaussian_rf, rule) == pytest.approx(
        9.0 * 2.0 * math.pi * 4.0 * math.pi, rel=1e-10)
    assert sigma_lp_norm(field, 1.0, gaussian_rf, rule) == pytest.approx(
        3.0 * 8.0 * math.pi ** 2, rel=1e-10)
    with pytest.raises(InputError):
        sigma_lp_power(field, 2.0, gaussian_rf, PlaneRule.polar(4, 8, 2.0))
    with pytest.raises(ValueError):
        sigma_lp_power(field, 0.0, gaussian_rf, rule)


def test_transform_field_rejects_negative_values():
    with pytest.raises(InputError):
        TransformField(np.array([0j, 1j]), np.array([1.0, -0.5]), "berezin")
    with pytest.raises(InputError):
        TransformField(np.array([0j, 1j]), np.array([1.0]), "berezin")


ANNULI = [(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0)]
RING = np.array([0.5, 1.5, 2.5, 3.5], dtype=complex)


@pytest.mark.parametrize("values, vanishing", [
    ([1.0, 1e-2, 1e-4, 1e-6], True),
    ([0.0, 0.0, 0.0, 0.0], True),
    ([1.0, 1.0, 1.0, 1.0], False),
    ([1.0, 1e-6, 1e-5, 1e-4], False),
])
def test_vanishing_detector(values, vanishing):
    report = vanishing_detector(TransformField(RING, np.array(values), "test"), ANNULI)
    assert report.vanishing is vanishing
    assert report.sups == values


def test_vanishing_detector_needs_populated_annuli():
    field = TransformField(RING, np.ones(4), "test")
    with pytest.raises(InputError):
        vanishing_detector(field, ANNULI[:2])
    with pytest.raises(InputError):
        vanishing_detector(field, ANNULI + [(4.0, 5.0)])


def test_vanishing_of_berezin_fields(kernel):
    ring = np.concatenate([s * np.exp(2j * np.pi * np.arange(8) / 8) for s in (0.5, 2.5, 4.5,
                                                                                 6.5)])
    annuli = [(0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0)]
    assert vanishing_detector(berezin_field(kernel, dirac(), ring), annuli).vanishing
    assert not vanishing_detector(berezin_field(kernel, area(), ring), annuli).vanishing


def test_sigma_disk_mass_is_pi_r_squared(gaussian_rf):
    masses = sigma_disk_mass(gaussian_rf, np.array([0j, 2 - 1j]), 0.3)
    np.testing.assert_allclose(masses, math.pi * 0.09, rtol=1e-10)


def test_embedding_ratio_of_area_is_one(basis):
    coeffs = random_coefficients(basis, 3, np.random.default_rng(4))
    np.testing.assert_allclose(embedding_ratio(basis, area(), coeffs, 2.0), 1.0, rtol=1e-8)
    np.testing.assert_allclose(embedding_ratio(basis, area(), coeffs, 1.0), 1.0, rtol=1e-8)


def test_local_kernel_mass_of_dirac(kernel, gaussian_rf):
    assert local_kernel_mass(kernel, dirac(), 2.0, 0.4, 0j, gaussian_rf) == pytest.approx(
        1.0 / math.pi, rel=1e-8)
    assert local_kernel_mass(kernel, dirac(), 2.0, 0.4, 2.0 + 0j, gaussian_rf) == 0.0


def test_averaging_shift_check(gaussian_rf):
    rng = np.random.default_rng(9)
    centers = np.array([0j, 0.05 + 0j, 0.5j])
    assert averaging_shift_check(dirac(), gaussian_rf, 0.4, centers, rng) <= 1.0 + 1e-12
    disk = indicator_disk(0j, 0.5)
    assert averaging_shift_check(disk, gaussian_rf, 0.4, centers, rng) <= 1.0 + 1e-12


def test_berezin_power_check(basis):
    t = assemble(basis, gaussian_density(1.0))
    z = np.array([0j, 0.3 + 0.4j, -1.0])
    assert berezin_power_check(t, basis, 2.0, z) <= 1e-9
    assert berezin_power_check(t, basis, 0.5, z) <= 1e-9


def test_averaging_berezin_ratio(kernel, gaussian_rf):
    avg = averaging_field(area(), gaussian_rf, 0.4, POINTS)
    ber = berezin_field(kernel, area(), POINTS)
    assert averaging_berezin_ratio(avg, ber) == pytest.approx(1.0, rel=1e-8)
    empty = TransformField(POINTS, np.zeros(POINTS.size), "berezin")
    assert averaging_berezin_ratio(avg, empty) == 0.0


def test_point_mass_bound_gaussian_closed_form(kernel, gaussian_rf):
    """C = e^{r^2 rho^2} / (r^2 rho^2) for the Gaussian weight, the same at every point."""
    r = 0.25
    s = r ** 2 / (2.0 * math.pi)
    bound = point_mass_bound(kernel, gaussian_rf, r, POINTS)
    np.testing.assert_allclose(bound, math.exp(s) / s, rtol=1e-8)


@pytest.mark.parametrize("mu", [dirac(), dirac(0.5 + 0.5j, 2.0), gaussian_density(1.0),
                                indicator_disk(0j, 0.5)])
def test_point_mass_bound_dominates_averaging_over_berezin(mu, kernel, gaussian_rf):
    bound = point_mass_bound(kernel, gaussian_rf, 0.4, POINTS)
    avg = averaging_field(mu, gaussian_rf, 0.4, POINTS)
    ber = berezin_field(kernel, mu, POINTS)
    assert np.all(avg.values <= bound * ber.values * (1.0 + 1e-6))


def test_point_mass_bound_is_attained_near_the_disk_edge(kernel, gaussian_rf):
    r = 0.4
    edge = 0.999 * r * GAUSSIAN_RHO
    mu = dirac(edge + 0j)
    bound = point_mass_bound(kernel, gaussian_rf, r, 0j)[0]
    ratio = averaging_berezin_ratio(averaging_field(mu, gaussian_rf, r, np.array([0j])),
                                    berezin_field(kernel, mu, np.array([0j])))
    assert 0.999 * bound <= ratio <= bound
