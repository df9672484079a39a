import math

import numpy as np
import pytest

from fock_toeplitz.errors import PoisonedIntegrandError, QuadratureError
from fock_toeplitz.geometry.quadrature import (
    DiskRule,
    PlaneRule,
    converge,
    disk_sums,
    gauss_legendre_unit,
    integrate_disk,
    integrate_plane,
    radial_moments,
    weight_cutoff,
)


def test_gauss_legendre_unit_is_exact_for_polynomials():
    """Five nodes integrate x^4 on [0, 1] exactly."""
    x, w = gauss_legendre_unit(5)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert w @ x ** 4 == pytest.approx(0.2, rel=1e-13)


def test_polar_rule_integrates_gaussian():
    rule = PlaneRule.polar(64, 64, 8.0)
    value = integrate_plane(lambda z: np.exp(-np.abs(z) ** 2), rule)
    assert value.value == pytest.approx(math.pi, rel=1e-10)
    assert value.error < 1e-9


def test_cartesian_rule_weights_sum_to_disk_area():
    rule = PlaneRule.cartesian(0.1, 2.0)
    assert rule.weights.sum() == pytest.approx(4.0 * math.pi, rel=1e-12)
    assert np.all(np.abs(rule.nodes) <= 2.0)


def test_refined_and_rotated_rules():
    rule = PlaneRule.polar(8, 16, 3.0)
    assert rule.refined().size == 4 * rule.size
    turned = rule.rotated(0.1)
    assert turned.weights.sum() == pytest.approx(rule.weights.sum(), rel=1e-14)
    with pytest.raises(ValueError):
        PlaneRule.cartesian(0.1, 1.0).rotated(0.1)


def test_disk_sums_give_disk_areas():
    centers = np.array([0j, 1 + 1j, -2.0])
    radii = np.array([0.5, 1.0, 2.0])
    areas = disk_sums(lambda z: np.ones(z.shape), centers, radii, 4, 8)
    np.testing.assert_allclose(areas, math.pi * radii ** 2, rtol=1e-13)


def test_integrate_disk_on_shifted_disk():
    rule = DiskRule(1 + 2j, 0.5, 8, 16)
    value = integrate_disk(lambda z: np.real(z), rule)
    assert value.value == pytest.approx(math.pi * 0.25, rel=1e-12)


def test_radial_moments_match_factorials():
    """h_n = pi n! for the weight e^{-r^2}."""
    moments = radial_moments(lambda r: np.exp(-np.asarray(r) ** 2), 10)
    expected = [math.pi * math.factorial(n) for n in range(11)]
    np.testing.assert_allclose(moments, expected, rtol=1e-9)


def test_weight_cutoff_lies_past_the_peak():
    cutoff = weight_cutoff(lambda r: -np.asarray(r) ** 2, 81)
    # r^81 e^{-r^2} peaks at r^2 = 40.5.
    log_peak = 40.5 * math.log(40.5) - 40.5
    assert cutoff > math.sqrt(40.5)
    assert 81 * math.log(cutoff) - cutoff ** 2 < log_peak + math.log(1e-20) + 1e-9


def test_nonfinite_integrand_is_rejected():
    rule = PlaneRule.polar(4, 8, 1.0)
    with pytest.raises(PoisonedIntegrandError):
        integrate_plane(lambda z: np.full(z.shape, np.nan), rule)


def test_converge_raises_when_levels_disagree():
    with pytest.raises(QuadratureError) as info:
        converge(lambda level: np.array([float(level)]), rtol=1e-12, max_levels=3)
    assert info.value.estimate == pytest.approx(1.0)


def test_converge_returns_fine_level():
    value, error = converge(lambda level: np.array([1.0 + 10.0 ** (-3 * level)]), rtol=1e-5)
    assert value[0] == pytest.approx(1.0, abs=1e-5)
    assert error < 1e-5
