import math

import numpy as np
import pytest

from fock_toeplitz.errors import DomainError, InputError
from fock_toeplitz.geometry.geodesic import (
    GeodesicGrid,
    distance_estimate_report,
    geodesic_distance,
    near_diagonal_constant,
    triangle_excess,
)

from .conftest import GAUSSIAN_RHO


@pytest.fixture(scope="module")
def grid(gaussian_rf):
    return GeodesicGrid(gaussian_rf, 1.5, spacing=0.05)


def test_axis_and_diagonal_distances_are_euclidean_over_rho(grid):
    """The Gaussian metric is flat: d(z, w) = |z - w| / rho along grid directions."""
    assert geodesic_distance(grid, 0j, 1.0) == pytest.approx(1.0 / GAUSSIAN_RHO, rel=1e-9)
    assert geodesic_distance(grid, 0j, 0.5 + 0.5j) == pytest.approx(
        math.sqrt(0.5) / GAUSSIAN_RHO, rel=1e-9)
    assert geodesic_distance(grid, 0.3j, 0.3j) == 0.0


def test_distance_is_symmetric_and_metric(grid):
    a, b = -1.0 + 0.2j, 0.7 - 0.9j
    assert geodesic_distance(grid, a, b) == pytest.approx(geodesic_distance(grid, b, a))
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1.4, 1.4, (10, 3)) + 1j * rng.uniform(-1.4, 1.4, (10, 3))
    assert triangle_excess(grid, pts) <= 1e-9


def test_points_outside_grid_raise(grid):
    with pytest.raises(DomainError) as info:
        grid.distances(0j, [0.5, 2.0 + 0j])
    assert info.value.points == [2.0 + 0j]
    with pytest.raises(DomainError):
        geodesic_distance(grid, 0j, 3j)


def test_near_diagonal_constant_within_explicit_bound(grid):
    measured = near_diagonal_constant(grid, [0j, 0.5 - 0.25j], 0.5)
    assert 1.0 <= measured <= 2.0
    with pytest.raises(InputError):
        near_diagonal_constant(grid, [0j], 0.1)


def test_distance_estimate_report(grid):
    pairs = [(0j, 1.0 + 0j), (-1.0 + 0j, 1.0 + 1j), (0.5j, -1.0 - 1.0j)]
    report = distance_estimate_report(grid, [0j, 0.2 + 0.2j], 0.5, pairs)
    assert report["c_r"] == pytest.approx(2.0)
    assert report["near_diagonal_ok"]
    assert report["far_field"]["constant"] >= 1.0
    with pytest.raises(InputError):
        distance_estimate_report(grid, [0j], 1.0, pairs)


def test_default_spacing_resolves_rho(quartic_rf):
    g = GeodesicGrid(quartic_rf, 1.0)
    assert g.spacing <= float(quartic_rf(np.array([0j]))[0]) / 8.0
    assert geodesic_distance(g, 0j, 0.5) > 0.0
