"""Shared fixtures: the alpha = 1 Gaussian space and a small experiment config."""

import copy
import math

import pytest

from fock_toeplitz.config import ConfigManager, ExperimentConfig
from fock_toeplitz.geometry.potential import RadiusField, gaussian_alpha, radial_power
from fock_toeplitz.operators.basis import KernelEvaluator, build_basis

GAUSSIAN_RHO = 1.0 / math.sqrt(2.0 * math.pi)


@pytest.fixture(scope="session")
def gaussian():
    return gaussian_alpha(1.0)


@pytest.fixture(scope="session")
def gaussian_rf(gaussian):
    return RadiusField(gaussian)


@pytest.fixture(scope="session")
def quartic():
    """phi(z) = |z|^4, mass of D(0, r) = 8 pi r^4."""
    return radial_power(2.0)


@pytest.fixture(scope="session")
def quartic_rf(quartic):
    return RadiusField(quartic)


@pytest.fixture(scope="session")
def basis(gaussian):
    return build_basis(gaussian, 40)


@pytest.fixture(scope="session")
def kernel(basis):
    return KernelEvaluator(basis)


@pytest.fixture
def small_config(tmp_path):
    """Defaults trimmed so every scenario finishes in seconds."""
    config = ConfigManager(config_dir=tmp_path / "user").defaults()
    config["symbols"] = [
        {"kind": "dirac", "name": "dirac"},
        {"kind": "gaussian_density", "beta": 1.0, "name": "gaussian"},
        {"kind": "atomic", "name": "pair", "atoms": [[0.5, 0.0, 1.0], [-0.5, 0.5, 2.0]]},
    ]
    config["scales"] = [0.5, 4.0]
    config["random_polynomials"] = 5
    config["grids"].update({"z_radius": 1.0, "z_per_axis": 5, "sigma_rule": [48, 48],
                            "sigma_cutoff": 6.0,
                            "annuli": [[0.0, 1.0], [1.0, 2.0], [2.0, 3.0], [3.0, 4.0]],
                            "annulus_samples": 12})
    config["geometry"].update({"domain": 1.5, "lipschitz_pairs": 200, "centers": 10,
                               "geodesic_half_width": 1.5})
    config["lattice"].update({"radii": [0.4], "domain_radius": 1.5, "probe_refinement": 6})
    config["r"] = 0.4
    config["output"] = {"dir": str(tmp_path / "reports"), "csv": True}
    config["threads"] = 1
    return config


@pytest.fixture
def small_cfg(small_config):
    return ExperimentConfig.from_dict(copy.deepcopy(small_config))
