"""Doubling Fock space Toeplitz laboratory - kernels, transforms, lattices and Schatten checks."""

__version__ = "0.1.0"

from .config import ConfigManager, ExperimentConfig

__all__ = ["ConfigManager", "ExperimentConfig", "__version__"]
