"""Configuration management for the Fock-space Toeplitz laboratory."""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import click
import numpy as np
from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

load_dotenv()

SCHEMA_VERSION = 1


class ConfigManager:
    """Loads experiment documents and merges them over the defaults."""

    CONFIG_DIR = Path.home() / ".config" / "fock-toeplitz"
    CONFIG_NAME = "config.json"

    DEFAULT_CONFIG: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "potential": {"kind": "gaussian_alpha", "alpha": 1.0},
        "degree": 40,
        "seed": 0,
        "r": 0.25,
        "symbols": None,  # None selects the built-in six-symbol family
        "scales": [0.1, 1.0, 10.0],
        "kernel_exponents": [1.0, 2.0],
        "random_polynomials": 20,
        "grids": {
            "z_radius": 2.5,
            "z_per_axis": 11,
            "z_points": None,
            "annuli": [[0.0, 1.0], [1.0, 2.0], [2.0, 3.0], [3.0, 4.0], [4.0, 5.0], [5.0, 6.0]],
            "annulus_samples": 24,
            "sigma_rule": [64, 64],
            "sigma_cutoff": 6.0,
        },
        "geometry": {
            "domain": 3.0,
            "lipschitz_pairs": 1000,
            "centers": 50,
            "rho_r": [0.1, 0.3, 0.5],
            "sigma_r": [0.1, 0.25, 0.45],
            "distance_r": [0.3, 0.5],
            "geodesic_half_width": 2.0,
            "geodesic_spacing": None,
        },
        "lattice": {
            "radii": [0.1, 0.2, 0.4],
            "domain_radius": 3.0,
            "probe_refinement": 10,
        },
        "schatten": {"exponents": [0.5, 1.0, 2.0]},
        "tolerances": {
            "ratio_window": 10.0,
            "homogeneity": 1e-9,
            "trace": 1e-6,
            "trace_sigma_ratio": 2.0 * np.pi ** 2,
            "trace_sigma_tol": 1e-4,
            "vanish": 1e-3,
            "radius": 1e-10,
            "sigma_low": 0.5,
            "sigma_high": 16.0,
            "closed_form": 1e-8,
            "rho_mass": 1e-6,
            "lipschitz_slack": 2e-10,
            "metric": 1e-9,
            "identity": 1e-6,
            "quadratic_form": 1e-7,
            "jensen": 1e-9,
            "rank_one": 1e-8,
            "shift": 1.0 + 1e-9,
            "single_constant": 1.01,
        },
        "output": {"dir": "reports", "csv": True},
        "threads": None,  # None: FOCK_TOEPLITZ_THREADS or 1
    }

    def __init__(self, config_dir: Optional[Union[str, Path]] = None):
        env_dir = os.environ.get("FOCK_TOEPLITZ_CONFIG_DIR")
        self.config_dir = Path(config_dir or env_dir or self.CONFIG_DIR).expanduser()
        self.config_file = self.config_dir / self.CONFIG_NAME

    def exists(self) -> bool:
        return self.config_file.exists()

    def defaults(self) -> Dict[str, Any]:
        return copy.deepcopy(self.DEFAULT_CONFIG)

    def load(self, path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
        """Load ``path`` (or the user config file) merged over the defaults.

        A missing user config file yields the defaults; a missing explicit path is an error.
        """
        merged = self.defaults()
        source = Path(path) if path else self.config_file
        if not source.exists():
            if path:
                raise ConfigError(f"config file not found: {source}")
            logger.debug("no user config at %s; using defaults", source)
            return merged
        try:
            with open(source, "r", encoding="utf-8") as f:
                document = json.load(f)
        except (json.JSONDecodeError, OSError) as e:
            raise ConfigError(f"cannot read config {source}: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"{source}: top level must be a JSON object")
        version = document.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"{source}: unsupported schema_version {version}")
        self._deep_merge(merged, document)
        merged["base_dir"] = str(source.resolve().parent)
        return merged

    def save(self, config: Mapping[str, Any], path: Optional[Union[str, Path]] = None) -> Path:
        target = Path(path) if path else self.config_file
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", encoding="utf-8") as f:
                json.dump(config, f, indent=2, sort_keys=True)
        except OSError as e:
            raise ConfigError(f"cannot write config {target}: {e}") from e
        logger.info("config written: %s", target)
        return target

    def reset(self) -> Path:
        return self.save(self.defaults())

    def _deep_merge(self, base: Dict, updates: Mapping):
        """Deep merge updates into base dictionary."""
        for key, value in updates.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._deep_merge(base[key], value)
            else:
                base[key] = copy.deepcopy(value)

    def get_config_path(self) -> str:
        return str(self.config_file)

    def display(self, config: Optional[Mapping[str, Any]] = None):
        """Echo the configuration a run would use."""
        if config is None:
            config = self.load()
        grids, lattice = config["grids"], config["lattice"]
        click.echo("\n" + "=" * 60)
        click.secho("Current Configuration", bold=True)
        click.echo("=" * 60)
        click.echo(f"Potential:        {json.dumps(config['potential'], sort_keys=True)}")
        click.echo(f"Basis degree N:   {config['degree']}")
        click.echo(f"Averaging r:      {config['r']}")
        click.echo(f"Symbols:          "
                   f"{'built-in family' if config['symbols'] is None else len(config['symbols'])}")
        click.echo(f"z-grid:           radius {grids['z_radius']}, {grids['z_per_axis']} per axis")
        click.echo(f"Lattice radii:    {lattice['radii']} on D(0, {lattice['domain_radius']})")
        click.echo(f"Schatten p:       {config['schatten']['exponents']}")
        click.echo(f"Seed:             {config['seed']}")
        click.echo(f"Output directory: {config['output']['dir']}")
        click.echo("=" * 60 + "\n")


def config_hash(config: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON form, ignoring where the document was read from."""
    canonical = {k: v for k, v in config.items() if k != "base_dir"}
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def env_threads() -> Optional[int]:
    raw = os.environ.get("FOCK_TOEPLITZ_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"FOCK_TOEPLITZ_THREADS must be an integer, got {raw!r}")


def _referenced_paths(spec: Any) -> List[str]:
    if isinstance(spec, Mapping):
        found = [str(spec["path"])] if "path" in spec else []
        for value in spec.values():
            found.extend(_referenced_paths(value))
        return found
    if isinstance(spec, (list, tuple)):
        return [p for item in spec for p in _referenced_paths(item)]
    return []


def _pairs(values: Any, what: str) -> Tuple[Tuple[float, float], ...]:
    try:
        return tuple((float(a), float(b)) for a, b in values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{what} must be a list of [a, b] pairs") from e


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, immutable view of one merged experiment document."""

    potential: Mapping[str, Any]
    degree: int
    seed: int
    r: float
    symbols: Optional[Tuple[Mapping[str, Any], ...]]
    scales: Tuple[float, ...]
    kernel_exponents: Tuple[float, ...]
    random_polynomials: int
    z_grid: np.ndarray = field(repr=False, compare=False)
    annuli: Tuple[Tuple[float, float], ...]
    annulus_samples: int
    sigma_rule: Tuple[int, int]
    sigma_cutoff: float
    geometry: Mapping[str, Any]
    lattice_radii: Tuple[float, ...]
    lattice_domain: float
    probe_refinement: int
    schatten_exponents: Tuple[float, ...]
    tolerances: Mapping[str, float]
    output_dir: Path
    write_csv: bool
    threads: int
    base_dir: Path
    raw: Mapping[str, Any] = field(repr=False, compare=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @classmethod
    def from_dict(cls, config: Mapping[str, Any]) -> "ExperimentConfig":
        """Build and validate; every problem is reported as :class:`ConfigError`."""
        try:
            grids = config["grids"]
            lattice = config["lattice"]
            base_dir = Path(config.get("base_dir") or ".")
            symbols = config.get("symbols")
            built = cls(
                potential=dict(config["potential"]),
                degree=int(config["degree"]),
                seed=int(config["seed"]),
                r=float(config["r"]),
                symbols=None if symbols is None else tuple(dict(s) for s in symbols),
                scales=tuple(float(c) for c in config["scales"]),
                kernel_exponents=tuple(float(p) for p in config["kernel_exponents"]),
                random_polynomials=int(config["random_polynomials"]),
                z_grid=_z_grid(grids),
                annuli=_pairs(grids["annuli"], "grids.annuli"),
                annulus_samples=int(grids["annulus_samples"]),
                sigma_rule=(int(grids["sigma_rule"][0]), int(grids["sigma_rule"][1])),
                sigma_cutoff=float(grids["sigma_cutoff"]),
                geometry=dict(config["geometry"]),
                lattice_radii=tuple(float(r) for r in lattice["radii"]),
                lattice_domain=float(lattice["domain_radius"]),
                probe_refinement=int(lattice["probe_refinement"]),
                schatten_exponents=tuple(float(p) for p in config["schatten"]["exponents"]),
                tolerances={k: float(v) for k, v in config["tolerances"].items()},
                output_dir=Path(config["output"]["dir"]),
                write_csv=bool(config["output"].get("csv", True)),
                threads=int(config.get("threads") or env_threads() or 1),
                base_dir=base_dir,
                raw=copy.deepcopy(dict(config)),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"malformed config: {e}") from e
        built.validate()
        return built

    def validate(self) -> None:
        if self.degree < 1:
            raise ConfigError("basis degree N must be >= 1")
        if not self.r > 0:
            raise ConfigError("averaging radius r must be positive")
        if self.z_grid.size == 0:
            raise ConfigError("z-grid is empty")
        if any(not r > 0 for r in self.lattice_radii):
            raise ConfigError("lattice radii must be positive")
        if any(not p > 0 for p in self.schatten_exponents):
            raise ConfigError("Schatten exponents must be positive")
        if any(p < 1 for p in self.kernel_exponents):
            raise ConfigError("kernel exponents must be >= 1")
        if any(c <= 0 for c in self.scales):
            raise ConfigError("symbol scales must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for name in ("ratio_window", "homogeneity", "trace", "vanish"):
            if name not in self.tolerances:
                raise ConfigError(f"tolerance {name!r} missing")
        for ref in _referenced_paths([self.potential, self.symbols]):
            path = Path(ref)
            if not path.is_absolute():
                path = self.base_dir / path
            if not path.exists():
                raise ConfigError(f"referenced file does not exist: {path}")

    def with_overrides(self, **changes: Any) -> "ExperimentConfig":
        """Re-validate after CLI overrides such as seed, threads or the output directory."""
        raw = copy.deepcopy(dict(self.raw))
        if "seed" in changes:
            raw["seed"] = changes["seed"]
        if "threads" in changes:
            raw["threads"] = changes["threads"]
        if "output_dir" in changes:
            raw.setdefault("output", {})["dir"] = str(changes["output_dir"])
        return ExperimentConfig.from_dict(raw)


def _z_grid(grids: Mapping[str, Any]) -> np.ndarray:
    explicit = grids.get("z_points")
    if explicit is not None:
        rows = np.asarray(explicit, dtype=float).reshape(-1, 2)
        return rows[:, 0] + 1j * rows[:, 1]
    n = int(grids["z_per_axis"])
    radius = float(grids["z_radius"])
    if n < 1 or radius < 0:
        return np.empty(0, dtype=complex)
    axis = np.linspace(-radius, radius, n) if n > 1 else np.zeros(1)
    grid = (axis[None, :] + 1j * axis[:, None]).ravel()
    return grid[np.abs(grid) <= radius * (1.0 + 1e-12)]


def load_experiment(path: Optional[Union[str, Path]] = None,
                    config_dir: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    return ExperimentConfig.from_dict(ConfigManager(config_dir).load(path))
