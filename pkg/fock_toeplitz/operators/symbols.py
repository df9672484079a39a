"""Positive symbol measures: atoms, densities, scalings and sums."""

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, InputError, QuadratureError
from ..geometry.potential import RadiusField
from ..geometry.quadrature import DiskRule, PlaneRule, Scheme, converge, disk_sums

logger = logging.getLogger(__name__)

DENSITY_MASS_RTOL = 1e-8
TRUNCATED_MASS_RTOL = 1e-6
# Closed disks: a point on the boundary counts as inside.
BOUNDARY_SLACK = 1e-12

Discretization = Tuple[np.ndarray, np.ndarray]


class SymbolMeasure(ABC):
    """A positive, locally finite measure on C."""

    @abstractmethod
    def disk_masses(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """mu(D(c, r)) for each center/radius pair."""

    @abstractmethod
    def discretize(self, rule: PlaneRule) -> Discretization:
        """Points and nonnegative weights with int f dmu ~ sum weights * f(points)."""

    @abstractmethod
    def discretize_disk(self, center: complex, radius: float, n_radial: int = 16,
                        n_angular: int = 32) -> Discretization:
        """Like :meth:`discretize`, restricted to the closed disk D(center, radius)."""

    @abstractmethod
    def describe(self) -> dict:
        ...

    def atoms(self) -> np.ndarray:
        return np.empty(0, dtype=complex)

    def __mul__(self, c: float) -> "SymbolMeasure":
        return Scaled(float(c), self)

    __rmul__ = __mul__

    def __add__(self, other: "SymbolMeasure") -> "SymbolMeasure":
        return Sum([self, other])


@dataclass(frozen=True, eq=False)
class Atomic(SymbolMeasure):
    points: np.ndarray
    masses: np.ndarray
    name: str = "atomic"

    def __post_init__(self):
        points = np.atleast_1d(np.asarray(self.points, dtype=complex))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if points.shape != masses.shape:
            raise InputError("atomic measure needs one mass per point")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise InputError("atom masses must be finite and nonnegative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)

    def disk_masses(self, centers, radii):
        centers = np.atleast_1d(np.asarray(centers, dtype=complex))
        radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape)
        if np.any(radii <= 0):
            raise ValueError("disk radius must be positive")
        dist = np.abs(centers[..., None] - self.points)
        inside = dist <= radii[..., None] * (1.0 + BOUNDARY_SLACK)
        return inside.astype(float) @ self.masses

    def discretize(self, rule):
        return self.points, self.masses

    def discretize_disk(self, center, radius, n_radial=16, n_angular=32):
        inside = np.abs(self.points - center) <= radius * (1.0 + BOUNDARY_SLACK)
        return self.points[inside], self.masses[inside]

    def atoms(self):
        return self.points

    def describe(self):
        return {"kind": "atomic", "name": self.name, "atoms": int(self.points.size),
                "total_mass": float(self.masses.sum())}


@dataclass(frozen=True, eq=False)
class Density(SymbolMeasure):
    """w dA, truncated to D(center, support_radius) when a support is given.

    Without a support the density is integrated on the global plane rule; with one it gets
    its own polar rule on the support disk.
    """

    w: Callable[[np.ndarray], np.ndarray]
    support_radius: Optional[float] = None
    center: complex = 0j
    name: str = "density"
    params: Mapping[str, float] = field(default_factory=dict)
    exact_disk_mass: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def _restricted(self, z: np.ndarray) -> np.ndarray:
        values = np.asarray(self.w(z), dtype=float)
        if self.support_radius is None:
            return np.broadcast_to(values, np.shape(z))
        return np.where(np.abs(z - self.center) <= self.support_radius, values, 0.0)

    def disk_masses(self, centers, radii):
        centers = np.atleast_1d(np.asarray(centers, dtype=complex))
        radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape)
        if np.any(radii <= 0):
            raise ValueError("disk radius must be positive")
        if self.exact_disk_mass is not None:
            return np.asarray(self.exact_disk_mass(centers, radii), dtype=float)
        rtol = DENSITY_MASS_RTOL if self.support_radius is None else TRUNCATED_MASS_RTOL

        def compute(level: int) -> np.ndarray:
            return disk_sums(self._restricted, centers, radii, 8 * 2 ** level, 16 * 2 ** level)

        try:
            values, _ = converge(compute, rtol=rtol, atol=1e-14)
        except QuadratureError as exc:
            raise QuadratureError(f"{self.name}: disk mass did not converge: {exc}",
                                  estimate=exc.estimate) from exc
        return values

    def support_rule(self, rule: PlaneRule) -> PlaneRule:
        n_radial = rule.n_radial if rule.scheme == Scheme.POLAR_TENSOR else 64
        n_angular = rule.n_angular if rule.scheme == Scheme.POLAR_TENSOR else 128
        return PlaneRule.polar(n_radial, n_angular, self.support_radius)

    def discretize(self, rule):
        if self.support_radius is None:
            values = np.asarray(self.w(rule.nodes), dtype=float)
            return rule.nodes, rule.weights * np.broadcast_to(values, rule.nodes.shape)
        own = self.support_rule(rule)
        points = self.center + own.nodes
        return points, own.weights * np.asarray(self.w(points), dtype=float)

    def discretize_disk(self, center, radius, n_radial=16, n_angular=32):
        rule = DiskRule(complex(center), float(radius), n_radial, n_angular)
        return rule.nodes, rule.weights * self._restricted(rule.nodes)

    def describe(self):
        out = {"kind": "density", "name": self.name, **dict(self.params)}
        if self.support_radius is not None:
            out["support_radius"] = self.support_radius
            out["center"] = [self.center.real, self.center.imag]
        return out


@dataclass(frozen=True, eq=False)
class Scaled(SymbolMeasure):
    c: float
    inner: SymbolMeasure

    def __post_init__(self):
        if not self.c > 0:
            raise InputError("scaling constant must be positive")

    def disk_masses(self, centers, radii):
        return self.c * self.inner.disk_masses(centers, radii)

    def discretize(self, rule):
        points, weights = self.inner.discretize(rule)
        return points, self.c * weights

    def discretize_disk(self, center, radius, n_radial=16, n_angular=32):
        points, weights = self.inner.discretize_disk(center, radius, n_radial, n_angular)
        return points, self.c * weights

    def atoms(self):
        return self.inner.atoms()

    def describe(self):
        return {"kind": "scaled", "c": self.c, "inner": self.inner.describe()}


@dataclass(frozen=True, eq=False)
class Sum(SymbolMeasure):
    parts: Sequence[SymbolMeasure]

    def __post_init__(self):
        if not self.parts:
            raise InputError("a sum of measures needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    def disk_masses(self, centers, radii):
        return sum(part.disk_masses(centers, radii) for part in self.parts)

    def discretize(self, rule):
        pieces = [part.discretize(rule) for part in self.parts]
        return (np.concatenate([p for p, _ in pieces]),
                np.concatenate([w for _, w in pieces]))

    def discretize_disk(self, center, radius, n_radial=16, n_angular=32):
        pieces = [part.discretize_disk(center, radius, n_radial, n_angular)
                  for part in self.parts]
        return (np.concatenate([p for p, _ in pieces]),
                np.concatenate([w for _, w in pieces]))

    def atoms(self):
        return np.concatenate([part.atoms() for part in self.parts])

    def describe(self):
        return {"kind": "sum", "parts": [part.describe() for part in self.parts]}


# ---------------------------------------------------------------------------
# Built-ins
# ---------------------------------------------------------------------------


def dirac(at: complex = 0j, mass: float = 1.0) -> Atomic:
    return Atomic(np.array([at]), np.array([mass]), name="dirac")


def area() -> Density:
    """Lebesgue area measure dA."""
    return Density(
        w=lambda z: np.ones(np.shape(z)),
        name="area",
        exact_disk_mass=lambda c, r: np.pi * r ** 2,
    )


def gaussian_density(beta: float) -> Density:
    """e^{-beta |z|^2} dA."""
    if beta <= 0:
        raise ConfigError("gaussian_density needs beta > 0")
    beta = float(beta)
    return Density(
        w=lambda z: np.exp(-beta * np.abs(z) ** 2),
        name="gaussian_density",
        params={"beta": beta},
    )


def _lens_area(d: np.ndarray, r1: np.ndarray, r2: float) -> np.ndarray:
    """Area of D(0, r1) intersected with D(d, r2) for distances d >= 0."""
    d = np.asarray(d, dtype=float)
    r1 = np.broadcast_to(np.asarray(r1, dtype=float), d.shape)
    out = np.zeros(d.shape)
    inside = d <= np.abs(r1 - r2)
    out[inside] = np.pi * np.minimum(r1[inside], r2) ** 2
    partial = ~inside & (d < r1 + r2)
    if np.any(partial):
        dd, a = d[partial], r1[partial]
        b = r2
        alpha = np.arccos(np.clip((dd ** 2 + a ** 2 - b ** 2) / (2 * dd * a), -1.0, 1.0))
        beta = np.arccos(np.clip((dd ** 2 + b ** 2 - a ** 2) / (2 * dd * b), -1.0, 1.0))
        out[partial] = (a ** 2 * (alpha - 0.5 * np.sin(2 * alpha))
                        + b ** 2 * (beta - 0.5 * np.sin(2 * beta)))
    return out


def indicator_disk(center: complex, radius: float) -> Density:
    """chi_{D(center, radius)} dA, with exact disk masses by lens areas."""
    if radius <= 0:
        raise ConfigError("indicator_disk needs a positive radius")
    center, radius = complex(center), float(radius)
    return Density(
        w=lambda z: np.ones(np.shape(z)),
        support_radius=radius,
        center=center,
        name="indicator_disk",
        params={"radius": radius},
        exact_disk_mass=lambda c, r: _lens_area(np.abs(c - center), r, radius),
    )


def power_density(k: float, support_radius: float) -> Density:
    """|z|^k dA on D(0, support_radius)."""
    if k < 0 or support_radius <= 0:
        raise ConfigError("power_density needs k >= 0 and a positive support radius")
    k = float(k)
    return Density(
        w=lambda z: np.abs(z) ** k,
        support_radius=float(support_radius),
        name="power_density",
        params={"k": k},
    )


def random_atomic(count: int, radius: float, rng: np.random.Generator,
                  mass_range: Tuple[float, float] = (0.5, 1.5)) -> Atomic:
    """Atoms uniform in D(0, radius) with uniform masses."""
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
    theta = rng.uniform(0.0, 2.0 * np.pi, count)
    masses = rng.uniform(*mass_range, count)
    return Atomic(r * np.exp(1j * theta), masses, name="random_atomic")


def load_atoms(path: Union[str, Path]) -> Atomic:
    """Read ``re, im, mass`` rows; a non-numeric first row is taken as a header."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"atom file not found: {path}")
    points: List[complex] = []
    masses: List[float] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                re_, im_, mass = (float(x) for x in row[:3])
            except ValueError:
                if lineno == 1:
                    continue
                raise InputError(f"{path}:{lineno}: expected re, im, mass")
            points.append(complex(re_, im_))
            masses.append(mass)
    return Atomic(np.array(points), np.array(masses), name=path.stem)


def save_atoms(mu: Atomic, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["re", "im", "mass"])
        for z, m in zip(mu.points, mu.masses):
            writer.writerow([repr(z.real), repr(z.imag), repr(float(m))])
    return path


def symbol_from_spec(spec: Mapping, base_dir: Optional[Path] = None,
                     rng: Optional[np.random.Generator] = None) -> SymbolMeasure:
    """Build a symbol from its config descriptor (``{"kind": ..., ...}``)."""
    kind = str(spec.get("kind", "")).lower()
    if kind == "dirac":
        at = spec.get("at", [0.0, 0.0])
        return dirac(complex(at[0], at[1]), spec.get("mass", 1.0))
    if kind == "atomic":
        if "path" in spec:
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_atoms(path)
        rows = np.asarray(spec.get("atoms", []), dtype=float).reshape(-1, 3)
        return Atomic(rows[:, 0] + 1j * rows[:, 1], rows[:, 2], name=spec.get("name", "atomic"))
    if kind == "random_atomic":
        rng = rng if rng is not None else np.random.default_rng(spec.get("seed", 0))
        return random_atomic(int(spec.get("count", 12)), float(spec.get("radius", 1.5)), rng)
    if kind == "area":
        return area()
    if kind == "gaussian_density":
        return gaussian_density(spec.get("beta", 1.0))
    if kind == "indicator_disk":
        c = spec.get("center", [0.0, 0.0])
        return indicator_disk(complex(c[0], c[1]), spec.get("radius", 1.0))
    if kind == "power_density":
        return power_density(spec.get("k", 2.0), spec.get("support_radius", 2.0))
    if kind == "scaled":
        return Scaled(float(spec["c"]), symbol_from_spec(spec["inner"], base_dir, rng))
    if kind == "sum":
        return Sum([symbol_from_spec(part, base_dir, rng) for part in spec.get("parts", [])])
    raise ConfigError(f"unknown symbol kind: {kind!r}")


def measure_disk_mass(mu: SymbolMeasure, center: complex, radius: float) -> float:
    return float(mu.disk_masses(np.array([center]), np.array([radius]))[0])


def averaging_transform(mu: SymbolMeasure, rf: RadiusField, r: float,
                        z: Union[complex, np.ndarray]) -> np.ndarray:
    """mu(D(z, r rho(z))) / (pi r^2 rho(z)^2), vectorized over z."""
    if r <= 0:
        raise ValueError("averaging radius must be positive")
    z = np.asarray(z, dtype=complex)
    rho = rf(z)
    masses = mu.disk_masses(z.ravel(), (r * rho).ravel()).reshape(z.shape)
    return masses / (math.pi * r ** 2 * rho ** 2)
