"""Subharmonic weights with doubling Laplacian and the geometry they induce.

A :class:`Potential` carries phi and the density of its Laplacian. Everything else in this
module (disk masses, the radius function rho, doubling and Christ constants, dsigma) is
computed from the Laplacian density by quadrature.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from ..errors import (
    ConfigError,
    DegenerateMassError,
    FitFailure,
    InputError,
    MeasureTooThinError,
    QuadratureError,
)
from .quadrature import MAX_REFINEMENTS, converge, disk_sums

logger = logging.getLogger(__name__)

MASS_TOL = 1e-8
RADIUS_TOL = 1e-10
BRACKET_DOUBLINGS = 48
FD_TOL = 1e-3

DELTA_GRID = np.round(np.arange(1, 20) * 0.05, 2)
CONSTANT_GRID = 10.0 ** (np.arange(0, 121) / 20.0)

BASE_DISK_RULE = (8, 16)

ComplexArray = Union[complex, np.ndarray]


class PotentialKind(str, Enum):
    GAUSSIAN_ALPHA = "gaussian_alpha"
    RADIAL_POWER = "radial_power"
    CUSTOM_RADIAL = "custom_radial"
    CUSTOM_GENERAL = "custom_general"


@dataclass(frozen=True)
class Potential:
    """Weight phi on C together with the density of Delta phi w.r.t. area measure.

    Radial kinds also carry their profiles in r = |z|, which the basis and the radius field
    use for their fast paths.
    """

    kind: PotentialKind
    phi: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)
    radial_phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    exact_kernel: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    @property
    def is_radial(self) -> bool:
        return self.radial_phi is not None

    @property
    def has_constant_laplacian(self) -> bool:
        return self.kind == PotentialKind.GAUSSIAN_ALPHA

    def weight(self, z: ComplexArray, p: float = 2.0) -> np.ndarray:
        """e^{-p phi(z)}."""
        return np.exp(-p * self.phi(np.asarray(z)))

    def describe(self) -> dict:
        return {"kind": self.kind.value, **{k: v for k, v in self.params.items()}}


def gaussian_alpha(alpha: float = 1.0) -> Potential:
    """phi(z) = alpha |z|^2 / 2, Delta phi = 2 alpha, K_z(w) = (alpha/pi) e^{alpha w conj(z)}."""
    if alpha <= 0:
        raise ConfigError("GaussianAlpha needs alpha > 0")
    alpha = float(alpha)

    def phi(z):
        return 0.5 * alpha * np.abs(z) ** 2

    def laplacian(z):
        return np.full(np.shape(z), 2.0 * alpha)

    def kernel(z, w):
        return (alpha / np.pi) * np.exp(alpha * w * np.conj(z))

    return Potential(
        PotentialKind.GAUSSIAN_ALPHA,
        phi,
        laplacian,
        params={"alpha": alpha},
        radial_phi=lambda r: 0.5 * alpha * np.asarray(r) ** 2,
        exact_kernel=kernel,
    )


def radial_power(m: float = 2.0, scale: float = 1.0) -> Potential:
    """phi(z) = scale |z|^(2m), Delta phi = scale (2m)^2 |z|^(2m-2)."""
    if m < 1 or scale <= 0:
        raise ConfigError("RadialPower needs m >= 1 and scale > 0")
    m, scale = float(m), float(scale)

    def phi(z):
        return scale * np.abs(z) ** (2.0 * m)

    def laplacian(z):
        return scale * (2.0 * m) ** 2 * np.abs(z) ** (2.0 * m - 2.0)

    return Potential(
        PotentialKind.RADIAL_POWER,
        phi,
        laplacian,
        params={"m": m, "scale": scale},
        radial_phi=lambda r: scale * np.asarray(r) ** (2.0 * m),
    )


def custom_radial(r: Sequence[float], phi_values: Sequence[float],
                  laplacian_values: Sequence[float], source: str = "") -> Potential:
    """Radial potential tabulated as (r, phi(r), Delta phi(r)), interpolated by cubic splines."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0) or r[0] < 0:
        raise InputError("radial profile needs at least 4 strictly increasing radii >= 0")
    lap = np.asarray(laplacian_values, dtype=float)
    if np.any(lap < 0):
        raise InputError("tabulated Laplacian density must be nonnegative")
    phi_spline = CubicSpline(r, np.asarray(phi_values, dtype=float))
    lap_spline = CubicSpline(r, lap)

    def phi(z):
        return phi_spline(np.abs(z))

    def laplacian(z):
        return np.maximum(lap_spline(np.abs(z)), 0.0)

    return Potential(
        PotentialKind.CUSTOM_RADIAL,
        phi,
        laplacian,
        params={"source": source, "r_max": float(r[-1])},
        radial_phi=lambda s: phi_spline(np.asarray(s)),
    )


def load_radial_profile(path: Union[str, Path]) -> Potential:
    """Read a ``r, phi, laplacian`` CSV (header optional) into a custom radial potential."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"radial profile not found: {path}")
    rows: List[Tuple[float, float, float]] = []
    with open(path, "r", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append(tuple(float(x) for x in row[:3]))
            except ValueError:
                continue  # header
    if not rows:
        raise InputError(f"no numeric rows in {path}")
    data = np.array(rows)
    return custom_radial(data[:, 0], data[:, 1], data[:, 2], source=str(path))


def custom_general(phi: Callable, laplacian: Callable, check_radius: float = 2.0,
                   params: Optional[Mapping] = None) -> Potential:
    """General smooth potential; phi and Delta phi must agree under a 5-point stencil."""
    potential = Potential(PotentialKind.CUSTOM_GENERAL, phi, laplacian, params=dict(params or {}))
    mismatch = laplacian_mismatch(potential, check_radius)
    if mismatch > FD_TOL:
        raise InputError(
            f"supplied Laplacian disagrees with the finite-difference Laplacian of phi "
            f"(relative mismatch {mismatch:.2e} > {FD_TOL:g})"
        )
    return potential


def potential_from_spec(spec: Mapping) -> Potential:
    """Build a potential from its config descriptor."""
    kind = str(spec.get("kind", "gaussian_alpha")).lower()
    if kind == PotentialKind.GAUSSIAN_ALPHA.value:
        return gaussian_alpha(spec.get("alpha", 1.0))
    if kind == PotentialKind.RADIAL_POWER.value:
        return radial_power(spec.get("m", 2.0), spec.get("scale", 1.0))
    if kind == PotentialKind.CUSTOM_RADIAL.value:
        if "path" not in spec:
            raise ConfigError("custom_radial potential needs a 'path' to its CSV profile")
        return load_radial_profile(spec["path"])
    if kind == PotentialKind.CUSTOM_GENERAL.value:
        # Config files can only name a Gaussian perturbed by a smooth harmonic-free term.
        alpha = float(spec.get("alpha", 1.0))
        beta = float(spec.get("beta", 0.0))

        def phi(z):
            return 0.5 * alpha * np.abs(z) ** 2 + beta * np.real(z) ** 2

        def laplacian(z):
            return np.full(np.shape(z), 2.0 * alpha + 2.0 * beta)

        return custom_general(phi, laplacian, params={"alpha": alpha, "beta": beta})
    raise ConfigError(f"unknown potential kind: {kind!r}")


def laplacian_mismatch(p: Potential, radius: float = 2.0, n: int = 9,
                       h: float = 1e-3) -> float:
    """Max relative gap between the supplied Laplacian and a 5-point stencil of phi."""
    axis = np.linspace(-radius, radius, n)
    z = (axis[None, :] + 1j * axis[:, None]).ravel()
    stencil = (p.phi(z + h) + p.phi(z - h) + p.phi(z + 1j * h) + p.phi(z - 1j * h)
               - 4.0 * p.phi(z)) / h ** 2
    supplied = p.laplacian(z)
    scale = max(float(np.max(np.abs(supplied))), 1e-300)
    return float(np.max(np.abs(stencil - supplied)) / scale)


# ---------------------------------------------------------------------------
# Disk masses and the radius function
# ---------------------------------------------------------------------------


def disk_masses(p: Potential, centers: ComplexArray, radii: Union[float, np.ndarray],
                rtol: float = MASS_TOL) -> np.ndarray:
    """mu(D(c, r)) = int_D Delta phi dA for many disks, refined until converged."""
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape)
    if np.any(radii <= 0):
        raise ValueError("disk radius must be positive")
    n_r, n_a = BASE_DISK_RULE

    def compute(level: int) -> np.ndarray:
        return disk_sums(p.laplacian, centers, radii, n_r * 2 ** level, n_a * 2 ** level)

    try:
        values, _ = converge(compute, rtol=rtol, atol=1e-300)
    except QuadratureError as exc:
        raise QuadratureError(f"disk mass did not converge: {exc}", estimate=exc.estimate) from exc
    return values


def disk_mass(p: Potential, center: complex, radius: float) -> float:
    """Mass of D(center, radius) under Delta phi dA."""
    return float(disk_masses(p, [center], radius)[0])


def _rule_masses(p: Potential, centers: np.ndarray, radii: np.ndarray, level: int) -> np.ndarray:
    n_r, n_a = BASE_DISK_RULE
    return disk_sums(p.laplacian, centers, radii, n_r * 2 ** level, n_a * 2 ** level)


class _LevelTooCoarse(Exception):
    pass


def radii(p: Potential, zs: ComplexArray, bracket_hint: float = 0.5,
          rtol: float = RADIUS_TOL) -> np.ndarray:
    """rho(z) for many points: geometric bracketing, then bisection in r.

    Bisection runs on a fixed disk rule; the result is then re-checked with the rule refined
    once, and the whole search is repeated one level finer when the check fails.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    out = {}
    retrying = Retrying(stop=stop_after_attempt(MAX_REFINEMENTS),
                        retry=retry_if_exception_type(_LevelTooCoarse), reraise=True)
    try:
        for attempt in retrying:
            with attempt:
                level = attempt.retry_state.attempt_number - 1
                rho = _bisect_radii(p, zs, bracket_hint, rtol, level)
                coarse = _rule_masses(p, zs, rho, level)
                fine = _rule_masses(p, zs, rho, level + 1)
                if np.any(np.abs(fine - coarse) > MASS_TOL * np.abs(fine)):
                    logger.debug("radius search refined to disk-rule level %d", level + 1)
                    raise _LevelTooCoarse()
                out["rho"] = rho
    except _LevelTooCoarse:
        raise QuadratureError("radius search: disk masses did not converge") from None
    return out["rho"].reshape(np.shape(zs))


def _bisect_radii(p: Potential, zs: np.ndarray, hint: float, rtol: float,
                  level: int) -> np.ndarray:
    lo = np.full(zs.shape, float(hint))
    hi = lo.copy()
    for _ in range(BRACKET_DOUBLINGS):
        short = _rule_masses(p, zs, hi, level) < 1.0
        if not np.any(short):
            break
        hi[short] *= 2.0
    else:
        raise MeasureTooThinError(
            f"disk mass stays below 1 up to radius {float(np.max(hi)):.3e}; "
            "the measure is too thin near these points"
        )
    for _ in range(BRACKET_DOUBLINGS):
        heavy = _rule_masses(p, zs, lo, level) >= 1.0
        if not np.any(heavy):
            break
        lo[heavy] *= 0.5
    else:
        raise DegenerateMassError("disk mass reaches 1 on vanishing radii")
    lo = np.minimum(lo, hi)
    steps = int(math.ceil(math.log2(max(float(np.max(hi / lo)), 2.0) / rtol))) + 1
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = _rule_masses(p, zs, mid, level) < 1.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def radius(p: Potential, z: complex, bracket_hint: float = 0.5) -> float:
    """The unique r with mu(D(z, r)) = 1."""
    return float(radii(p, [z], bracket_hint)[0])


class RadiusField:
    """Cached radius function rho for one potential.

    Constant-Laplacian potentials solve once. Radial potentials tabulate rho(|z|) by exact
    bisection on a modulus grid and interpolate with a clamped cubic spline (rho is even in
    |z|). General potentials solve every new point and keep it in a point cache.
    """

    def __init__(self, potential: Potential, bracket_hint: float = 0.5,
                 table_step: float = 0.005):
        self.potential = potential
        self.bracket_hint = bracket_hint
        self.table_step = table_step
        self.logger = logging.getLogger(__name__)
        self._cache: Dict[Tuple[float, float], float] = {}
        self._constant: Optional[float] = None
        self._table_s: Optional[np.ndarray] = None
        self._spline: Optional[CubicSpline] = None

    @property
    def cache(self) -> Mapping[Tuple[float, float], float]:
        return dict(self._cache)

    def __call__(self, z: ComplexArray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.potential.has_constant_laplacian:
            if self._constant is None:
                self._constant = radius(self.potential, 0j, self.bracket_hint)
                self._cache[(0.0, 0.0)] = self._constant
            return np.full(z.shape, self._constant)
        if self.potential.is_radial:
            s = np.abs(z)
            self._ensure_table(float(np.max(s, initial=0.0)))
            return np.asarray(self._spline(s), dtype=float)
        return self._pointwise(z)

    def sigma(self, z: ComplexArray) -> np.ndarray:
        """Density of dsigma = dA / rho^2."""
        return 1.0 / self(z) ** 2

    def _ensure_table(self, s_max: float) -> None:
        if self._table_s is not None and self._table_s[-1] >= s_max:
            return
        top = max(2.0 * s_max, 1.0)
        n = max(257, int(math.ceil(top / self.table_step)) + 1)
        s = np.linspace(0.0, top, n)
        values = radii(self.potential, s.astype(complex), self.bracket_hint)
        self._table_s = s
        self._spline = CubicSpline(s, values, bc_type=((1, 0.0), "not-a-knot"))
        self._cache = {(float(x), 0.0): float(v) for x, v in zip(s, values)}
        self.logger.debug("radius table built on [0, %.3f] with %d nodes", top, n)

    def _pointwise(self, z: np.ndarray) -> np.ndarray:
        flat = z.ravel()
        keys = [(round(float(w.real), 12), round(float(w.imag), 12)) for w in flat]
        missing = sorted({k for k in keys if k not in self._cache})
        if missing:
            pts = np.array([complex(*k) for k in missing])
            values = radii(self.potential, pts, self.bracket_hint)
            self._cache.update(zip(missing, map(float, values)))
        return np.array([self._cache[k] for k in keys]).reshape(z.shape)


def sigma_weight(rf: RadiusField, z: complex) -> float:
    """1 / rho(z)^2."""
    return float(rf.sigma(np.asarray([z]))[0])


# ---------------------------------------------------------------------------
# Doubling and Christ constants
# ---------------------------------------------------------------------------


def doubling_constant(p: Potential, sample_centers: Sequence[complex],
                      sample_radii: Sequence[float]) -> float:
    """max over samples of mu(D(z, 2r)) / mu(D(z, r)); a lower bound for C_mu."""
    centers = np.asarray(sample_centers, dtype=complex)
    rs = np.asarray(sample_radii, dtype=float)
    if centers.size == 0 or rs.size == 0:
        raise ValueError("doubling_constant needs nonempty samples")
    c, r = np.meshgrid(centers, rs, indexing="ij")
    inner = disk_masses(p, c.ravel(), r.ravel())
    if np.any(inner <= 0):
        raise DegenerateMassError("zero mass on a sampled disk; ratio undefined")
    outer = disk_masses(p, c.ravel(), 2.0 * r.ravel())
    return float(np.max(outer / inner))


@dataclass(frozen=True)
class ConstantFit:
    """Best (constant, exponent) pair on the search lattice plus the per-exponent table."""

    constant: float
    exponent: float
    table: Mapping[float, float]

    def as_dict(self) -> dict:
        return {
            "constant": self.constant,
            "exponent": self.exponent,
            "table": {f"{k:.2f}": v for k, v in self.table.items()},
        }


def _smallest_grid_constant(required: float) -> Optional[float]:
    # Slack absorbs quadrature noise on exactly tight ratios.
    idx = np.nonzero(CONSTANT_GRID * (1.0 + 1e-8) >= required)[0]
    return float(CONSTANT_GRID[idx[0]]) if idx.size else None


def fit_on_lattice(required: Dict[float, float], what: str) -> ConstantFit:
    table = {d: c for d, c in ((d, _smallest_grid_constant(req)) for d, req in required.items())
             if c is not None}
    if not table:
        raise FitFailure(f"{what}: no feasible (C, delta) on the search lattice")
    best = min(table.items(), key=lambda item: (item[1], -item[0]))
    return ConstantFit(constant=best[1], exponent=float(best[0]), table=table)


def christ_fit(p: Potential, disk_pairs: Sequence[Tuple[Tuple[complex, float],
                                                          Tuple[complex, float]]]) -> ConstantFit:
    """Fit C, delta with C^-1 (r'/r)^(1/delta) mu(D) <= mu(D') <= C (r'/r)^delta mu(D)."""
    if not disk_pairs:
        raise ValueError("christ_fit needs at least one disk pair")
    big_c, big_r, small_c, small_r = (np.array(x) for x in zip(
        *[(d[0], d[1], e[0], e[1]) for d, e in disk_pairs]))
    big_r, small_r = big_r.astype(float), small_r.astype(float)
    if np.any(small_r >= big_r) or np.any(np.abs(big_c - small_c) >= big_r + small_r):
        raise InputError("each pair must be intersecting disks (D, D') with r' < r")
    m = disk_masses(p, big_c, big_r)
    m_small = disk_masses(p, small_c, small_r)
    if np.any(m_small <= 0):
        raise DegenerateMassError("zero mass on a sampled disk")
    t = small_r / big_r
    required = {}
    for delta in DELTA_GRID:
        upper = m_small / (t ** delta * m)
        lower = t ** (1.0 / delta) * m / m_small
        required[float(delta)] = float(max(1.0, np.max(upper), np.max(lower)))
    return fit_on_lattice(required, "christ_fit")


def rho_outside_fit(rf: RadiusField, pairs: Sequence[Tuple[complex, complex]]) -> ConstantFit:
    """Feasibility of rho(z) <= C |z-w|^(1-delta) rho(w)^delta (and z <-> w) for w outside D(z)."""
    z = np.array([a for a, _ in pairs], dtype=complex)
    w = np.array([b for _, b in pairs], dtype=complex)
    rz, rw = rf(z), rf(w)
    dist = np.abs(z - w)
    keep = dist >= rz
    if not np.any(keep):
        raise InputError("no pair has w outside D(z)")
    z, rz, rw, dist = z[keep], rz[keep], rw[keep], dist[keep]
    required = {}
    for delta in DELTA_GRID:
        forward = rz / (dist ** (1.0 - delta) * rw ** delta)
        backward = rw / (dist ** (1.0 - delta) * rz ** delta)
        required[float(delta)] = float(max(np.max(forward), np.max(backward)))
    return fit_on_lattice(required, "rho_outside_fit")


def lipschitz_excess(rf: RadiusField, z: np.ndarray, w: np.ndarray) -> float:
    """max(|rho(w) - rho(z)| - |z - w|); nonpositive up to 2 radius tolerances."""
    z, w = np.asarray(z, dtype=complex), np.asarray(w, dtype=complex)
    return float(np.max(np.abs(rf(w) - rf(z)) - np.abs(z - w)))


def rho_ball_excess(rf: RadiusField, centers: np.ndarray, r: float,
                    rng: np.random.Generator, samples: int = 32) -> float:
    """Worst violation of (1-r) rho(z) <= rho(w) <= (1+r) rho(z) for w in D^r(z), relative."""
    if not 0 < r < 1:
        raise ValueError("the explicit c_r = 1/(1-r) bound needs 0 < r < 1")
    centers = np.asarray(centers, dtype=complex)
    rz = rf(centers)
    radius_frac = r * np.sqrt(rng.uniform(0.0, 1.0, (centers.size, samples)))
    angles = rng.uniform(0.0, 2.0 * np.pi, (centers.size, samples))
    w = centers[:, None] + radius_frac * rz[:, None] * np.exp(1j * angles)
    rw = rf(w)
    low = (1.0 - r) * rz[:, None] - rw
    high = rw - (1.0 + r) * rz[:, None]
    return float(np.max(np.maximum(low, high) / rz[:, None]))
