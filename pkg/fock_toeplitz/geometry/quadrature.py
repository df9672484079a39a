"""Planar and radial quadrature against exponential weights.

Every integral in the package goes through this module. Rules are immutable; evaluation is a
plain ``weights @ values`` with a fixed node order so repeated runs are bit-identical.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Tuple, Union

import numpy as np
from scipy.special import roots_legendre
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from ..errors import PoisonedIntegrandError, QuadratureError

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]
Scalar = Union[float, complex]

# Tail of r^(2N+1) e^(-2 phi) below this fraction of its peak is dropped.
TRUNCATION_REL = 1e-20
MAX_CUTOFF = 1e4
MAX_REFINEMENTS = 6


@dataclass(frozen=True)
class Integral:
    """Quadrature value with the difference between two refinement levels."""

    value: Scalar
    error: float

    def __float__(self) -> float:
        return float(np.real(self.value))


class _NotConverged(Exception):
    def __init__(self, value, error):
        super().__init__(f"estimated error {error:.3e}")
        self.value = value
        self.error = error


def converge(compute: Callable[[int], np.ndarray], rtol: float, atol: float = 0.0,
             max_levels: int = MAX_REFINEMENTS):
    """Refine ``compute(level)`` until two consecutive levels agree.

    Returns ``(fine_value, error_estimate)``; raises :class:`QuadratureError` when the
    levels still disagree after ``max_levels`` doublings.
    """
    cache: Dict[int, np.ndarray] = {}

    def level_value(level: int) -> np.ndarray:
        if level not in cache:
            cache[level] = np.asarray(compute(level))
        return cache[level]

    result = {}
    try:
        for attempt in Retrying(
            stop=stop_after_attempt(max_levels),
            retry=retry_if_exception_type(_NotConverged),
            reraise=True,
        ):
            with attempt:
                level = attempt.retry_state.attempt_number - 1
                coarse, fine = level_value(level), level_value(level + 1)
                error = np.abs(fine - coarse)
                if np.any(error > rtol * np.abs(fine) + atol):
                    raise _NotConverged(fine, float(np.max(error)))
                result["value"], result["error"] = fine, float(np.max(error, initial=0.0))
    except _NotConverged as exc:
        raise QuadratureError(
            f"quadrature did not converge after {max_levels} refinements "
            f"(estimated error {exc.error:.3e})",
            estimate=exc.error,
        ) from exc
    return result["value"], result["error"]


def gauss_legendre_unit(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _check_finite(values: np.ndarray, nodes: np.ndarray) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        where = nodes[bad][:5]
        raise PoisonedIntegrandError(
            f"integrand is not finite at {int(bad.sum())} node(s), e.g. {list(where)}"
        )


class Scheme(str, Enum):
    POLAR_TENSOR = "polar_tensor"
    CARTESIAN_GRID = "cartesian_grid"


@dataclass(frozen=True)
class PlaneRule:
    """Quadrature rule for integrals over the truncation disk D(0, cutoff)."""

    scheme: Scheme
    cutoff: float
    n_radial: int = 0
    n_angular: int = 0
    spacing: float = 0.0
    rotation: float = 0.0
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.scheme == Scheme.POLAR_TENSOR:
            nodes, weights = self._polar_nodes()
        else:
            nodes, weights = self._cartesian_nodes()
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def polar(cls, n_radial: int, n_angular: int, cutoff: float,
              rotation: float = 0.0) -> "PlaneRule":
        return cls(Scheme.POLAR_TENSOR, float(cutoff), n_radial=int(n_radial),
                   n_angular=int(n_angular), rotation=float(rotation))

    @classmethod
    def cartesian(cls, spacing: float, cutoff: float) -> "PlaneRule":
        return cls(Scheme.CARTESIAN_GRID, float(cutoff), spacing=float(spacing))

    def _polar_nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        # r = R t^2 clusters nodes near the origin where e^(-p phi) is largest.
        t, wt = gauss_legendre_unit(self.n_radial)
        radius = self.cutoff * t ** 2
        radial_weight = 2.0 * self.cutoff ** 2 * t ** 3 * wt
        theta = self.rotation + 2.0 * np.pi * (np.arange(self.n_angular) + 0.5) / self.n_angular
        nodes = radius[:, None] * np.exp(1j * theta)[None, :]
        weights = radial_weight[:, None] * np.full(self.n_angular, 2.0 * np.pi / self.n_angular)
        return nodes.ravel(), weights.ravel()

    def _cartesian_nodes(self) -> Tuple[np.ndarray, np.ndarray]:
        k = int(math.floor(self.cutoff / self.spacing))
        axis = self.spacing * np.arange(-k, k + 1)
        grid = (axis[None, :] + 1j * axis[:, None]).ravel()
        nodes = grid[np.abs(grid) <= self.cutoff]
        # Cell weights are rescaled so the rule integrates 1 to the exact disk area.
        weights = np.full(nodes.size, np.pi * self.cutoff ** 2 / nodes.size)
        return nodes, weights

    def refined(self, factor: int = 2) -> "PlaneRule":
        if self.scheme == Scheme.POLAR_TENSOR:
            return PlaneRule.polar(self.n_radial * factor, self.n_angular * factor,
                                   self.cutoff, self.rotation)
        return PlaneRule.cartesian(self.spacing / factor, self.cutoff)

    def rotated(self, angle: float) -> "PlaneRule":
        if self.scheme != Scheme.POLAR_TENSOR:
            raise ValueError("only polar rules can be rotated")
        return PlaneRule.polar(self.n_radial, self.n_angular, self.cutoff, self.rotation + angle)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def describe(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "cutoff": self.cutoff,
            "n_radial": self.n_radial,
            "n_angular": self.n_angular,
            "spacing": self.spacing,
        }


@dataclass(frozen=True)
class DiskRule:
    """Tensor polar rule mapped to the disk D(center, radius)."""

    center: complex
    radius: float
    n_radial: int = 8
    n_angular: int = 16
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")
        offsets, weights = unit_disk_rule(self.n_radial, self.n_angular)
        object.__setattr__(self, "nodes", self.center + self.radius * offsets)
        object.__setattr__(self, "weights", self.radius ** 2 * weights)

    def refined(self, factor: int = 2) -> "DiskRule":
        return DiskRule(self.center, self.radius, self.n_radial * factor, self.n_angular * factor)


def unit_disk_rule(n_radial: int, n_angular: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the polar tensor rule on the unit disk."""
    t, wt = gauss_legendre_unit(n_radial)
    theta = 2.0 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    offsets = t[:, None] * np.exp(1j * theta)[None, :]
    weights = (t * wt)[:, None] * np.full(n_angular, 2.0 * np.pi / n_angular)
    return offsets.ravel(), weights.ravel()


def disk_sums(f: Integrand, centers: np.ndarray, radii: np.ndarray, n_radial: int,
              n_angular: int, chunk: int = 4096) -> np.ndarray:
    """Integrate ``f`` over many disks D(centers[i], radii[i]) with one fixed rule."""
    centers = np.atleast_1d(np.asarray(centers, dtype=complex))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape)
    offsets, weights = unit_disk_rule(n_radial, n_angular)
    out = np.empty(centers.shape, dtype=float)
    flat_c, flat_r, flat_out = centers.ravel(), radii.ravel(), out.reshape(-1)
    step = max(1, chunk // max(1, offsets.size // 64))
    for start in range(0, flat_c.size, step):
        c = flat_c[start:start + step, None]
        r = flat_r[start:start + step, None]
        nodes = c + r * offsets[None, :]
        values = np.asarray(f(nodes), dtype=float)
        _check_finite(values, nodes)
        flat_out[start:start + step] = (r[:, 0] ** 2) * (values @ weights)
    return out


def integrate_plane(f: Integrand, rule: PlaneRule) -> Integral:
    """Integrate ``f`` over the truncation disk of ``rule``.

    The error estimate is the difference with the rule refined once.
    """
    value = _apply(f, rule.nodes, rule.weights)
    fine = rule.refined()
    error = abs(_apply(f, fine.nodes, fine.weights) - value)
    return Integral(value, float(error))


def integrate_disk(f: Integrand, rule: DiskRule) -> Integral:
    value = _apply(f, rule.nodes, rule.weights)
    fine = rule.refined()
    error = abs(_apply(f, fine.nodes, fine.weights) - value)
    return Integral(value, float(error))


def _apply(f: Integrand, nodes: np.ndarray, weights: np.ndarray) -> Scalar:
    values = np.asarray(f(nodes))
    values = np.broadcast_to(values, nodes.shape)
    _check_finite(values, nodes)
    total = np.dot(weights, values)
    return complex(total) if np.iscomplexobj(total) else float(total)


def weight_cutoff(log_weight: Callable[[np.ndarray], np.ndarray], power: int,
                  rel: float = TRUNCATION_REL, start: float = 4.0) -> float:
    """Smallest radius past the peak where r^power * weight(r) drops below ``rel`` of the peak.

    Returns 0.0 for a weight that vanishes identically on the scanned range.
    """
    log_rel = math.log(rel)
    hi = start
    while hi <= MAX_CUTOFF:
        r = np.linspace(0.0, hi, 8001)[1:]
        with np.errstate(divide="ignore"):
            log_g = power * np.log(r) + np.asarray(log_weight(r), dtype=float)
        if not np.any(np.isfinite(log_g)):
            return 0.0
        peak = int(np.nanargmax(np.where(np.isfinite(log_g), log_g, -np.inf)))
        below = np.nonzero(log_g[peak:] < log_g[peak] + log_rel)[0]
        if below.size:
            return float(r[peak + below[0]])
        hi *= 2.0
    raise QuadratureError(
        f"weight tail not below {rel:g} of its peak before r = {MAX_CUTOFF:g}",
        suggested_cutoff=hi,
    )


def radial_moments(weight: Callable[[np.ndarray], np.ndarray], n_max: int,
                   cutoff: float = None, rtol: float = 1e-10) -> np.ndarray:
    """Moments h_n = 2 pi int_0^inf r^(2n+1) weight(r) dr for n = 0..n_max."""

    def log_weight(r):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(weight(r), dtype=float))

    if cutoff is None:
        cutoff = weight_cutoff(log_weight, 2 * n_max + 1)
    if cutoff == 0.0:
        return np.zeros(n_max + 1)

    powers = 2 * np.arange(n_max + 1) + 1

    def compute(level: int) -> np.ndarray:
        n_panels = 32 * 2 ** level
        t, wt = gauss_legendre_unit(20)
        edges = np.linspace(0.0, cutoff, n_panels + 1)
        width = np.diff(edges)
        r = (edges[:-1, None] + width[:, None] * t[None, :]).ravel()
        w = (width[:, None] * wt[None, :]).ravel()
        lw = log_weight(r)
        with np.errstate(divide="ignore", under="ignore"):
            terms = np.exp(powers[:, None] * np.log(r)[None, :] + lw[None, :])
        _check_finite(terms, np.broadcast_to(r, terms.shape))
        return 2.0 * np.pi * (terms @ w)

    try:
        moments, _ = converge(compute, rtol=rtol)
    except QuadratureError as exc:
        raise QuadratureError(str(exc), estimate=exc.estimate,
                              suggested_cutoff=2.0 * cutoff) from exc
    logger.debug("radial moments up to n=%d with cutoff %.3f", n_max, cutoff)
    return moments
