"""Geodesic distance d_phi on a weighted 8-neighbour grid graph."""

import logging
import math
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..errors import DomainError, FitFailure, InputError
from .potential import DELTA_GRID, ConstantFit, RadiusField, fit_on_lattice

logger = logging.getLogger(__name__)

# Half of the 8 neighbour offsets; the graph is undirected.
_STEPS = ((1, 0), (0, 1), (1, 1), (1, -1))


class GeodesicGrid:
    """Square grid on [-half_width, half_width]^2 with edges weighted by the metric 1/rho.

    An edge between neighbours a, b costs |a - b| * 2 / (rho(a) + rho(b)). Shortest paths are
    upper bounds of d_phi that converge as the spacing shrinks.
    """

    def __init__(self, radius_field: RadiusField, half_width: float,
                 spacing: Optional[float] = None):
        if half_width <= 0:
            raise ValueError("half_width must be positive")
        self.radius_field = radius_field
        self.half_width = float(half_width)
        self.logger = logging.getLogger(__name__)

        if spacing is None:
            coarse = np.linspace(-half_width, half_width, 33)
            probe = coarse[None, :] + 1j * coarse[:, None]
            spacing = float(np.min(radius_field(probe))) / 8.0
        self.spacing = float(spacing)
        k = int(math.ceil(self.half_width / self.spacing))
        self._k = k
        self.axis = self.spacing * np.arange(-k, k + 1)
        self.nodes = self.axis[None, :] + 1j * self.axis[:, None]
        self.rho = radius_field(self.nodes)
        self._graph = self._build_graph()
        self._sources: Dict[int, np.ndarray] = {}
        self.logger.debug("geodesic grid: %d nodes, spacing %.4g", self.nodes.size, self.spacing)

    @property
    def shape(self):
        return self.nodes.shape

    def _build_graph(self):
        n = self.axis.size
        idx = np.arange(n * n).reshape(n, n)
        rho = self.rho
        rows, cols, weights = [], [], []
        for di, dj in _STEPS:
            # di moves along the imaginary axis (rows), dj along the real axis.
            i0, i1 = max(0, -di), n - max(0, di)
            j0, j1 = max(0, -dj), n - max(0, dj)
            a = idx[i0:i1, j0:j1]
            b = idx[i0 + di:i1 + di, j0 + dj:j1 + dj]
            ra = rho[i0:i1, j0:j1]
            rb = rho[i0 + di:i1 + di, j0 + dj:j1 + dj]
            length = self.spacing * math.hypot(di, dj)
            rows.append(a.ravel())
            cols.append(b.ravel())
            weights.append((length * 2.0 / (ra + rb)).ravel())
        size = n * n
        return coo_matrix(
            (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        ).tocsr()

    def node_index(self, z: complex) -> int:
        """Flat index of the grid node nearest to z."""
        if abs(z.real) > self.half_width + 1e-12 or abs(z.imag) > self.half_width + 1e-12:
            raise DomainError(f"point {z} lies outside the geodesic grid hull", [z])
        j = int(round(z.real / self.spacing)) + self._k
        i = int(round(z.imag / self.spacing)) + self._k
        n = self.axis.size
        return min(max(i, 0), n - 1) * n + min(max(j, 0), n - 1)

    def distances_from(self, z: complex) -> np.ndarray:
        """d_phi from z to every node, shaped like the grid."""
        source = self.node_index(complex(z))
        if source not in self._sources:
            self._sources[source] = dijkstra(self._graph, directed=False, indices=source)
        return self._sources[source].reshape(self.shape)

    def distances(self, z: complex, points: Sequence[complex]) -> np.ndarray:
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        outside = points[(np.abs(points.real) > self.half_width + 1e-12)
                         | (np.abs(points.imag) > self.half_width + 1e-12)]
        if outside.size:
            raise DomainError("points outside the geodesic grid hull", list(outside))
        field = self.distances_from(z).ravel()
        return np.array([field[self.node_index(complex(w))] for w in points])


def geodesic_distance(g: GeodesicGrid, z: complex, w: complex) -> float:
    """Shortest-path distance between the grid nodes nearest to z and w."""
    if g.node_index(complex(z)) == g.node_index(complex(w)):
        return 0.0
    return float(g.distances(z, [w])[0])


def triangle_excess(g: GeodesicGrid, triples: Sequence[Sequence[complex]]) -> float:
    """max of d(a, c) - d(a, b) - d(b, c) over sampled triples; nonpositive for a metric."""
    worst = -math.inf
    for a, b, c in triples:
        worst = max(worst, geodesic_distance(g, a, c) - geodesic_distance(g, a, b)
                    - geodesic_distance(g, b, c))
    return float(worst)


def near_diagonal_constant(g: GeodesicGrid, centers: Sequence[complex], r: float,
                           n_angles: int = 8) -> float:
    """Smallest c_r with c_r^-1 |z-w|/rho(z) <= d(z, w) <= c_r |z-w|/rho(z) on D^r(z) samples."""
    if r <= 0:
        raise InputError("r must be positive")
    rf = g.radius_field
    worst = 1.0
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    for z in np.asarray(centers, dtype=complex):
        rz = float(rf(np.array([z]))[0])
        step = r * rz
        if step < 2.0 * g.spacing:
            raise InputError(f"D^{r}({z}) is not resolved by grid spacing {g.spacing:.3g}")
        ws = z + step * np.exp(1j * angles)
        d = g.distances(z, ws)
        # Snap to the nodes the distances were measured between.
        zn = g.nodes.ravel()[g.node_index(complex(z))]
        euclid = np.abs(np.array([g.nodes.ravel()[g.node_index(complex(w))] for w in ws]) - zn)
        ratio = d * rz / euclid
        worst = max(worst, float(np.max(ratio)), float(np.max(1.0 / ratio)))
    return worst


def far_field_fit(g: GeodesicGrid, pairs: Sequence[Sequence[complex]]) -> ConstantFit:
    """Feasibility of d(z, w) >= c^-1 (|z-w| / rho(z))^delta for far pairs."""
    rf = g.radius_field
    z = np.array([a for a, _ in pairs], dtype=complex)
    w = np.array([b for _, b in pairs], dtype=complex)
    rz = rf(z)
    scaled = np.abs(z - w) / rz
    keep = scaled >= 1.0
    if not np.any(keep):
        raise InputError("no far pair (|z-w| >= rho(z)) among samples")
    d = np.array([geodesic_distance(g, a, b) for a, b in zip(z[keep], w[keep])])
    required = {float(delta): float(np.max(scaled[keep] ** delta / d)) for delta in DELTA_GRID}
    return fit_on_lattice(required, "far_field_fit")


def distance_estimate_report(g: GeodesicGrid, centers: Sequence[complex], r: float,
                             far_pairs: Sequence[Sequence[complex]]) -> dict:
    """Near-diagonal constant against c_r = 1/(1-r), plus the far-field feasibility fit."""
    if not 0 < r < 1:
        raise InputError("the explicit c_r = 1/(1-r) needs 0 < r < 1")
    measured = near_diagonal_constant(g, centers, r)
    explicit = 1.0 / (1.0 - r)
    report = {
        "r": r,
        "c_r": explicit,
        "near_diagonal": measured,
        "near_diagonal_ok": bool(measured <= explicit),
    }
    try:
        report["far_field"] = far_field_fit(g, far_pairs).as_dict()
    except FitFailure as e:
        logger.warning("⚠️  %s", e)
        report["far_field"] = None
    return report
