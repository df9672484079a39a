"""(r, phi)-lattices: greedy construction, overlap index, separated partitions."""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ConfigError, InputError, LatticeError
from ..geometry.potential import RadiusField

logger = logging.getLogger(__name__)

CANDIDATE_FACTOR = 1.0 / 8.0
SEPARATION_FACTOR = 0.5
PROBE_REFINEMENT = 10
COUNTING_CONSTANT = 36.0


def _xy(z: np.ndarray) -> np.ndarray:
    return np.column_stack([np.real(z), np.imag(z)])


def min_rho(rf: RadiusField, domain_radius: float, n: int = 65) -> float:
    """Smallest rho sampled on D(0, domain_radius), boundary circle included."""
    axis = np.linspace(-domain_radius, domain_radius, n)
    grid = (axis[None, :] + 1j * axis[:, None]).ravel()
    grid = grid[np.abs(grid) <= domain_radius]
    ring = domain_radius * np.exp(2j * np.pi * np.arange(4 * n) / (4 * n))
    return float(np.min(rf(np.concatenate([grid, ring]))))


def _disk_grid(spacing: float, domain_radius: float) -> np.ndarray:
    k = int(math.floor(domain_radius / spacing))
    axis = spacing * np.arange(-k, k + 1)
    grid = (axis[None, :] + 1j * axis[:, None]).ravel()
    return grid[np.abs(grid) <= domain_radius * (1.0 + 1e-12)]


def sweep_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting points by (|z|, arg z) with arg in [0, 2 pi)."""
    modulus = np.round(np.abs(points), 12)
    angle = np.round(np.mod(np.angle(points), 2.0 * np.pi), 12)
    return np.lexsort((angle, modulus))


def candidate_grid(rf: RadiusField, r: float, domain_radius: float) -> np.ndarray:
    """Grid of spacing (r/8) min rho on D(0, R_max), in sweep order."""
    spacing = CANDIDATE_FACTOR * r * min_rho(rf, domain_radius)
    grid = _disk_grid(spacing, domain_radius)
    return grid[sweep_order(grid)]


def probe_grid(rf: RadiusField, r: float, domain_radius: float,
               refinement: int = PROBE_REFINEMENT) -> np.ndarray:
    """Grid of spacing r min rho / refinement on D(0, R_max)."""
    return _disk_grid(r * min_rho(rf, domain_radius) / refinement, domain_radius)


@dataclass(frozen=True, eq=False)
class Lattice:
    points: np.ndarray
    r: float
    domain_radius: float
    overlap_index: int
    covering_certificate: float
    rho: np.ndarray

    @property
    def size(self) -> int:
        return int(self.points.size)

    def describe(self) -> dict:
        return {
            "r": self.r,
            "domain_radius": self.domain_radius,
            "overlap_index": self.overlap_index,
            "covering_certificate": self.covering_certificate,
            "points": self.size,
        }


def disk_membership(centers: np.ndarray, radii: np.ndarray, probes: np.ndarray,
                    chunk: int = 100_000) -> np.ndarray:
    """For every probe, how many open disks D(centers[j], radii[j]) contain it."""
    counts = np.zeros(probes.size, dtype=int)
    if centers.size == 0 or probes.size == 0:
        return counts
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape)
    center_tree = cKDTree(_xy(centers))
    reach = float(radii.max())
    for start in range(0, probes.size, chunk):
        block = probes[start:start + chunk]
        pairs = center_tree.sparse_distance_matrix(cKDTree(_xy(block)), reach,
                                                   output_type="ndarray")
        inside = pairs["v"] < radii[pairs["i"]]
        counts[start:start + chunk] = np.bincount(pairs["j"][inside], minlength=block.size)
    return counts


def _greedy(candidates: np.ndarray, rho: np.ndarray, r: float) -> np.ndarray:
    tree = cKDTree(_xy(candidates))
    alive = np.ones(candidates.size, dtype=bool)
    accepted: List[int] = []
    half = SEPARATION_FACTOR * r
    for i in range(candidates.size):
        if not alive[i]:
            continue
        accepted.append(i)
        near = np.asarray(tree.query_ball_point((candidates[i].real, candidates[i].imag),
                                                half * rho[i]), dtype=int)
        if near.size:
            gap = np.abs(candidates[near] - candidates[i])
            alive[near[gap < half * np.minimum(rho[near], rho[i])]] = False
    return np.asarray(accepted, dtype=int)


def build_lattice(rf: RadiusField, r: float, domain_radius: float,
                  refinement: int = PROBE_REFINEMENT) -> Lattice:
    """Greedy (r/2) min-rho separated net over a fine candidate grid.

    The result must cover every probe z with |z| <= R_max - r rho(z) by some D^r(z_j).
    """
    if r <= 0 or domain_radius <= 0:
        raise ConfigError("lattice needs r > 0 and R_max > 0")
    candidates = candidate_grid(rf, r, domain_radius)
    rho_c = rf(candidates)
    chosen = _greedy(candidates, rho_c, r)
    points, rho = candidates[chosen], rho_c[chosen]
    logger.debug("lattice r=%.3g: %d of %d candidates accepted", r, points.size,
                 candidates.size)

    probes = probe_grid(rf, r, domain_radius, refinement)
    counts = disk_membership(points, r * rho, probes)
    interior = np.abs(probes) <= domain_radius - r * rf(probes)
    covered = counts[interior] > 0
    certificate = float(covered.mean()) if covered.size else 1.0
    if certificate < 1.0:
        raise LatticeError(
            f"lattice r={r} leaves {int((~covered).sum())} probe point(s) uncovered",
            list(probes[interior][~covered][:20]),
        )
    return Lattice(points, float(r), float(domain_radius), int(counts.max(initial=0)),
                   certificate, rho)


def overlap_index(lat: Lattice, probes: np.ndarray) -> int:
    """N_r = max over probes of #{j : probe in D^r(z_j)}."""
    counts = disk_membership(lat.points, lat.r * lat.rho, np.asarray(probes, dtype=complex))
    return int(counts.max(initial=0))


def covering_certificate(lat: Lattice, probes: np.ndarray, rf: RadiusField) -> float:
    """Covered fraction of the probes that lie at least r rho(z) inside D(0, R_max)."""
    probes = np.asarray(probes, dtype=complex)
    interior = probes[np.abs(probes) <= lat.domain_radius - lat.r * rf(probes)]
    if interior.size == 0:
        return 1.0
    counts = disk_membership(lat.points, lat.r * lat.rho, interior)
    return float(np.mean(counts > 0))


def _check_distinct(points: np.ndarray) -> None:
    keys = np.round(_xy(points), 12)
    if np.unique(keys, axis=0).shape[0] != points.size:
        raise InputError("points must be distinct")


def m_r_index(points: Sequence[complex], R: float, rf: RadiusField) -> int:
    """M_R = max_j #{k : |z_j - z_k| < R min(rho(z_j), rho(z_k))}, counting k = j."""
    points = np.asarray(points, dtype=complex)
    _check_distinct(points)
    if points.size == 0:
        return 0
    rho = rf(points)
    best = 0
    for start in range(0, points.size, 512):
        block = points[start:start + 512]
        gap = np.abs(block[:, None] - points[None, :])
        bound = R * np.minimum(rho[start:start + 512, None], rho[None, :])
        best = max(best, int(np.max(np.sum(gap < bound, axis=1))))
    return best


def partition_separated(points: Sequence[complex], R: float,
                        rf: RadiusField) -> List[np.ndarray]:
    """Split points into R-separated subsequences.

    Each pass walks the remaining points by increasing rho and keeps a point when it lies
    outside D^R of every point already kept in this pass; the kept points form one
    subsequence and the rest go to the next pass.
    """
    if R <= 1:
        raise InputError("partition radius R must exceed 1")
    points = np.asarray(points, dtype=complex)
    _check_distinct(points)
    rho = rf(points)
    order = np.lexsort((sweep_order(points).argsort(), rho))
    remaining = list(order)
    classes: List[np.ndarray] = []
    while remaining:
        kept: List[int] = []
        rest: List[int] = []
        for i in remaining:
            if kept:
                sel = np.asarray(kept)
                if np.any(np.abs(points[sel] - points[i]) < R * rho[sel]):
                    rest.append(i)
                    continue
            kept.append(i)
        classes.append(points[np.asarray(kept)])
        remaining = rest
    return classes


def is_separated(points: np.ndarray, R: float, rf: RadiusField) -> bool:
    """|z_j - z_k| >= R min(rho_j, rho_k) for all distinct pairs."""
    points = np.asarray(points, dtype=complex)
    if points.size < 2:
        return True
    rho = rf(points)
    gap = np.abs(points[:, None] - points[None, :])
    bound = R * np.minimum(rho[:, None], rho[None, :])
    np.fill_diagonal(gap, np.inf)
    return bool(np.all(gap >= bound))


def counting_bound(R: float, r: float, n_r: int) -> float:
    """36 R^4 r^-2 N_r, valid for r < 1 < R."""
    return COUNTING_CONSTANT * R ** 4 * n_r / r ** 2


def comparison_bound(R: float, r: float, n_r: int) -> float:
    """c_R^4 (1 + R/r)^2 N_r with c_R = 1/(1 - R); needs R < 1."""
    if not 0 < R < 1:
        raise InputError("the explicit comparison constant needs 0 < R < 1")
    c_big = 1.0 / (1.0 - R)
    return c_big ** 4 * (1.0 + R / r) ** 2 * n_r


def lattice_comparison_check(lat: Lattice, R: float, probes: np.ndarray) -> Tuple[int, float]:
    """N_R of the lattice points against its explicit bound in terms of N_r."""
    counts = disk_membership(lat.points, R * lat.rho, np.asarray(probes, dtype=complex))
    n_big = int(counts.max(initial=0))
    return n_big, comparison_bound(R, lat.r, lat.overlap_index)


def save_lattice(lat: Lattice, csv_path: Union[str, Path],
                 json_path: Optional[Union[str, Path]] = None) -> Tuple[Path, Path]:
    """Points as ``re, im`` CSV plus a JSON sidecar with r, R_max and N_r."""
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["re", "im"])
        for z in lat.points:
            writer.writerow([repr(z.real), repr(z.imag)])
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(lat.describe(), f, indent=2, sort_keys=True)
    return csv_path, json_path


def load_lattice(csv_path: Union[str, Path], rf: RadiusField,
                 json_path: Optional[Union[str, Path]] = None) -> Lattice:
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    try:
        with open(json_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        with open(csv_path, "r", encoding="utf-8") as f:
            rows = [row for row in csv.reader(f)][1:]
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read lattice {csv_path}: {e}") from e
    points = np.array([complex(float(a), float(b)) for a, b in rows], dtype=complex)
    return Lattice(points, float(meta["r"]), float(meta["domain_radius"]),
                   int(meta["overlap_index"]), float(meta["covering_certificate"]), rf(points))
