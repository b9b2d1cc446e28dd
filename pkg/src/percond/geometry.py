"""Poisson-Boolean disk configurations and their connectivity.

Configurations are grown one disk at a time inside a square box, with the
rasterized coverage fraction as the stopping monitor, so a single seed yields
a nested family of configurations indexed by volume fraction.  Connectivity
of the occupied/vacant phases with the box edges classifies which phase
dominates the box.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Generator identity is part of the snapshot/path file contract; PCG64
# streams are reproducible across platforms for a fixed seed.
GENERATOR_NAME = "PCG64"

EDGES = ("top", "bottom", "left", "right")

# Disk growth is capped to catch misconfigured targets; any fraction < 1 is
# normally reached after a few thousand disks at desk scale.
MAX_DISKS = 10_000_000


@dataclass(frozen=True)
class Box:
    """Square domain [-L, L]^2 hosting disks of one fixed radius."""

    half_width: float
    disk_radius: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if not self.disk_radius > 0:
            raise ValueError("disk_radius must be positive")
        if self.half_width / self.disk_radius < 4:
            raise ValueError("box must span at least 4 disk radii per half width")

    def cell_size(self, dims):
        nx, ny = dims
        return 2.0 * self.half_width / nx, 2.0 * self.half_width / ny

    def cell_centers(self, dims):
        """Coordinates of cell centers: (x of the nx columns, y of the ny rows)."""
        nx, ny = dims
        dx, dy = self.cell_size(dims)
        x = -self.half_width + dx * (np.arange(nx) + 0.5)
        y = -self.half_width + dy * (np.arange(ny) + 0.5)
        return x, y


def expected_coverage(intensity: float, radius: float) -> float:
    """Mean covered fraction of a Boolean disk model, 1 - exp(-pi*lambda*r^2)."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    if not radius > 0:
        raise ValueError("radius must be positive")
    return -math.expm1(-math.pi * intensity * radius * radius)


def intensity_for_fraction(p: float, radius: float) -> float:
    """Invert expected_coverage: the intensity whose mean coverage is p."""
    if not 0 <= p < 1:
        raise ValueError("coverage fraction must lie in [0, 1)")
    if not radius > 0:
        raise ValueError("radius must be positive")
    return -math.log1p(-p) / (math.pi * radius * radius)


@dataclass(frozen=True)
class DiskConfiguration:
    """Ordered disk centers in a box; any prefix is itself a configuration."""

    box: Box
    centers: np.ndarray  # shape (n, 2), insertion order
    seed: int

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "centers", centers)
        L = self.box.half_width
        if centers.size and np.abs(centers).max() > L:
            raise ValueError("disk centers must lie inside the box")

    @property
    def count(self) -> int:
        return self.centers.shape[0]

    def prefix(self, n: int) -> "DiskConfiguration":
        if not 0 <= n <= self.count:
            raise ValueError("prefix length out of range")
        return DiskConfiguration(self.box, self.centers[:n].copy(), self.seed)


@dataclass(frozen=True)
class Checkpoint:
    p_target: float
    prefix_length: int
    p_achieved: float


@dataclass(frozen=True)
class NestedPath:
    """Coverage checkpoints of one seed's disk sequence on a fixed monitor grid."""

    seed: int
    box: Box
    grid_dims: tuple
    checkpoints: tuple  # of Checkpoint, ordered by p_target


def cover_cells(cells: np.ndarray, box: Box, center) -> int:
    """Mark cells whose centers fall within one disk; returns newly covered count.

    The grid is row-major with index [j, i] at position
    (-L + (i+0.5)*dx, -L + (j+0.5)*dy); coverage is clipped at the box.
    """
    ny, nx = cells.shape
    dx, dy = box.cell_size((nx, ny))
    L, r = box.half_width, box.disk_radius
    cx, cy = float(center[0]), float(center[1])
    i_lo = max(int(math.floor((cx - r + L) / dx - 0.5)), 0)
    i_hi = min(int(math.ceil((cx + r + L) / dx - 0.5)), nx - 1)
    j_lo = max(int(math.floor((cy - r + L) / dy - 0.5)), 0)
    j_hi = min(int(math.ceil((cy + r + L) / dy - 0.5)), ny - 1)
    if i_lo > i_hi or j_lo > j_hi:
        return 0
    xs = -L + dx * (np.arange(i_lo, i_hi + 1) + 0.5) - cx
    ys = -L + dy * (np.arange(j_lo, j_hi + 1) + 0.5) - cy
    inside = (ys * ys)[:, None] + (xs * xs)[None, :] <= r * r
    window = cells[j_lo : j_hi + 1, i_lo : i_hi + 1]
    fresh = int(np.count_nonzero(inside & ~window))
    window |= inside
    return fresh


def generate_path(seed: int, box: Box, p_targets, grid_dims) -> tuple:
    """Grow a disk sequence until each coverage target is exceeded.

    Disk centers are drawn uniformly in the box from a PCG64 stream keyed by
    the seed.  For each target p the recorded prefix is the first one whose
    rasterized coverage exceeds p (a target of exactly 0 keeps the empty
    prefix).  Returns (NestedPath, DiskConfiguration with all drawn disks).
    """
    targets = [float(p) for p in p_targets]
    if any(not 0 <= p < 1 for p in targets):
        raise ValueError("coverage targets must lie in [0, 1)")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("coverage targets must be strictly increasing")
    nx, ny = int(grid_dims[0]), int(grid_dims[1])
    if nx < 2 or ny < 2:
        raise ValueError("monitor grid must be at least 2x2")

    rng = np.random.Generator(np.random.PCG64(seed))
    cells = np.zeros((ny, nx), dtype=bool)
    total = nx * ny
    covered = 0
    centers = []
    checkpoints = []
    L = box.half_width
    for target in targets:
        while target > 0 and covered <= target * total:
            if len(centers) >= MAX_DISKS:
                raise RuntimeError(
                    f"exceeded {MAX_DISKS} disks before reaching coverage {target}"
                )
            center = rng.uniform(-L, L, size=2)
            centers.append(center)
            covered += cover_cells(cells, box, center)
        checkpoints.append(Checkpoint(target, len(centers), covered / total))

    config = DiskConfiguration(box, np.asarray(centers, dtype=float).reshape(-1, 2), seed)
    path = NestedPath(seed, box, (nx, ny), tuple(checkpoints))
    return path, config


class Domination(enum.Enum):
    OCCUPIED_DOMINATES = "OccupiedDominates"
    VACANT_DOMINATES = "VacantDominates"
    NEITHER = "Neither"


@dataclass(frozen=True)
class DominationReport:
    occupied_totally_connected: bool
    vacant_totally_connected: bool
    verdict: Domination


def _edge_pair_connectivity(mask: np.ndarray, eight_connected: bool) -> np.ndarray:
    """4x4 boolean matrix: edge pairs joined by a path through True cells.

    Edge order follows EDGES.  Occupied-phase queries use 8-neighbor
    adjacency, vacant-phase queries 4-neighbor; the dual pair prevents both
    phases from crossing the box simultaneously.
    """
    structure = np.ones((3, 3), dtype=int) if eight_connected else None
    labels, _ = ndimage.label(mask, structure=structure)
    edge_labels = (
        set(np.unique(labels[-1, :])) - {0},  # top row is the last one (y grows with j)
        set(np.unique(labels[0, :])) - {0},
        set(np.unique(labels[:, 0])) - {0},
        set(np.unique(labels[:, -1])) - {0},
    )
    # Union-find over {edges} + {labels touching an edge}.
    parent = {}

    def find(a):
        root = a
        while parent.setdefault(root, root) != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(a, b):
        parent[find(a)] = find(b)

    for k, labs in enumerate(edge_labels):
        for lab in labs:
            union(("edge", k), ("label", lab))
    out = np.zeros((4, 4), dtype=bool)
    for a in range(4):
        for b in range(4):
            out[a, b] = find(("edge", a)) == find(("edge", b))
    return out


def _totally(pairs: np.ndarray) -> tuple:
    """(all pairs connected, no pair connected) for a 4x4 connectivity matrix."""
    off_diag = pairs[~np.eye(4, dtype=bool)]
    return bool(off_diag.all()), not bool(off_diag.any())


def classify_domination(occupancy: np.ndarray) -> DominationReport:
    """Classify which phase, if any, dominates the box.

    A phase dominates when it connects all four box edges while the other
    phase connects none of the edge pairs.
    """
    occ = np.asarray(occupancy, dtype=bool)
    if occ.ndim != 2 or occ.size == 0:
        raise ValueError("occupancy must be a non-empty 2D grid")
    occ_pairs = _edge_pair_connectivity(occ, eight_connected=True)
    vac_pairs = _edge_pair_connectivity(~occ, eight_connected=False)
    occ_all, occ_none = _totally(occ_pairs)
    vac_all, vac_none = _totally(vac_pairs)
    if occ_all and vac_none:
        verdict = Domination.OCCUPIED_DOMINATES
    elif vac_all and occ_none:
        verdict = Domination.VACANT_DOMINATES
    else:
        verdict = Domination.NEITHER
    return DominationReport(occ_all, vac_all, verdict)


def spans_top_to_bottom(occupancy: np.ndarray) -> bool:
    """True when one occupied 8-connected cluster touches both top and bottom rows."""
    occ = np.asarray(occupancy, dtype=bool)
    labels, _ = ndimage.label(occ, structure=np.ones((3, 3), dtype=int))
    top = set(np.unique(labels[-1, :])) - {0}
    bottom = set(np.unique(labels[0, :])) - {0}
    return bool(top & bottom)
