"""Equipotential-curve extraction and box-counting dimension estimates.

Marching squares runs on the lattice of cell centers with linear
interpolation along lattice edges; the two ambiguous saddle cases are
resolved by comparing the four-corner mean against the level, which keeps
contours of different levels from crossing.  Box counting rasterizes
geometry onto shrinking grids and fits log(count) against log(1/size).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .solver import PotentialField

# Segment endpoints per marching-squares case, as pairs of square edges
# (B=bottom, R=right, T=top, L=left).  Cases 5 and 10 are saddles.
_CASE_SEGMENTS = {
    0: [],
    1: [("L", "B")],
    2: [("B", "R")],
    3: [("L", "R")],
    4: [("T", "R")],
    6: [("B", "T")],
    7: [("L", "T")],
    8: [("L", "T")],
    9: [("B", "T")],
    11: [("T", "R")],
    12: [("L", "R")],
    13: [("B", "R")],
    14: [("L", "B")],
    15: [],
}


@dataclass(frozen=True)
class ContourSet:
    """Polylines per level, in box coordinates.

    by_level maps each requested level to a list of (k, 2) vertex arrays; a
    polyline whose first and last vertices coincide is closed, anything else
    ends on the outermost ring of cell centers.
    """

    levels: tuple
    by_level: dict

    def polylines(self, level: float) -> list:
        return self.by_level[level]

    def total_arclength(self, level: float) -> float:
        return float(sum(arclength(p) for p in self.by_level[level] if len(p) >= 2))

    def all_vertices(self) -> np.ndarray:
        chunks = [p for polys in self.by_level.values() for p in polys]
        if not chunks:
            return np.empty((0, 2))
        return np.concatenate(chunks, axis=0)


def _edge_point(key, values, x, y, level):
    kind, i, j = key
    if kind == "h":
        ua, ub = values[j, i], values[j, i + 1]
        t = (level - ua) / (ub - ua)
        return (x[i] + t * (x[i + 1] - x[i]), y[j])
    ua, ub = values[j, i], values[j + 1, i]
    t = (level - ua) / (ub - ua)
    return (x[i], y[j] + t * (y[j + 1] - y[j]))


def _level_polylines(values, x, y, level):
    high = values >= level
    sw = high[:-1, :-1]
    se = high[:-1, 1:]
    ne = high[1:, 1:]
    nw = high[1:, :-1]
    case = sw * 1 + se * 2 + ne * 4 + nw * 8
    jj, ii = np.nonzero((case != 0) & (case != 15))

    segments = []
    for j, i in zip(jj.tolist(), ii.tolist()):
        c = int(case[j, i])
        if c == 5 or c == 10:
            mean = 0.25 * (
                values[j, i] + values[j, i + 1] + values[j + 1, i + 1] + values[j + 1, i]
            )
            high_connected = mean >= level
            if c == 5:
                pairs = [("L", "T"), ("B", "R")] if high_connected else [("L", "B"), ("T", "R")]
            else:
                pairs = [("L", "B"), ("T", "R")] if high_connected else [("L", "T"), ("B", "R")]
        else:
            pairs = _CASE_SEGMENTS[c]
        edge_keys = {
            "B": ("h", i, j),
            "T": ("h", i, j + 1),
            "L": ("v", i, j),
            "R": ("v", i + 1, j),
        }
        for a, b in pairs:
            segments.append((edge_keys[a], edge_keys[b]))

    if not segments:
        return []

    adjacency = defaultdict(list)
    for idx, (a, b) in enumerate(segments):
        adjacency[a].append((idx, b))
        adjacency[b].append((idx, a))
    used = [False] * len(segments)
    chains = []

    def walk(start):
        chain = [start]
        current = start
        while True:
            step = None
            for idx, other in adjacency[current]:
                if not used[idx]:
                    used[idx] = True
                    step = other
                    break
            if step is None:
                return chain
            chain.append(step)
            current = step

    for key, incident in adjacency.items():
        if len(incident) == 1 and not used[incident[0][0]]:
            chains.append(walk(key))
    for idx, (a, _b) in enumerate(segments):
        if not used[idx]:
            chains.append(walk(a))  # closed loop; walk returns to its start

    points = {}
    polylines = []
    for chain in chains:
        coords = []
        for key in chain:
            if key not in points:
                points[key] = _edge_point(key, values, x, y, level)
            coords.append(points[key])
        polylines.append(np.array(coords))
    return polylines


def extract_contours(u: PotentialField, levels) -> ContourSet:
    """Marching-squares equipotential curves of a solved field.

    Levels must lie strictly inside (0, u0).  A level outside the field's
    value range simply yields an empty polyline list.
    """
    levels = tuple(float(v) for v in levels)
    u0 = u.bc.u0
    if any(not 0 < v < u0 for v in levels):
        raise ValueError("levels must lie strictly inside (0, u0)")
    nx, ny = u.dims
    x, y = u.box.cell_centers((nx, ny))
    by_level = {}
    for level in levels:
        by_level[level] = _level_polylines(u.values, x, y, level)
    return ContourSet(levels, by_level)


def arclength(polyline: np.ndarray) -> float:
    """Sum of segment lengths of a vertex sequence."""
    pts = np.asarray(polyline, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("polyline needs at least two vertices")
    return float(np.sum(np.hypot(*(pts[1:] - pts[:-1]).T)))


@dataclass(frozen=True)
class FractalEstimate:
    dimension: float
    box_sizes: tuple  # strictly decreasing
    counts: tuple
    fit_r2: float
    degenerate: bool = False


def _densify(polylines, step: float) -> np.ndarray:
    chunks = []
    for poly in polylines:
        pts = np.asarray(poly, dtype=float)
        if pts.shape[0] == 1:
            chunks.append(pts)
            continue
        chunks.append(pts[:1])
        for a, b in zip(pts[:-1], pts[1:]):
            span = float(np.hypot(*(b - a)))
            n = max(int(np.ceil(span / step)), 1)
            ts = np.linspace(0.0, 1.0, n + 1)[1:, None]
            chunks.append(a[None, :] + ts * (b - a)[None, :])
    return np.concatenate(chunks, axis=0)


def box_counting_dimension(geometry, box_sizes) -> FractalEstimate:
    """Box-counting dimension of points or polylines.

    Needs at least four box sizes in geometric progression spanning 1.5
    decades or more.  Polylines are resampled at a quarter of the smallest
    box size before counting, so every crossed box registers.  A single
    repeated point is flagged degenerate with dimension 0.
    """
    sizes = sorted((float(s) for s in box_sizes), reverse=True)
    if len(sizes) < 4:
        raise ValueError("need at least 4 box sizes")
    if any(s <= 0 for s in sizes):
        raise ValueError("box sizes must be positive")
    if sizes[0] / sizes[-1] < 10**1.5 * (1 - 1e-9):
        raise ValueError("box sizes must span at least 1.5 decades")
    ratios = [a / b for a, b in zip(sizes[:-1], sizes[1:])]
    if max(ratios) / min(ratios) > 1.01:
        raise ValueError("box sizes must form a geometric progression")

    if isinstance(geometry, np.ndarray):
        points = np.asarray(geometry, dtype=float).reshape(-1, 2)
    else:
        polylines = list(geometry)
        if not polylines:
            raise ValueError("empty geometry")
        points = _densify(polylines, step=sizes[-1] / 4.0)
    if points.size == 0:
        raise ValueError("empty geometry")

    origin = points.min(axis=0)
    extent = float((points.max(axis=0) - origin).max())
    if extent == 0.0:
        counts = tuple(1 for _ in sizes)
        return FractalEstimate(0.0, tuple(sizes), counts, 1.0, degenerate=True)

    counts = []
    for s in sizes:
        idx = np.floor((points - origin) / s).astype(np.int64)
        combined = (idx[:, 0] << np.int64(32)) | idx[:, 1]
        counts.append(int(np.unique(combined).size))

    logs = np.log(1.0 / np.asarray(sizes))
    logn = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(logs, logn, 1)
    fitted = slope * logs + intercept
    ss_res = float(np.sum((logn - fitted) ** 2))
    ss_tot = float(np.sum((logn - logn.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FractalEstimate(float(slope), tuple(sizes), tuple(counts), r2)
