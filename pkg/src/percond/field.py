"""Rasterization of disk configurations into binary conductivity grids.

A cell is occupied when its center lies inside some disk; no anti-aliasing,
so the local conductivity stays binary and sub-cell accuracy is recovered by
grid refinement.  The OS assignment makes the occupied phase conductive, the
VS assignment makes it insulating.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import Box, DiskConfiguration, cover_cells


class ProblemType(enum.Enum):
    OS = "OS"  # occupied phase conductive
    VS = "VS"  # vacant phase conductive ("Swiss cheese")

    @classmethod
    def parse(cls, text: str) -> "ProblemType":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown problem type {text!r}; expected OS or VS")


@dataclass(frozen=True)
class OccupancyGrid:
    """Boolean cell grid: True where the cell center lies in the occupied set."""

    box: Box
    cells: np.ndarray  # bool, shape (ny, nx), row j at y = -L + (j+0.5)*dy

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 2 or cells.shape[0] < 2 or cells.shape[1] < 2:
            raise ValueError("occupancy grid must be at least 2x2")
        object.__setattr__(self, "cells", cells)

    @property
    def dims(self) -> tuple:
        ny, nx = self.cells.shape
        return nx, ny

    @property
    def coverage(self) -> float:
        return float(np.count_nonzero(self.cells)) / self.cells.size

    def cell_size(self) -> tuple:
        return self.box.cell_size(self.dims)


@dataclass(frozen=True)
class ConductivityGrid:
    """Per-cell binary local conductivity with its two phase values."""

    box: Box
    gamma: np.ndarray  # float, shape (ny, nx), values in {gamma0, gamma1}
    gamma0: float
    gamma1: float

    def __post_init__(self):
        if not 0 < self.gamma0 <= self.gamma1:
            raise ValueError("need 0 < gamma0 <= gamma1")
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2 or gamma.shape[0] < 2 or gamma.shape[1] < 2:
            raise ValueError("conductivity grid must be at least 2x2")
        object.__setattr__(self, "gamma", gamma)

    @property
    def dims(self) -> tuple:
        ny, nx = self.gamma.shape
        return nx, ny

    def cell_size(self) -> tuple:
        return self.box.cell_size(self.dims)


def rasterize(config: DiskConfiguration, dims) -> OccupancyGrid:
    """Center-in-disk rasterization of a configuration onto an nx-by-ny grid."""
    nx, ny = int(dims[0]), int(dims[1])
    if nx < 2 or ny < 2:
        raise ValueError("rasterization grid must be at least 2x2")
    cells = np.zeros((ny, nx), dtype=bool)
    for center in config.centers:
        cover_cells(cells, config.box, center)
    return OccupancyGrid(config.box, cells)


def conductivity_field(
    occ: OccupancyGrid,
    problem_type: ProblemType,
    gamma0: float,
    gamma1: float,
) -> ConductivityGrid:
    """Assign the binary local conductivity for one problem type.

    OS maps occupied cells to gamma1 and vacant to gamma0; VS swaps the two,
    so the OS and VS fields of one occupancy multiply to gamma0*gamma1 in
    every cell.
    """
    if not 0 < gamma0 <= gamma1:
        raise ValueError("need 0 < gamma0 <= gamma1")
    if problem_type is ProblemType.OS:
        gamma = np.where(occ.cells, gamma1, gamma0)
    else:
        gamma = np.where(occ.cells, gamma0, gamma1)
    return ConductivityGrid(occ.box, gamma, gamma0, gamma1)
