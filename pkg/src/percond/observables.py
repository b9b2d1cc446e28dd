"""Physical quantities extracted from solved potential fields.

Total conductivity is the Dirichlet-edge flux per unit applied potential,
reported as the mean of the inflow and outflow edges with their mismatch as
a conservation diagnostic.  The discrete energy is summed independently of
the solver's assembled operator so the two routes cross-check each other.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .field import ConductivityGrid, OccupancyGrid, ProblemType, conductivity_field
from .solver import BoundarySpec, PotentialField, SolverSettings, solve


@dataclass(frozen=True)
class ConductivitySample:
    """One measurement record; column order matches the CSV schema."""

    seed: int
    problem_type: ProblemType
    dims: tuple
    r_cells: float
    p_target: float
    p_achieved: float
    gamma0: float
    gamma1: float
    gamma_total: float
    gamma_in: float
    gamma_out: float
    energy: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class TotalConductivity:
    value: float  # mean of the two edge fluxes
    inflow: float  # measured on the u = u0 edge
    outflow: float  # measured on the u = 0 edge

    @property
    def imbalance(self) -> float:
        scale = max(abs(self.value), 1e-300)
        return abs(self.inflow - self.outflow) / scale


def _face_conductances(grid: ConductivityGrid):
    gamma = grid.gamma
    dx, dy = grid.cell_size()
    gx = 2.0 * gamma[:, 1:] * gamma[:, :-1] / (gamma[:, 1:] + gamma[:, :-1]) * (dy / dx)
    gy = 2.0 * gamma[1:, :] * gamma[:-1, :] / (gamma[1:, :] + gamma[:-1, :]) * (dx / dy)
    return gx, gy


def total_conductivity(u: PotentialField, grid: ConductivityGrid) -> TotalConductivity:
    """Boundary flux per unit applied potential on both Dirichlet edges."""
    if u.values.shape != grid.gamma.shape:
        raise ValueError("field and grid dimensions disagree")
    dx, dy = grid.cell_size()
    u0 = u.bc.u0
    v = u.values
    gamma = grid.gamma
    if u.bc.problem_type is ProblemType.OS:
        g_drive = 2.0 * gamma[-1, :] * (dx / dy)
        g_zero = 2.0 * gamma[0, :] * (dx / dy)
        inflow = float(np.sum(g_drive * (u0 - v[-1, :]))) / u0
        outflow = float(np.sum(g_zero * v[0, :])) / u0
    else:
        g_drive = 2.0 * gamma[:, -1] * (dy / dx)
        g_zero = 2.0 * gamma[:, 0] * (dy / dx)
        inflow = float(np.sum(g_drive * (u0 - v[:, -1]))) / u0
        outflow = float(np.sum(g_zero * v[:, 0])) / u0
    return TotalConductivity(0.5 * (inflow + outflow), inflow, outflow)


def energy(u: PotentialField, grid: ConductivityGrid) -> float:
    """Face-conductance-weighted sum of squared differences, ghost faces included.

    Equals u0^2 times the total conductivity for a converged solve.
    """
    if u.values.shape != grid.gamma.shape:
        raise ValueError("field and grid dimensions disagree")
    gx, gy = _face_conductances(grid)
    v = u.values
    total = float(np.sum(gx * (v[:, 1:] - v[:, :-1]) ** 2))
    total += float(np.sum(gy * (v[1:, :] - v[:-1, :]) ** 2))
    dx, dy = grid.cell_size()
    gamma = grid.gamma
    u0 = u.bc.u0
    if u.bc.problem_type is ProblemType.OS:
        total += float(np.sum(2.0 * gamma[0, :] * (dx / dy) * v[0, :] ** 2))
        total += float(np.sum(2.0 * gamma[-1, :] * (dx / dy) * (u0 - v[-1, :]) ** 2))
    else:
        total += float(np.sum(2.0 * gamma[:, 0] * (dy / dx) * v[:, 0] ** 2))
        total += float(np.sum(2.0 * gamma[:, -1] * (dy / dx) * (u0 - v[:, -1]) ** 2))
    return total


def solve_both_types(
    occ: OccupancyGrid,
    gamma0: float,
    gamma1: float,
    settings: SolverSettings | None = None,
    u0: float = 1.0,
):
    """Solve OS and VS on one occupancy; returns ((u_os, grid_os), (u_vs, grid_vs))."""
    grid_os = conductivity_field(occ, ProblemType.OS, gamma0, gamma1)
    grid_vs = conductivity_field(occ, ProblemType.VS, gamma0, gamma1)
    u_os = solve(grid_os, BoundarySpec(ProblemType.OS, u0), settings)
    u_vs = solve(grid_vs, BoundarySpec(ProblemType.VS, u0), settings)
    return (u_os, grid_os), (u_vs, grid_vs)


def reciprocity_defect(
    occ: OccupancyGrid,
    gamma0: float,
    gamma1: float,
    settings: SolverSettings | None = None,
) -> float:
    """Relative departure of the dual product from gamma0*gamma1.

    The continuum identity makes the OS and VS total conductivities of one
    configuration multiply to exactly gamma0*gamma1; the returned value
    gamma_os*gamma_vs/(gamma0*gamma1) - 1 measures the discretization defect
    and shrinks under grid refinement.
    """
    (u_os, grid_os), (u_vs, grid_vs) = solve_both_types(occ, gamma0, gamma1, settings)
    g_os = total_conductivity(u_os, grid_os).value
    g_vs = total_conductivity(u_vs, grid_vs).value
    return g_os * g_vs / (gamma0 * gamma1) - 1.0


def gradient_orthogonality(u_os: PotentialField, u_vs: PotentialField) -> float:
    """RMS of the pointwise OS/VS gradient inner product, normalized.

    Centered differences at cell centers (one-sided at the boundary rows and
    columns); normalization divides by the RMS gradient magnitudes of the two
    fields, so a uniform medium gives exactly zero and fine random grids give
    small values.
    """
    if u_os.values.shape != u_vs.values.shape:
        raise ValueError("fields live on different grids")
    dx, dy = u_os.cell_size()
    os_y, os_x = np.gradient(u_os.values, dy, dx)
    vs_y, vs_x = np.gradient(u_vs.values, dy, dx)
    inner = os_x * vs_x + os_y * vs_y
    num = np.sqrt(np.mean(inner**2))
    den_os = np.sqrt(np.mean(os_x**2 + os_y**2))
    den_vs = np.sqrt(np.mean(vs_x**2 + vs_y**2))
    if den_os == 0 or den_vs == 0:
        return 0.0
    return float(num / (den_os * den_vs))


@dataclass(frozen=True)
class BeltramiField:
    """Complex dilatation of the combined potential map.

    mu is NaN at cells excluded by the small-derivative guard; valid marks
    the usable cells.  normalization records the (alpha, beta) scaling of the
    conjugate-pair convention that was applied.
    """

    mu: np.ndarray  # complex, shape (ny, nx)
    valid: np.ndarray  # bool, shape (ny, nx)
    normalization: tuple


def beltrami_field(
    u_os: PotentialField,
    u_vs: PotentialField,
    grid: ConductivityGrid,
    side: str = "plus",
) -> BeltramiField:
    """Beltrami coefficient of psi = (scaled VS potential) + i*(OS potential).

    side="plus" rescales the VS potential so the pair is conformal on the
    vacant phase (dilatation supported on occupied cells, alpha = 1/gamma0);
    side="minus" rescales the OS potential so the pair is conformal on the
    occupied phase (alpha = 1/gamma1).  Cells where |d psi| falls below
    1e-12 * u0 / cell width are flagged invalid and excluded.
    """
    if u_os.values.shape != u_vs.values.shape or u_os.values.shape != grid.gamma.shape:
        raise ValueError("fields and grid dimensions disagree")
    dx, dy = grid.cell_size()
    u0_os = u_os.bc.u0
    u0_vs = u_vs.bc.u0
    if side == "plus":
        g_total = total_conductivity(u_os, grid).value
        scale_vs = (g_total / grid.gamma0) * u0_os / u0_vs
        psi = scale_vs * u_vs.values + 1j * u_os.values
        normalization = (1.0 / grid.gamma0, 1.0)
        reference_u0 = max(u0_os, scale_vs * u0_vs)
    elif side == "minus":
        grid_vs = ConductivityGrid(
            grid.box, grid.gamma0 * grid.gamma1 / grid.gamma, grid.gamma0, grid.gamma1
        )
        g_total = total_conductivity(u_vs, grid_vs).value
        scale_os = (g_total / grid.gamma0) * u0_vs / u0_os
        psi = u_vs.values + 1j * scale_os * u_os.values
        normalization = (1.0 / grid.gamma1, 1.0)
        reference_u0 = max(u0_vs, scale_os * u0_os)
    else:
        raise ValueError("side must be 'plus' or 'minus'")

    psi_y, psi_x = np.gradient(psi, dy, dx)
    d_psi = 0.5 * (psi_x - 1j * psi_y)
    dbar_psi = 0.5 * (psi_x + 1j * psi_y)
    valid = np.abs(d_psi) >= 1e-12 * reference_u0 / min(dx, dy)
    mu = np.full(psi.shape, np.nan + 0j)
    np.divide(dbar_psi, np.conj(d_psi), out=mu, where=valid)
    return BeltramiField(mu, valid, normalization)


def beltrami_phase_means(bf: BeltramiField, occ: OccupancyGrid) -> tuple:
    """Mean |mu| over valid occupied cells and valid vacant cells."""
    occupied = bf.valid & occ.cells
    vacant = bf.valid & ~occ.cells
    mean_occ = float(np.mean(np.abs(bf.mu[occupied]))) if occupied.any() else float("nan")
    mean_vac = float(np.mean(np.abs(bf.mu[vacant]))) if vacant.any() else float("nan")
    return mean_occ, mean_vac


def cylinder_flow(z, centers, rho: float, u0: float, length: float):
    """Complex potential of a uniform flow past well-separated disks.

    Evaluates (u0/length) * (z + sum_i rho^2/(z - z_i)).  Accepts a scalar or
    an array of evaluation points; evaluation at a disk center is a pole.
    """
    z = np.asarray(z, dtype=complex)
    centers = np.asarray(centers, dtype=complex).ravel()
    if centers.size and np.any(np.isin(z, centers)):
        raise ValueError("evaluation point coincides with a cylinder center")
    out = z.astype(complex).copy()
    for c in centers:
        out = out + rho * rho / (z - c)
    out = (u0 / length) * out
    if out.ndim == 0:
        return complex(out)
    return out
