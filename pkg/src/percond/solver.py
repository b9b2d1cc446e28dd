"""Finite-volume discretization and solve of the binary-conductivity problem.

Five-point stencil on cell centers with harmonic-mean face conductances,
which keeps the system symmetric positive definite and reproduces
series-resistor values exactly in layered media.  Dirichlet edges couple to
ghost values half a cell outside the grid, so boundary fluxes are well
defined; the opposite pair of edges carries zero normal flux.  The solve is
Jacobi-preconditioned conjugate gradients with a fixed summation order, so a
given system always yields the same iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SolverConvergenceError
from .field import ConductivityGrid, ProblemType


@dataclass(frozen=True)
class BoundarySpec:
    """Problem type plus the applied potential.

    OS drives u from 0 (bottom edge) to u0 (top edge) with insulated sides;
    VS drives u from 0 (left edge) to u0 (right edge) with insulated top and
    bottom.
    """

    problem_type: ProblemType
    u0: float = 1.0

    def __post_init__(self):
        if not self.u0 > 0:
            raise ValueError("u0 must be positive")


@dataclass(frozen=True)
class SolverSettings:
    """Stopping rule: preconditioned residual norm relative to the RHS norm.

    Both norms are taken in the inner product induced by the inverse Jacobi
    diagonal, sqrt(r' D^-1 r) <= rel_tolerance * sqrt(b' D^-1 b).
    max_iterations defaults to 50*max(nx, ny).
    """

    rel_tolerance: float = 1e-8
    max_iterations: int | None = None

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")


@dataclass(frozen=True)
class PotentialField:
    """Solved potential on the conductivity grid, with its solver stats."""

    box: object
    values: np.ndarray  # shape (ny, nx)
    bc: BoundarySpec
    iterations: int
    final_residual: float

    @property
    def dims(self) -> tuple:
        ny, nx = self.values.shape
        return nx, ny

    def cell_size(self) -> tuple:
        return self.box.cell_size(self.dims)


class LinearSystem:
    """Assembled SPD system A u = b acting on (ny, nx) cell arrays.

    gx[j, i] couples cells (i, j) and (i+1, j); gy[j, i] couples (i, j) and
    (i, j+1).  g_zero / g_drive are the ghost-face conductances on the u=0
    and u=u0 Dirichlet edges.
    """

    def __init__(self, grid: ConductivityGrid, bc: BoundarySpec):
        gamma = grid.gamma
        ny, nx = gamma.shape
        if nx < 2 or ny < 2:
            raise ValueError("degenerate grid")
        dx, dy = grid.cell_size()
        self.shape = (ny, nx)
        self.bc = bc
        self.gx = 2.0 * gamma[:, 1:] * gamma[:, :-1] / (gamma[:, 1:] + gamma[:, :-1]) * (dy / dx)
        self.gy = 2.0 * gamma[1:, :] * gamma[:-1, :] / (gamma[1:, :] + gamma[:-1, :]) * (dx / dy)
        if bc.problem_type is ProblemType.OS:
            # u = 0 on the bottom row's ghost, u0 on the top row's ghost.
            self.g_zero = 2.0 * gamma[0, :] * (dx / dy)
            self.g_drive = 2.0 * gamma[-1, :] * (dx / dy)
        else:
            self.g_zero = 2.0 * gamma[:, 0] * (dy / dx)
            self.g_drive = 2.0 * gamma[:, -1] * (dy / dx)

        diag = np.zeros((ny, nx))
        diag[:, :-1] += self.gx
        diag[:, 1:] += self.gx
        diag[:-1, :] += self.gy
        diag[1:, :] += self.gy
        b = np.zeros((ny, nx))
        if bc.problem_type is ProblemType.OS:
            diag[0, :] += self.g_zero
            diag[-1, :] += self.g_drive
            b[-1, :] = self.g_drive * bc.u0
        else:
            diag[:, 0] += self.g_zero
            diag[:, -1] += self.g_drive
            b[:, -1] = self.g_drive * bc.u0
        self.diag = diag
        self.b = b
        # Constant term of the quadratic form, sum of g_drive * u0^2.
        self.energy_offset = float(np.sum(self.g_drive) * bc.u0 * bc.u0)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:, :-1] -= self.gx * v[:, 1:]
        out[:, 1:] -= self.gx * v[:, :-1]
        out[:-1, :] -= self.gy * v[1:, :]
        out[1:, :] -= self.gy * v[:-1, :]
        return out

    def quadratic_energy(self, v: np.ndarray) -> float:
        """v'Av - 2 b'v + c: the discrete energy of v including ghost faces."""
        return float(np.sum(v * self.matvec(v)) - 2.0 * np.sum(self.b * v)) + self.energy_offset


def assemble(grid: ConductivityGrid, bc: BoundarySpec) -> LinearSystem:
    """Build the SPD finite-volume system for one conductivity grid and BC."""
    return LinearSystem(grid, bc)


def _initial_guess(shape, bc: BoundarySpec) -> np.ndarray:
    ny, nx = shape
    if bc.problem_type is ProblemType.OS:
        profile = (np.arange(ny) + 0.5) / ny * bc.u0
        return np.repeat(profile[:, None], nx, axis=1)
    profile = (np.arange(nx) + 0.5) / nx * bc.u0
    return np.repeat(profile[None, :], ny, axis=0)


def solve(
    grid: ConductivityGrid,
    bc: BoundarySpec,
    settings: SolverSettings | None = None,
    initial_guess: np.ndarray | None = None,
) -> PotentialField:
    """Solve the discrete problem by Jacobi-preconditioned conjugate gradients.

    Raises SolverConvergenceError (carrying the relative residual history)
    when max_iterations is exhausted; the caller may retry with a larger
    budget.  The converged field obeys the discrete maximum principle to
    within roughly 10*rel_tolerance*u0.
    """
    settings = settings or SolverSettings()
    system = assemble(grid, bc)
    ny, nx = system.shape
    max_iterations = settings.max_iterations or 50 * max(nx, ny)

    x = np.array(initial_guess, dtype=float) if initial_guess is not None else _initial_guess(system.shape, bc)
    if x.shape != system.shape:
        raise ValueError("initial guess shape mismatch")
    inv_diag = 1.0 / system.diag
    b = system.b
    target = settings.rel_tolerance * math.sqrt(float(np.sum(b * b * inv_diag)))

    r = b - system.matvec(x)
    z = r * inv_diag
    rho = float(np.sum(r * z))
    history = [math.sqrt(rho)]
    p = z.copy()
    iterations = 0
    while math.sqrt(rho) > target:
        if iterations >= max_iterations:
            raise SolverConvergenceError(
                f"no convergence in {max_iterations} iterations "
                f"(residual {history[-1]:.3e}, target {target:.3e})",
                residual_history=history,
            )
        Ap = system.matvec(p)
        alpha = rho / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        z = r * inv_diag
        rho_next = float(np.sum(r * z))
        history.append(math.sqrt(rho_next))
        beta = rho_next / rho
        rho = rho_next
        p = z + beta * p
        iterations += 1

    final_residual = history[-1] / (target / settings.rel_tolerance) if target > 0 else 0.0
    return PotentialField(grid.box, x, bc, iterations, final_residual)
