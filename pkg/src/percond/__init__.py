"""Conductivity of two-dimensional high-contrast continuum percolation media.

Generate Poisson-Boolean disk configurations, solve the binary-conductivity
potential problem under dual boundary conditions, measure homogenized
conductivities and their duality identities, fit conductivity curves, and
measure equipotential fractal dimensions.
"""

__version__ = "0.1.0"

from .analysis import (
    CurveSamples,
    FitResult,
    FormulaParams,
    crossing_fractions,
    expansion_defect,
    fit_power_law,
    formula_3d,
    formula_os,
    formula_vs,
    threshold_from_crossing,
)
from .contours import ContourSet, FractalEstimate, arclength, box_counting_dimension, extract_contours
from .errors import DegenerateFitError, NumericFailure, SolverConvergenceError, ThresholdRangeError
from .field import ConductivityGrid, OccupancyGrid, ProblemType, conductivity_field, rasterize
from .geometry import (
    Box,
    Checkpoint,
    DiskConfiguration,
    Domination,
    DominationReport,
    NestedPath,
    classify_domination,
    expected_coverage,
    generate_path,
    intensity_for_fraction,
    spans_top_to_bottom,
)
from .observables import (
    BeltramiField,
    ConductivitySample,
    TotalConductivity,
    beltrami_field,
    beltrami_phase_means,
    cylinder_flow,
    energy,
    gradient_orthogonality,
    reciprocity_defect,
    solve_both_types,
    total_conductivity,
)
from .solver import BoundarySpec, LinearSystem, PotentialField, SolverSettings, assemble, solve
from .sweep import ExperimentPlan, SweepResult, aggregate, run_plan
