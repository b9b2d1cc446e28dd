"""Conductivity-curve fits, closed-form curve approximations, and threshold
estimation from crossing probabilities.

The near-threshold power law is fitted in linear scale: an outer grid search
over the threshold (step 0.001) with amplitude solved linearly and the
exponent minimized by golden-section search.  The closed-form curves cover
the whole fraction range and satisfy the dual product identity exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFitError, ThresholdRangeError
from .field import ProblemType, rasterize
from .geometry import Box, generate_path, spans_top_to_bottom

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FormulaParams:
    """Parameters of the closed-form conductivity curves."""

    p_c: float
    t: float
    gamma0: float
    gamma1: float = 1.0
    t_prime: float | None = None  # second exponent, 3D curve only

    def __post_init__(self):
        if not 0 < self.p_c < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if not self.t > 0:
            raise ValueError("exponent must be positive")
        if not 0 < self.gamma0 <= self.gamma1:
            raise ValueError("need 0 < gamma0 <= gamma1")
        if self.t_prime is not None and not self.t_prime > 0:
            raise ValueError("t_prime must be positive")


def _pow_plus(x, exponent):
    """max(x, 0)**exponent; the Heaviside factor is implicit since 0**t = 0."""
    return np.power(np.maximum(x, 0.0), exponent)


def formula_os(p, params: FormulaParams):
    """Closed-form OS conductivity curve over the full fraction range.

    Above the threshold the supercritical power law rides on the geometric
    mean sqrt(gamma0*gamma1); below it the curve decays toward the dilute
    limit.  Continuous at the threshold, where it equals the geometric mean.
    """
    p = np.asarray(p, dtype=float)
    pc, t = params.p_c, params.t
    g0, g1 = params.gamma0, params.gamma1
    term1 = g1 * _pow_plus(p - pc, t) / (1 - pc) ** t
    term2 = pc**t * math.sqrt(g0 * g1) / (
        _pow_plus(pc - p, t) * math.sqrt(g1 / g0) + pc**t
    )
    out = term1 + term2
    return float(out) if out.ndim == 0 else out


def formula_vs(p, params: FormulaParams):
    """Closed-form VS counterpart; product with formula_os is gamma0*gamma1."""
    p = np.asarray(p, dtype=float)
    pc, t = params.p_c, params.t
    g0, g1 = params.gamma0, params.gamma1
    term1 = g1 * _pow_plus(pc - p, t) / pc**t
    term2 = (1 - pc) ** t * math.sqrt(g0 * g1) / (
        _pow_plus(p - pc, t) * math.sqrt(g1 / g0) + (1 - pc) ** t
    )
    out = term1 + term2
    return float(out) if out.ndim == 0 else out


def formula_3d(p, params: FormulaParams):
    """Three-dimensional variant with cube-root contrast scaling.

    Uses the main exponent above the threshold and t_prime below; the value
    at the threshold is (gamma1*gamma0^2)^(1/3).
    """
    if params.t_prime is None:
        raise ValueError("3D curve needs t_prime")
    p = np.asarray(p, dtype=float)
    pc, t, tp = params.p_c, params.t, params.t_prime
    g0, g1 = params.gamma0, params.gamma1
    term1 = g1 * _pow_plus(p - pc, t) / (1 - pc) ** t
    term2 = pc**tp * (g1 * g0 * g0) ** (1.0 / 3.0) / (
        _pow_plus(pc - p, tp) * (g1 / g0) ** (1.0 / 3.0) + pc**tp
    )
    out = term1 + term2
    return float(out) if out.ndim == 0 else out


def expansion_defect(p: float, params: FormulaParams, side: str = "plus") -> float:
    """Distance of the closed-form curve from its first-order series at p.

    The series is sqrt(gamma0*gamma1) * (1 +/- sqrt(gamma1/gamma0)
    * (p - p_c)/p_c), normalized by sqrt(gamma0*gamma1).  The linear term is
    the curve's true first order at t = 1, where the defect shrinks
    quadratically with the offset; for other exponents the linear series is
    only the nominal reference.
    """
    root = math.sqrt(params.gamma0 * params.gamma1)
    slope = math.sqrt(params.gamma1 / params.gamma0) * (p - params.p_c) / params.p_c
    if side == "plus":
        series = root * (1.0 + slope)
        value = formula_os(p, params)
    elif side == "minus":
        series = root * (1.0 - slope)
        value = formula_vs(p, params)
    else:
        raise ValueError("side must be 'plus' or 'minus'")
    return abs(value - series) / root


@dataclass(frozen=True)
class CurveSamples:
    """Measured (p, gamma) pairs for one problem type."""

    problem_type: ProblemType
    points: np.ndarray  # shape (n, 2): fraction, conductivity
    dims: tuple = ()
    gamma0: float = float("nan")
    gamma1: float = float("nan")
    seeds: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "points", pts[np.argsort(pts[:, 0], kind="stable")])


@dataclass(frozen=True)
class FitResult:
    p_c: float
    t: float
    amplitude: float
    rss: float
    window: tuple


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-4) -> tuple:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    xm = 0.5 * (a + b)
    return xm, fun(xm)


def fit_power_law(
    samples: CurveSamples,
    window: tuple,
    t_bounds: tuple = (0.05, 8.0),
    pc_step: float = 0.001,
) -> FitResult:
    """Fit the near-threshold power law to measured conductivities.

    Linear-scale least squares of  a * ((p - p_c)/(1 - p_c))^t  above the
    candidate threshold for OS (below and /p_c^t for VS), zero on the other
    side.  The threshold is scanned on a fixed grid; for each candidate the
    amplitude is the exact linear solution and the exponent comes from a
    golden-section search.  The fit window is echoed in the result.

    Raises DegenerateFitError when no candidate threshold has points on its
    model-active side.
    """
    pts = samples.points
    lo, hi = float(window[0]), float(window[1])
    keep = (pts[:, 0] >= lo) & (pts[:, 0] <= hi)
    p = pts[keep, 0]
    y = pts[keep, 1]
    if p.size < 8:
        raise DegenerateFitError("need at least 8 samples inside the fit window")

    supercritical = samples.problem_type is ProblemType.OS
    candidates = np.arange(lo, hi + pc_step / 2, pc_step)
    best = None
    for pc in candidates:
        if not 0 < pc < 1:
            continue
        if supercritical:
            active = p > pc
            basis_scale = 1.0 - pc
            offsets = p[active] - pc
        else:
            active = p < pc
            basis_scale = pc
            offsets = pc - p[active]
        if not active.any() or active.all():
            continue
        y_active = y[active]
        rest = float(np.sum(y[~active] ** 2))

        def rss_of(t, offsets=offsets, y_active=y_active, rest=rest, basis_scale=basis_scale):
            phi = (offsets / basis_scale) ** t
            denom = float(np.sum(phi * phi))
            if denom == 0.0:
                return rest + float(np.sum(y_active**2))
            amp = float(np.sum(y_active * phi)) / denom
            return rest + float(np.sum((y_active - amp * phi) ** 2))

        t_opt, rss = _golden_min(rss_of, *t_bounds)
        if best is None or rss < best[2]:
            phi = (offsets / basis_scale) ** t_opt
            amp = float(np.sum(y_active * phi)) / float(np.sum(phi * phi))
            best = (float(pc), t_opt, rss, amp)

    if best is None:
        raise DegenerateFitError("every candidate threshold leaves all samples on one side")
    pc, t_opt, rss, amp = best
    return FitResult(pc, t_opt, amp, rss, (lo, hi))


def crossing_fractions(seeds, p_values, dims: int, box: Box) -> np.ndarray:
    """Fraction of seeds whose occupied phase spans top to bottom, per fraction."""
    p_values = [float(p) for p in p_values]
    hits = np.zeros(len(p_values))
    for seed in seeds:
        path, config = generate_path(seed, box, p_values, (dims, dims))
        for k, cp in enumerate(path.checkpoints):
            occ = rasterize(config.prefix(cp.prefix_length), (dims, dims))
            if spans_top_to_bottom(occ.cells):
                hits[k] += 1
    return hits / len(list(seeds))


def threshold_from_crossing(seeds, p_values, dims: int, box: Box) -> float:
    """Fraction at which the top-bottom crossing probability passes 1/2.

    Linear interpolation between the bracketing grid fractions; raises
    ThresholdRangeError when the crossing probability never rises through
    1/2 inside the grid.
    """
    seeds = list(seeds)
    if len(seeds) < 5:
        raise ValueError("need at least 5 seeds")
    p_values = sorted(float(p) for p in p_values)
    fractions = crossing_fractions(seeds, p_values, dims, box)
    if fractions[0] >= 0.5:
        raise ThresholdRangeError("crossing probability already above 1/2 at the lowest fraction")
    for k in range(1, len(p_values)):
        if fractions[k] >= 0.5:
            f0, f1 = fractions[k - 1], fractions[k]
            p0, p1 = p_values[k - 1], p_values[k]
            return p0 + (0.5 - f0) / (f1 - f0) * (p1 - p0)
    raise ThresholdRangeError("crossing probability never reaches 1/2 in the scanned range")
