"""Experiment orchestration over (seed x fraction x type x grid) matrices.

Each cell's randomness derives only from its seed, never from scheduling, so
cells may run in any order or in parallel.  Results are journaled as they
arrive and consolidated into a sorted CSV at the end; rerunning a finished
plan performs no solves and rewrites byte-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import formats
from .errors import NumericFailure
from .field import ProblemType, conductivity_field, rasterize
from .geometry import Box, generate_path
from .observables import ConductivitySample, energy, total_conductivity
from .analysis import CurveSamples
from .solver import BoundarySpec, SolverSettings, solve

PLAN_FORMAT = "percond-plan/1"


@dataclass(frozen=True)
class ExperimentPlan:
    """Full description of a sweep; hashable to a provenance tag.

    The disk radius is held at r_cells grid cells for every requested dims,
    so larger grids mean proportionally larger boxes at fixed mesh size.
    """

    seeds: tuple
    p_targets: tuple
    dims: tuple  # square grid edge lengths
    r_cells: float = 8.0
    gamma0: float = 1e-4
    gamma1: float = 1.0
    u0: float = 1.0
    types: tuple = (ProblemType.OS, ProblemType.VS)
    rel_tolerance: float = 1e-8
    max_iterations: int | None = None
    output_dir: str = "."

    def __post_init__(self):
        if not self.seeds or not self.p_targets or not self.dims:
            raise ValueError("plan needs non-empty seeds, fractions, and dims")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "p_targets", tuple(float(p) for p in self.p_targets))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        types = tuple(
            t if isinstance(t, ProblemType) else ProblemType.parse(t) for t in self.types
        )
        object.__setattr__(self, "types", types)

    def box_for(self, dims: int) -> Box:
        return Box(half_width=dims / (2.0 * self.r_cells), disk_radius=1.0)

    def settings(self) -> SolverSettings:
        return SolverSettings(self.rel_tolerance, self.max_iterations)

    def to_dict(self) -> dict:
        return {
            "format": PLAN_FORMAT,
            "seeds": list(self.seeds),
            "p_targets": list(self.p_targets),
            "dims": list(self.dims),
            "r_cells": self.r_cells,
            "gamma0": self.gamma0,
            "gamma1": self.gamma1,
            "u0": self.u0,
            "types": [t.value for t in self.types],
            "rel_tolerance": self.rel_tolerance,
            "max_iterations": self.max_iterations,
        }

    def plan_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def plan_from_dict(doc: dict, output_dir: str = ".") -> ExperimentPlan:
    if doc.get("format") != PLAN_FORMAT:
        raise ValueError("not an experiment plan document")
    return ExperimentPlan(
        seeds=tuple(doc["seeds"]),
        p_targets=tuple(doc["p_targets"]),
        dims=tuple(doc["dims"]),
        r_cells=float(doc.get("r_cells", 8.0)),
        gamma0=float(doc.get("gamma0", 1e-4)),
        gamma1=float(doc.get("gamma1", 1.0)),
        u0=float(doc.get("u0", 1.0)),
        types=tuple(doc.get("types", ["OS", "VS"])),
        rel_tolerance=float(doc.get("rel_tolerance", 1e-8)),
        max_iterations=doc.get("max_iterations"),
        output_dir=output_dir,
    )


@dataclass
class SweepResult:
    plan: ExperimentPlan
    plan_hash: str
    samples: list
    failures: list = field(default_factory=list)
    solves_performed: int = 0


def _sample_key(sample: ConductivitySample) -> tuple:
    return (sample.seed, sample.dims[0], round(sample.p_target, 12), sample.problem_type.value)


def _run_cell_group(plan_doc: dict, seed: int, dims: int, wanted: list) -> tuple:
    """Worker: all requested (p, type) samples of one (seed, dims) path."""
    plan = plan_from_dict(plan_doc)
    box = plan.box_for(dims)
    path, config = generate_path(seed, box, plan.p_targets, (dims, dims))
    settings = plan.settings()
    samples, failures = [], []
    for cp in path.checkpoints:
        types = [t for (p, t) in wanted if abs(p - cp.p_target) < 1e-12]
        if not types:
            continue
        occ = rasterize(config.prefix(cp.prefix_length), (dims, dims))
        for type_name in types:
            problem_type = ProblemType.parse(type_name)
            grid = conductivity_field(occ, problem_type, plan.gamma0, plan.gamma1)
            try:
                u = solve(grid, BoundarySpec(problem_type, plan.u0), settings)
            except NumericFailure as exc:
                failures.append(
                    {
                        "seed": seed,
                        "dims": dims,
                        "p_target": cp.p_target,
                        "type": type_name,
                        "error": str(exc),
                    }
                )
                continue
            flux = total_conductivity(u, grid)
            samples.append(
                ConductivitySample(
                    seed=seed,
                    problem_type=problem_type,
                    dims=(dims, dims),
                    r_cells=plan.r_cells,
                    p_target=cp.p_target,
                    p_achieved=cp.p_achieved,
                    gamma0=plan.gamma0,
                    gamma1=plan.gamma1,
                    gamma_total=flux.value,
                    gamma_in=flux.inflow,
                    gamma_out=flux.outflow,
                    energy=energy(u, grid),
                    iterations=u.iterations,
                    residual=u.final_residual,
                )
            )
    return samples, failures


def run_plan(plan: ExperimentPlan, jobs: int = 1, log=None) -> SweepResult:
    """Execute every missing cell of the plan and consolidate the outputs.

    Writes plan.json, samples.csv (schema columns plus a plan_hash column,
    sorted by cell key), and summary.json into plan.output_dir.  Cells
    already present in samples.csv under the same plan hash are not re-run.
    Individual solver failures are recorded in the summary and do not abort
    the sweep.
    """
    out = plan.output_dir
    os.makedirs(out, exist_ok=True)
    plan_hash = plan.plan_hash()
    formats.atomic_write_text(
        os.path.join(out, "plan.json"),
        json.dumps(plan.to_dict(), sort_keys=True, indent=2) + "\n",
    )

    existing: dict = {}
    csv_path = os.path.join(out, "samples.csv")
    if os.path.exists(csv_path):
        samples, rows = formats.read_samples_csv(csv_path)
        for sample, row in zip(samples, rows):
            if row.get("plan_hash", plan_hash) != plan_hash:
                raise ValueError(
                    f"{csv_path} holds rows from a different plan "
                    f"({row.get('plan_hash')} != {plan_hash})"
                )
            existing[_sample_key(sample)] = sample

    pending: dict = {}
    for seed in plan.seeds:
        for dims in plan.dims:
            wanted = [
                (p, t.value)
                for p in plan.p_targets
                for t in plan.types
                if (seed, dims, round(p, 12), t.value) not in existing
            ]
            if wanted:
                pending[(seed, dims)] = wanted

    plan_doc = plan.to_dict()
    failures: list = []
    new_samples: list = []
    if pending:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    key: pool.submit(_run_cell_group, plan_doc, key[0], key[1], wanted)
                    for key, wanted in pending.items()
                }
                for key in sorted(futures):
                    cell_samples, cell_failures = futures[key].result()
                    new_samples.extend(cell_samples)
                    failures.extend(cell_failures)
                    if log:
                        log(f"seed {key[0]} dims {key[1]}: {len(cell_samples)} samples")
        else:
            for key in sorted(pending):
                cell_samples, cell_failures = _run_cell_group(plan_doc, key[0], key[1], pending[key])
                new_samples.extend(cell_samples)
                failures.extend(cell_failures)
                if log:
                    log(f"seed {key[0]} dims {key[1]}: {len(cell_samples)} samples")

    merged = dict(existing)
    for sample in new_samples:
        merged[_sample_key(sample)] = sample
    ordered = [merged[key] for key in sorted(merged)]
    extras = [{"plan_hash": plan_hash} for _ in ordered]
    formats.write_samples_csv(csv_path, ordered, extra_columns=("plan_hash",), extras=extras)

    result = SweepResult(plan, plan_hash, ordered, failures, solves_performed=len(new_samples))
    formats.atomic_write_text(
        os.path.join(out, "summary.json"), json.dumps(summarize(result), sort_keys=True, indent=2) + "\n"
    )
    return result


def aggregate(result: SweepResult) -> dict:
    """Mean conductivity curves per (type, dims), with min/max bands.

    A fraction enters a curve only when every seed of the plan contributed a
    sample there; the band records the seed-to-seed spread.  Returns
    {(type value, dims): (CurveSamples, band rows)} where each band row is
    (p, mean, min, max).
    """
    plan = result.plan
    n_seeds = len(plan.seeds)
    grouped: dict = {}
    for sample in result.samples:
        key = (sample.problem_type.value, sample.dims[0], round(sample.p_target, 12))
        grouped.setdefault(key, []).append(sample)

    curves: dict = {}
    for type_ in plan.types:
        for dims in plan.dims:
            points, band = [], []
            for p in plan.p_targets:
                cell = grouped.get((type_.value, dims, round(p, 12)), [])
                if len(cell) != n_seeds:
                    continue  # incomplete cell: a failure was recorded
                values = np.array([s.gamma_total for s in cell])
                achieved = float(np.mean([s.p_achieved for s in cell]))
                points.append((achieved, float(values.mean())))
                band.append((achieved, float(values.mean()), float(values.min()), float(values.max())))
            if points:
                curves[(type_.value, dims)] = (
                    CurveSamples(
                        problem_type=type_,
                        points=np.asarray(points),
                        dims=(dims, dims),
                        gamma0=plan.gamma0,
                        gamma1=plan.gamma1,
                        seeds=plan.seeds,
                    ),
                    band,
                )
    return curves


def summarize(result: SweepResult) -> dict:
    """Provenance, completeness, and reciprocity statistics of a sweep."""
    plan = result.plan
    by_cell: dict = {}
    for sample in result.samples:
        by_cell[(sample.seed, sample.dims[0], round(sample.p_target, 12), sample.problem_type.value)] = sample
    defects = []
    if set(t.value for t in plan.types) >= {"OS", "VS"}:
        for seed in plan.seeds:
            for dims in plan.dims:
                for p in plan.p_targets:
                    os_sample = by_cell.get((seed, dims, round(p, 12), "OS"))
                    vs_sample = by_cell.get((seed, dims, round(p, 12), "VS"))
                    if os_sample and vs_sample:
                        defects.append(
                            os_sample.gamma_total * vs_sample.gamma_total / (plan.gamma0 * plan.gamma1) - 1.0
                        )
    summary = {
        "plan_hash": result.plan_hash,
        "code_version": _package_version(),
        "n_samples": len(result.samples),
        "n_failures": len(result.failures),
        "failures": result.failures,
    }
    if defects:
        arr = np.asarray(defects)
        summary["reciprocity"] = {
            "n": int(arr.size),
            "median_defect": float(np.median(arr)),
            "max_abs_defect": float(np.abs(arr).max()),
        }
    return summary


def _package_version() -> str:
    from . import __version__

    return __version__
