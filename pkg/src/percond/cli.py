"""Command-line surface: generate, solve, sweep, fit, contour, fractal,
formula, render.

Exit codes: 0 success, 1 usage error, 2 numeric failure (solver
non-convergence, degenerate fit, unbracketed threshold).  All file outputs
are written atomically.  Conductivity defaults are gamma0=1e-4, gamma1=1,
u0=1; geometry defaults are desk scale (256^2 grid, radius 8 cells, 3
seeds), and --paper-scale switches to the reference setup (1024^2 grid,
radius 25 cells, 6 seeds).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, contours, formats, observables, sweep
from .errors import NumericFailure
from .field import ProblemType, conductivity_field, rasterize
from .geometry import Box, generate_path
from .solver import BoundarySpec, SolverSettings, solve

DESK = {"dims": 256, "r_cells": 8.0, "seeds": 3}
PAPER = {"dims": 1024, "r_cells": 25.0, "seeds": 6}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_fraction_list(text: str) -> list:
    """Either comma-separated values or start:stop:step (inclusive ends)."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0 or stop < start:
            raise UsageError(f"bad fraction range {text!r}")
        values = []
        k = 0
        while True:
            v = start + k * step
            if v > stop + 1e-9:
                break
            values.append(round(v, 12))
            k += 1
        return values
    return [float(v) for v in text.split(",")]


def _box_from_args(args) -> Box:
    return Box(half_width=args.dims / (2.0 * args.r_cells), disk_radius=1.0)


def _apply_paper_scale(args):
    if getattr(args, "paper_scale", False):
        args.dims = PAPER["dims"]
        args.r_cells = PAPER["r_cells"]
        if hasattr(args, "seeds") and args.seeds == str(DESK["seeds"]):
            args.seeds = str(PAPER["seeds"])


def _add_geometry_flags(p):
    p.add_argument("--dims", type=int, default=DESK["dims"], help="square grid edge (cells); default 256")
    p.add_argument(
        "--r-cells",
        type=float,
        default=DESK["r_cells"],
        help="disk radius in cells; the box half width is dims/(2*r_cells) radii (default 8)",
    )
    p.add_argument("--paper-scale", action="store_true", help="use the reference setup: 1024^2 grid, radius 25 cells")


def _add_conductivity_flags(p):
    p.add_argument("--gamma0", type=float, default=1e-4, help="insulating-phase conductivity (default 1e-4)")
    p.add_argument("--gamma1", type=float, default=1.0, help="conductive-phase conductivity (default 1)")
    p.add_argument("--u0", type=float, default=1.0, help="applied potential (default 1)")
    p.add_argument("--tol", type=float, default=1e-8, help="solver relative tolerance (default 1e-8)")
    p.add_argument("--max-iters", type=int, default=None, help="solver iteration cap (default 50*dims)")


def build_parser() -> _Parser:
    parser = _Parser(prog="percond", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--error-json", action="store_true", help="report failures as JSON on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("generate", help="draw a disk configuration and its coverage checkpoints")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--p", default="0.3:0.9:0.05", help="coverage targets, list or start:stop:step (default 0.3:0.9:0.05)")
    _add_geometry_flags(p)
    p.add_argument("--out", required=True, help="output prefix; writes <out>.config.csv and <out>.path.json")

    p = commands.add_parser("solve", help="solve one configuration at one fraction and type")
    p.add_argument("--config", required=True, help="configuration snapshot to solve")
    p.add_argument("--prefix", type=int, default=None, help="use only the first N disks (default all)")
    p.add_argument("--type", default="OS", help="OS or VS (default OS)")
    p.add_argument("--dims", type=int, default=DESK["dims"], help="solve grid edge (default 256)")
    _add_conductivity_flags(p)
    p.add_argument("--out", required=True, help="output prefix; writes <out>.u.dump, <out>.sample.csv, <out>.sample.json")

    p = commands.add_parser("sweep", help="run a (seed x fraction x type x dims) matrix")
    p.add_argument("--seeds", default=str(DESK["seeds"]), help="seed count or comma list (default 3)")
    p.add_argument("--p", default="0.3:0.9:0.05", help="coverage targets (default 0.3:0.9:0.05)")
    p.add_argument("--dims", default=str(DESK["dims"]), help="comma list of grid edges (default 256)")
    p.add_argument("--types", default="OS,VS", help="problem types to run (default OS,VS)")
    p.add_argument(
        "--r-cells", type=float, default=DESK["r_cells"], help="disk radius in cells at every dims (default 8)"
    )
    p.add_argument("--paper-scale", action="store_true", help="reference setup: 1024^2, radius 25 cells, 6 seeds")
    p.add_argument("--gamma0", type=float, default=1e-4)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--u0", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes (default: cores)")
    p.add_argument("--outdir", required=True)

    p = commands.add_parser("fit", help="fit the near-threshold power law to a samples CSV")
    p.add_argument("--input", required=True, help="samples.csv from sweep or solve")
    p.add_argument("--type", default="OS")
    p.add_argument("--dims", type=int, default=None, help="restrict to one grid edge")
    p.add_argument("--window", nargs=2, type=float, required=True, metavar=("PMIN", "PMAX"))
    p.add_argument("--column", default="p_achieved", choices=("p_achieved", "p_target"), help="abscissa column")
    p.add_argument("--out", default=None, help="write the fit JSON here instead of stdout")

    p = commands.add_parser("contour", help="extract equipotential polylines from a potential dump")
    p.add_argument("--field", required=True, help="potential dump from solve")
    p.add_argument("--levels", default="0.1:0.9:0.1", help="levels, list or start:stop:step (default 0.1:0.9:0.1)")
    p.add_argument("--out", required=True, help="polyline CSV path")

    p = commands.add_parser("fractal", help="box-counting dimension of polylines")
    p.add_argument("--polylines", required=True, help="polyline CSV from contour")
    p.add_argument("--sizes", default=None, help="comma list of box sizes in box units")
    p.add_argument("--out", default=None, help="write the estimate JSON here instead of stdout")

    p = commands.add_parser("formula", help="evaluate the closed-form conductivity curves")
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--pc", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--tprime", type=float, default=None, help="second exponent (3D only)")
    p.add_argument("--gamma0", type=float, required=True)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--side", default="plus", choices=("plus", "minus"), help="OS (plus) or VS (minus) branch")
    p.add_argument("--p", type=float, default=None, help="evaluate at this fraction and print the value")
    p.add_argument("--emit-curve", type=int, default=None, metavar="N", help="emit an N-point CSV over [0,1]")
    p.add_argument("--out", default=None, help="CSV path for --emit-curve (default stdout)")

    p = commands.add_parser("render", help="images from dumps: PGM potentials, PPM overlays")
    p.add_argument("--field", default=None, help="potential dump -> 16-bit PGM")
    p.add_argument("--occupancy", default=None, help="occupancy dump -> 8-bit PGM (or PPM with --contours)")
    p.add_argument("--contours", default=None, help="polyline CSV to overlay on the occupancy")
    p.add_argument("--out", required=True)
    return parser


def _cmd_generate(args) -> int:
    _apply_paper_scale(args)
    box = _box_from_args(args)
    targets = _parse_fraction_list(args.p)
    path, config = generate_path(args.seed, box, targets, (args.dims, args.dims))
    formats.write_configuration(args.out + ".config.csv", config)
    formats.write_path(args.out + ".path.json", path)
    print(f"{config.count} disks; checkpoints at {[cp.prefix_length for cp in path.checkpoints]}")
    return 0


def _cmd_solve(args) -> int:
    config = formats.read_configuration(args.config)
    if args.prefix is not None:
        config = config.prefix(args.prefix)
    problem_type = ProblemType.parse(args.type)
    occ = rasterize(config, (args.dims, args.dims))
    grid = conductivity_field(occ, problem_type, args.gamma0, args.gamma1)
    settings = SolverSettings(args.tol, args.max_iters)
    u = solve(grid, BoundarySpec(problem_type, args.u0), settings)
    flux = observables.total_conductivity(u, grid)
    sample = observables.ConductivitySample(
        seed=config.seed,
        problem_type=problem_type,
        dims=(args.dims, args.dims),
        r_cells=config.box.disk_radius * args.dims / (2.0 * config.box.half_width),
        p_target=occ.coverage,
        p_achieved=occ.coverage,
        gamma0=args.gamma0,
        gamma1=args.gamma1,
        gamma_total=flux.value,
        gamma_in=flux.inflow,
        gamma_out=flux.outflow,
        energy=observables.energy(u, grid),
        iterations=u.iterations,
        residual=u.final_residual,
    )
    formats.dump_potential(args.out + ".u.dump", u)
    formats.write_samples_csv(args.out + ".sample.csv", [sample])
    formats.atomic_write_text(args.out + ".sample.json", formats.samples_json_text([sample]))
    print(f"gamma_total {flux.value!r} (in {flux.inflow!r}, out {flux.outflow!r}), {u.iterations} iterations")
    return 0


def _cmd_sweep(args) -> int:
    if args.paper_scale:
        args.dims = str(PAPER["dims"])
        args.r_cells = PAPER["r_cells"]
        if args.seeds == str(DESK["seeds"]):
            args.seeds = str(PAPER["seeds"])
    seeds = (
        tuple(range(int(args.seeds)))
        if "," not in args.seeds
        else tuple(int(s) for s in args.seeds.split(","))
    )
    plan = sweep.ExperimentPlan(
        seeds=seeds,
        p_targets=tuple(_parse_fraction_list(args.p)),
        dims=tuple(int(d) for d in args.dims.split(",")),
        r_cells=args.r_cells,
        gamma0=args.gamma0,
        gamma1=args.gamma1,
        u0=args.u0,
        types=tuple(args.types.split(",")),
        rel_tolerance=args.tol,
        max_iterations=args.max_iters,
        output_dir=args.outdir,
    )
    result = sweep.run_plan(plan, jobs=args.jobs, log=lambda msg: print(msg, file=sys.stderr))
    print(f"{len(result.samples)} samples ({result.solves_performed} new) in {args.outdir}")
    return 0


def _cmd_fit(args) -> int:
    samples, _rows = formats.read_samples_csv(args.input)
    problem_type = ProblemType.parse(args.type)
    chosen = [
        s
        for s in samples
        if s.problem_type is problem_type and (args.dims is None or s.dims[0] == args.dims)
    ]
    if not chosen:
        raise UsageError("no samples match the requested type/dims")
    abscissa = [getattr(s, args.column) for s in chosen]
    points = np.column_stack([abscissa, [s.gamma_total for s in chosen]])
    curve = analysis.CurveSamples(problem_type, points)
    fit = analysis.fit_power_law(curve, tuple(args.window))
    doc = {
        "type": problem_type.value,
        "p_c": fit.p_c,
        "t": fit.t,
        "amplitude": fit.amplitude,
        "rss": fit.rss,
        "window": list(fit.window),
        "n_samples": len(chosen),
    }
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        formats.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_contour(args) -> int:
    u = formats.load_potential(args.field)
    levels = _parse_fraction_list(args.levels)
    contour_set = contours.extract_contours(u, levels)
    formats.atomic_write_text(args.out, formats.polylines_csv_text(contour_set))
    total = sum(len(v) for v in contour_set.by_level.values())
    print(f"{total} polylines over {len(levels)} levels")
    return 0


def _cmd_fractal(args) -> int:
    by_level = formats.read_polylines_csv(args.polylines)
    if not by_level:
        raise UsageError("polyline file is empty")
    if args.sizes:
        sizes = [float(s) for s in args.sizes.split(",")]
    else:
        span = max(
            float(np.ptp(np.concatenate(polys)[:, axis]))
            for polys in by_level.values()
            for axis in (0, 1)
            if polys
        )
        sizes = [span / 4 / 2**k for k in range(6)]
    per_level = {}
    estimates = []
    for level in sorted(by_level):
        estimate = contours.box_counting_dimension(by_level[level], sizes)
        per_level[repr(level)] = estimate.dimension
        estimates.append(estimate)
    doc = {
        "dimension": float(np.mean([e.dimension for e in estimates])),
        "per_level": per_level,
        "box_sizes": list(estimates[0].box_sizes),
        "fit_r2_min": min(e.fit_r2 for e in estimates),
    }
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        formats.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_formula(args) -> int:
    params = analysis.FormulaParams(args.pc, args.t, args.gamma0, args.gamma1, args.tprime)
    if args.dim == 3:
        if args.tprime is None:
            raise UsageError("--dim 3 needs --tprime")
        fun = lambda p: analysis.formula_3d(p, params)
    elif args.side == "plus":
        fun = lambda p: analysis.formula_os(p, params)
    else:
        fun = lambda p: analysis.formula_vs(p, params)
    if (args.p is None) == (args.emit_curve is None):
        raise UsageError("choose exactly one of --p or --emit-curve")
    if args.p is not None:
        print(repr(fun(args.p)))
        return 0
    grid = np.linspace(0.0, 1.0, args.emit_curve)
    lines = ["p,gamma"] + [f"{p!r},{fun(float(p))!r}" for p in grid]
    text = "\n".join(lines) + "\n"
    if args.out:
        formats.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_render(args) -> int:
    wrote = False
    if args.field:
        u = formats.load_potential(args.field)
        formats.atomic_write_bytes(args.out, formats.potential_pgm(u))
        wrote = True
    elif args.occupancy:
        array, box, _meta = formats.read_grid_dump(args.occupancy)
        from .field import OccupancyGrid

        occ = OccupancyGrid(box, array.astype(bool))
        if args.contours:
            by_level = formats.read_polylines_csv(args.contours)
            chunks = [p for polys in by_level.values() for p in polys]
            vertices = np.concatenate(chunks, axis=0) if chunks else np.empty((0, 2))
            formats.atomic_write_bytes(args.out, formats.overlay_ppm(occ, vertices))
        else:
            formats.atomic_write_bytes(args.out, formats.occupancy_pgm(occ))
        wrote = True
    if not wrote:
        raise UsageError("render needs --field or --occupancy")
    print(args.out)
    return 0


_HANDLERS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "contour": _cmd_contour,
    "fractal": _cmd_fractal,
    "formula": _cmd_formula,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    error_json = False
    try:
        args = parser.parse_args(argv)
        error_json = args.error_json
        return _HANDLERS[args.command](args)
    except UsageError as exc:
        _report(exc, "usage", error_json)
        return 1
    except NumericFailure as exc:
        _report(exc, "numeric", error_json)
        return 2
    except (ValueError, OSError) as exc:
        _report(exc, "usage", error_json)
        return 1


def _report(exc: Exception, kind: str, as_json: bool) -> None:
    if as_json:
        doc = {"error": type(exc).__name__, "kind": kind, "message": str(exc)}
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    else:
        print(f"percond: {kind} error: {exc}", file=sys.stderr)


def entry() -> None:
    sys.exit(main(sys.argv[1:]))
