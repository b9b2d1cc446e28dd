"""Versioned on-disk formats: snapshots, field dumps, CSV tables, images.

Every format starts with a version line.  Writes go through a temporary file
in the target directory followed by an atomic rename, so readers never see a
half-written file.  Floats are serialized with repr (shortest round-trip),
which keeps identical inputs producing byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

from .field import OccupancyGrid, ProblemType
from .geometry import GENERATOR_NAME, Box, Checkpoint, DiskConfiguration, NestedPath
from .observables import ConductivitySample
from .solver import BoundarySpec, PotentialField

CONFIG_MAGIC = "PERCOND CONFIG 1"
FIELD_MAGIC = "PERCOND FIELD 1"
PATH_FORMAT = "percond-path/1"

SAMPLE_COLUMNS = (
    "seed",
    "type",
    "dims_x",
    "dims_y",
    "r_cells",
    "p_target",
    "p_achieved",
    "gamma0",
    "gamma1",
    "gamma_total",
    "gamma_in",
    "gamma_out",
    "energy",
    "iterations",
    "residual",
)


def atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# -- disk-configuration snapshots -------------------------------------------

def write_configuration(path: str, config: DiskConfiguration) -> None:
    lines = [
        CONFIG_MAGIC,
        f"generator {GENERATOR_NAME}",
        f"seed {config.seed}",
        f"half_width {config.box.half_width!r}",
        f"disk_radius {config.box.disk_radius!r}",
        f"count {config.count}",
        "index,x,y",
    ]
    for k, (cx, cy) in enumerate(config.centers):
        lines.append(f"{k},{cx!r},{cy!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_configuration(path: str) -> DiskConfiguration:
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != CONFIG_MAGIC:
        raise ValueError(f"{path}: not a configuration snapshot")
    header = {}
    body_at = None
    for k, line in enumerate(lines[1:], start=1):
        if line == "index,x,y":
            body_at = k + 1
            break
        key, _, value = line.partition(" ")
        header[key] = value
    if body_at is None:
        raise ValueError(f"{path}: missing center table")
    box = Box(float(header["half_width"]), float(header["disk_radius"]))
    centers = []
    for line in lines[body_at:]:
        if not line:
            continue
        _, x, y = line.split(",")
        centers.append((float(x), float(y)))
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    if centers.shape[0] != int(header["count"]):
        raise ValueError(f"{path}: center count disagrees with header")
    return DiskConfiguration(box, centers, int(header["seed"]))


# -- nested-path records -----------------------------------------------------

def path_to_json(path_record: NestedPath) -> str:
    doc = {
        "format": PATH_FORMAT,
        "generator": GENERATOR_NAME,
        "seed": path_record.seed,
        "half_width": path_record.box.half_width,
        "disk_radius": path_record.box.disk_radius,
        "grid_dims": list(path_record.grid_dims),
        "checkpoints": [
            {
                "p_target": cp.p_target,
                "prefix_length": cp.prefix_length,
                "p_achieved": cp.p_achieved,
            }
            for cp in path_record.checkpoints
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_path(path: str, path_record: NestedPath) -> None:
    atomic_write_text(path, path_to_json(path_record))


def read_path(path: str) -> NestedPath:
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    if doc.get("format") != PATH_FORMAT:
        raise ValueError(f"{path}: not a nested-path record")
    box = Box(doc["half_width"], doc["disk_radius"])
    checkpoints = tuple(
        Checkpoint(cp["p_target"], cp["prefix_length"], cp["p_achieved"])
        for cp in doc["checkpoints"]
    )
    return NestedPath(doc["seed"], box, tuple(doc["grid_dims"]), checkpoints)


# -- raw grid dumps ----------------------------------------------------------

def write_grid_dump(path: str, array: np.ndarray, box: Box, meta: dict | None = None) -> None:
    """Versioned header + row-major little-endian values (float64 or uint8)."""
    array = np.asarray(array)
    if array.dtype == bool:
        array = array.astype(np.uint8)
    if array.dtype == np.uint8:
        dtype_tag = "uint8"
        payload = array.tobytes(order="C")
    else:
        dtype_tag = "float64-le"
        payload = array.astype("<f8").tobytes(order="C")
    ny, nx = array.shape
    lines = [
        FIELD_MAGIC,
        f"dtype {dtype_tag}",
        f"rows {ny}",
        f"cols {nx}",
        f"half_width {box.half_width!r}",
        f"disk_radius {box.disk_radius!r}",
    ]
    for key, value in (meta or {}).items():
        lines.append(f"{key} {value}")
    lines.append("END")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii") + payload)


def read_grid_dump(path: str):
    """Returns (array, box, meta dict)."""
    with open(path, "rb") as handle:
        blob = handle.read()
    cut = blob.index(b"END\n") + 4
    header_lines = blob[:cut].decode("ascii").splitlines()
    if header_lines[0] != FIELD_MAGIC:
        raise ValueError(f"{path}: not a grid dump")
    meta = {}
    for line in header_lines[1:-1]:
        key, _, value = line.partition(" ")
        meta[key] = value
    ny, nx = int(meta.pop("rows")), int(meta.pop("cols"))
    dtype_tag = meta.pop("dtype")
    box = Box(float(meta.pop("half_width")), float(meta.pop("disk_radius")))
    if dtype_tag == "uint8":
        array = np.frombuffer(blob[cut:], dtype=np.uint8).reshape(ny, nx).copy()
    else:
        array = np.frombuffer(blob[cut:], dtype="<f8").reshape(ny, nx).astype(float)
    return array, box, meta


def dump_potential(path: str, u: PotentialField) -> None:
    meta = {
        "bc": u.bc.problem_type.value,
        "u0": repr(u.bc.u0),
        "iterations": u.iterations,
        "residual": repr(u.final_residual),
    }
    write_grid_dump(path, u.values, u.box, meta)


def load_potential(path: str) -> PotentialField:
    array, box, meta = read_grid_dump(path)
    bc = BoundarySpec(ProblemType.parse(meta["bc"]), float(meta["u0"]))
    return PotentialField(box, array, bc, int(meta.get("iterations", 0)), float(meta.get("residual", 0.0)))


# -- netpbm renderings -------------------------------------------------------

def occupancy_pgm(occ: OccupancyGrid) -> bytes:
    """8-bit PGM, occupied cells dark; top row of the image is the box top."""
    ny, nx = occ.cells.shape
    pixels = np.where(occ.cells[::-1, :], 80, 255).astype(np.uint8)
    return f"P5\n{nx} {ny}\n255\n".encode("ascii") + pixels.tobytes()


def potential_pgm(u: PotentialField) -> bytes:
    """16-bit PGM of the potential scaled onto [0, u0]."""
    ny, nx = u.values.shape
    scaled = np.clip(u.values / u.bc.u0, 0.0, 1.0)
    pixels = np.round(scaled[::-1, :] * 65535).astype(">u2")
    return f"P5\n{nx} {ny}\n65535\n".encode("ascii") + pixels.tobytes()


def overlay_ppm(occ: OccupancyGrid, contour_vertices: np.ndarray) -> bytes:
    """8-bit PPM: occupancy in gray/white with contour paths stamped black."""
    ny, nx = occ.cells.shape
    base = np.where(occ.cells, 170, 255).astype(np.uint8)
    rgb = np.repeat(base[:, :, None], 3, axis=2)
    if contour_vertices.size:
        L = occ.box.half_width
        dx, dy = occ.cell_size()
        ix = np.clip(((contour_vertices[:, 0] + L) / dx).astype(int), 0, nx - 1)
        jy = np.clip(((contour_vertices[:, 1] + L) / dy).astype(int), 0, ny - 1)
        rgb[jy, ix, :] = 0
    return f"P6\n{nx} {ny}\n255\n".encode("ascii") + rgb[::-1, :, :].tobytes()


# -- sample tables -----------------------------------------------------------

def sample_to_row(sample: ConductivitySample, extra: dict | None = None) -> dict:
    row = {
        "seed": sample.seed,
        "type": sample.problem_type.value,
        "dims_x": sample.dims[0],
        "dims_y": sample.dims[1],
        "r_cells": repr(sample.r_cells),
        "p_target": repr(sample.p_target),
        "p_achieved": repr(sample.p_achieved),
        "gamma0": repr(sample.gamma0),
        "gamma1": repr(sample.gamma1),
        "gamma_total": repr(sample.gamma_total),
        "gamma_in": repr(sample.gamma_in),
        "gamma_out": repr(sample.gamma_out),
        "energy": repr(sample.energy),
        "iterations": sample.iterations,
        "residual": repr(sample.residual),
    }
    row.update(extra or {})
    return row


def row_to_sample(row: dict) -> ConductivitySample:
    return ConductivitySample(
        seed=int(row["seed"]),
        problem_type=ProblemType.parse(row["type"]),
        dims=(int(row["dims_x"]), int(row["dims_y"])),
        r_cells=float(row["r_cells"]),
        p_target=float(row["p_target"]),
        p_achieved=float(row["p_achieved"]),
        gamma0=float(row["gamma0"]),
        gamma1=float(row["gamma1"]),
        gamma_total=float(row["gamma_total"]),
        gamma_in=float(row["gamma_in"]),
        gamma_out=float(row["gamma_out"]),
        energy=float(row["energy"]),
        iterations=int(row["iterations"]),
        residual=float(row["residual"]),
    )


def samples_csv_text(samples, extra_columns: tuple = (), extras=None) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=SAMPLE_COLUMNS + tuple(extra_columns), lineterminator="\n")
    writer.writeheader()
    for k, sample in enumerate(samples):
        writer.writerow(sample_to_row(sample, (extras[k] if extras else None)))
    return buffer.getvalue()


def write_samples_csv(path: str, samples, extra_columns: tuple = (), extras=None) -> None:
    atomic_write_text(path, samples_csv_text(samples, extra_columns, extras))


def read_samples_csv(path: str):
    """Returns (samples list, raw row dicts)."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    return [row_to_sample(row) for row in rows], rows


def samples_json_text(samples) -> str:
    docs = []
    for sample in samples:
        docs.append(
            {
                "seed": sample.seed,
                "type": sample.problem_type.value,
                "dims_x": sample.dims[0],
                "dims_y": sample.dims[1],
                "r_cells": sample.r_cells,
                "p_target": sample.p_target,
                "p_achieved": sample.p_achieved,
                "gamma0": sample.gamma0,
                "gamma1": sample.gamma1,
                "gamma_total": sample.gamma_total,
                "gamma_in": sample.gamma_in,
                "gamma_out": sample.gamma_out,
                "energy": sample.energy,
                "iterations": sample.iterations,
                "residual": sample.residual,
            }
        )
    return json.dumps(docs, indent=2) + "\n"


# -- contour polylines -------------------------------------------------------

def polylines_csv_text(contour_set) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["level", "polyline_id", "vertex_index", "x", "y"])
    for level in contour_set.levels:
        for pid, poly in enumerate(contour_set.by_level[level]):
            for k, (x, y) in enumerate(poly):
                writer.writerow([repr(level), pid, k, repr(float(x)), repr(float(y))])
    return buffer.getvalue()


def read_polylines_csv(path: str):
    """Returns {level: [vertex arrays]} keyed by level value."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    grouped: dict = {}
    for row in rows:
        key = (float(row["level"]), int(row["polyline_id"]))
        grouped.setdefault(key, []).append((float(row["x"]), float(row["y"])))
    by_level: dict = {}
    for (level, _pid), pts in grouped.items():
        by_level.setdefault(level, []).append(np.asarray(pts))
    return by_level
