"""CSV and legacy-VTK writers, and readers for the same files."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .analysis import RateTable
from .forward import OptState
from .mesh import Mesh
from .optimizer import IterationRecord

ITERATION_FIELDS = ["phase", "k", "J", "variance_term", "control_term",
                    "relative_change", "nonlinear_residual"]
SWEEP_FIELDS = ["gamma", "J", "variance_norm", "control_energy", "r_J", "r_T", "r_v"]
VTK_TRIANGLE = 5


def fmt(x) -> str:
    """17 significant digits, enough to round-trip a double."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.17g}"


def _parse(cell: str):
    return None if cell == "" else float(cell)


# -- iterations ----------------------------------------------------------------

def write_iterations_csv(path, history: list[IterationRecord]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITERATION_FIELDS)
        for r in history:
            w.writerow([r.phase, r.k, fmt(r.J), fmt(r.variance_term), fmt(r.control_term),
                        fmt(r.relative_change), fmt(r.nonlinear_residual)])
    return path


def read_iterations_csv(path) -> list[IterationRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ITERATION_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            rel = _parse(row["relative_change"])
            out.append(IterationRecord(
                phase=row["phase"], k=int(row["k"]), J=float(row["J"]),
                variance_term=float(row["variance_term"]),
                control_term=float(row["control_term"]),
                relative_change=math.nan if rel is None else rel,
                nonlinear_residual=float(row["nonlinear_residual"])))
        return out


# -- sweep -----------------------------------------------------------------------

def write_sweep_csv(path, table: RateTable) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for r in table.rows:
            w.writerow([fmt(getattr(r, name)) for name in SWEEP_FIELDS])
    return path


def read_sweep_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SWEEP_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [{k: _parse(v) for k, v in row.items()} for row in reader]


# -- VTK -------------------------------------------------------------------------

def vertex_fields(mesh: Mesh, state: OptState) -> dict[str, np.ndarray]:
    """P2 and P1 fields sampled at the mesh vertices (vertex DOFs come first)."""
    nv = len(mesh.vertices)
    vel = np.asarray(state.v).reshape(-1, 2)[:nv]
    return {
        "T": np.asarray(state.T)[:nv],
        "q": np.asarray(state.q)[:nv],
        "p": np.asarray(state.p)[:nv],
        "velocity": np.column_stack([vel, np.zeros(nv)]),
    }


def write_vtk(path, mesh: Mesh, state: OptState, title: str = "convcool fields") -> Path:
    path = Path(path)
    nv, nt = len(mesh.vertices), len(mesh.triangles)
    fields = vertex_fields(mesh, state)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    lines.append(f"POINT_DATA {nv}")
    for name in ("T", "q", "p"):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(x) for x in fields[name]]
    lines.append("VECTORS velocity double")
    lines += [" ".join(fmt(c) for c in row) for row in fields["velocity"]]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path) -> dict:
    """Parse a file written by :func:`write_vtk`.

    Returns ``points``, ``triangles``, ``cell_types`` and one array per data field.
    """
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens[4:])  # skip header, title, encoding, dataset lines
    out: dict = {}

    def numbers(count, cast=float):
        vals = []
        while len(vals) < count:
            vals.extend(cast(t) for t in next(it).split())
        return np.array(vals)

    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = numbers(3 * n).reshape(n, 3)
        elif key == "CELLS":
            n = int(parts[1])
            cells = numbers(int(parts[2]), int).reshape(n, 4)
            if np.any(cells[:, 0] != 3):
                raise ValueError(f"{path}: only triangles are supported")
            out["triangles"] = cells[:, 1:]
        elif key == "CELL_TYPES":
            out["cell_types"] = numbers(int(parts[1]), int)
        elif key == "POINT_DATA":
            npts = int(parts[1])
        elif key == "SCALARS":
            next(it)  # LOOKUP_TABLE
            out[parts[1]] = numbers(npts)
        elif key == "VECTORS":
            out[parts[1]] = numbers(3 * npts).reshape(npts, 3)
        else:
            raise ValueError(f"{path}: unexpected section {key!r}")
    return out
