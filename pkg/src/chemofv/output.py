"""File outputs: per-cell snapshot CSV, legacy-VTK cell data, run manifests.

All writers are deterministic: no timestamps, floats via repr (shortest
round-trip), so reruns with the same inputs are byte-identical.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .mesh import Mesh
from .scheme import State

__all__ = ["write_snapshot_csv", "write_vtk", "write_manifest", "ensure_dir"]


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def write_snapshot_csv(path, mesh: Mesh, state: State) -> None:
    """Columns: cell, x[, y], u, v."""
    cols = ["cell", "x"] + (["y"] if mesh.dim == 2 else []) + ["u", "v"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(mesh.n_cells):
            coords = [repr(float(c)) for c in mesh.cell_centers[k]]
            fh.write(
                ",".join(
                    [str(k), *coords, repr(float(state.u.values[k])), repr(float(state.v.values[k]))]
                )
                + "\n"
            )


def write_vtk(path, mesh: Mesh, fields: dict[str, np.ndarray]) -> None:
    """Legacy-VTK unstructured grid with per-cell scalar data (2D meshes only)."""
    if mesh.vertices is None or mesh.cells_vertices is None:
        raise ValueError("VTK output needs a triangulated 2D mesh")
    verts = mesh.vertices
    tris = mesh.cells_vertices
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 2.0\n")
        fh.write("chemofv cell data\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(verts)} double\n")
        for x, y in verts:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        fh.write(f"CELLS {len(tris)} {4 * len(tris)}\n")
        for a, b, c in tris:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {len(tris)}\n")
        fh.write("5\n" * len(tris))
        fh.write(f"CELL_DATA {len(tris)}\n")
        for name, values in fields.items():
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for val in values:
                fh.write(f"{float(val)!r}\n")


def write_manifest(path, payload: dict) -> None:
    """Machine-readable record of every resolved run parameter."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
