"""Legacy ASCII VTK unstructured-grid export and import.

Meshes are written with their region tags as cell data; field snapshots add
point data (the whole-domain potential everywhere, the transmembrane
potential on heart vertices, NaN elsewhere).  The reader parses only the
files this writer produces, enough for mesh round-trips, and floats are
printed with 17 significant digits so coordinates survive a round-trip
bit for bit.
"""

from __future__ import annotations

import numpy as np

from .errors import BidomainError
from .mesh import Mesh, Region

_CELL_TYPE = {2: 5, 3: 10}  # VTK: 5 = triangle, 10 = tetrahedron
_DIM_FROM_CELL_TYPE = {5: 2, 10: 3}


def _write_header(handle, title: str, mesh: Mesh) -> None:
    n = mesh.vertex_count
    handle.write("# vtk DataFile Version 3.0\n")
    handle.write(f"{title}\n")
    handle.write("ASCII\n")
    handle.write("DATASET UNSTRUCTURED_GRID\n")
    handle.write(f"POINTS {n} double\n")
    for p in mesh.vertices:
        coords = list(p) + [0.0] * (3 - mesh.dim)
        handle.write(" ".join(f"{c:.17g}" for c in coords) + "\n")

    n_el = mesh.elements.shape[0]
    arity = mesh.dim + 1
    handle.write(f"CELLS {n_el} {n_el * (arity + 1)}\n")
    for el in mesh.elements:
        handle.write(f"{arity} " + " ".join(str(int(v)) for v in el) + "\n")
    handle.write(f"CELL_TYPES {n_el}\n")
    cell_type = _CELL_TYPE[mesh.dim]
    for _ in range(n_el):
        handle.write(f"{cell_type}\n")


def write_mesh_vtk(mesh: Mesh, path, title: str = "bidomain mesh") -> None:
    """Write the mesh with region tags as CELL_DATA."""
    with open(path, "w") as handle:
        _write_header(handle, title, mesh)
        handle.write(f"CELL_DATA {mesh.elements.shape[0]}\n")
        handle.write("SCALARS region int 1\n")
        handle.write("LOOKUP_TABLE default\n")
        for tag in mesh.tags:
            handle.write(f"{int(tag)}\n")


def write_fields_vtk(mesh: Mesh, path, u: np.ndarray, v: np.ndarray,
                     title: str = "bidomain fields") -> None:
    """Write a snapshot: u on all vertices, v on heart vertices (NaN outside)."""
    n = mesh.vertex_count
    v_full = np.full(n, np.nan)
    v_full[: mesh.heart_vertex_count] = v
    with open(path, "w") as handle:
        _write_header(handle, title, mesh)
        handle.write(f"CELL_DATA {mesh.elements.shape[0]}\n")
        handle.write("SCALARS region int 1\n")
        handle.write("LOOKUP_TABLE default\n")
        for tag in mesh.tags:
            handle.write(f"{int(tag)}\n")
        handle.write(f"POINT_DATA {n}\n")
        handle.write("SCALARS u double 1\n")
        handle.write("LOOKUP_TABLE default\n")
        for val in u:
            handle.write(f"{val:.17g}\n")
        handle.write("SCALARS v double 1\n")
        handle.write("LOOKUP_TABLE default\n")
        for val in v_full:
            handle.write(f"{val:.17g}\n")


def read_mesh_vtk(path) -> Mesh:
    """Read a mesh written by write_mesh_vtk / write_fields_vtk."""
    with open(path) as handle:
        tokens = handle.read().split()

    def find(keyword: str, start: int = 0) -> int:
        try:
            return tokens.index(keyword, start)
        except ValueError as exc:
            raise BidomainError(f"VTK file lacks {keyword} section") from exc

    pos = find("POINTS")
    n = int(tokens[pos + 1])
    coords = np.array(tokens[pos + 3: pos + 3 + 3 * n], dtype=float).reshape(n, 3)

    pos = find("CELLS")
    n_el = int(tokens[pos + 1])
    total = int(tokens[pos + 2])
    raw = np.array(tokens[pos + 3: pos + 3 + total], dtype=np.int64)
    arity = int(raw[0])
    cells = raw.reshape(n_el, arity + 1)[:, 1:]

    pos = find("CELL_TYPES")
    cell_type = int(tokens[pos + 2])
    if cell_type not in _DIM_FROM_CELL_TYPE:
        raise BidomainError(f"unsupported VTK cell type {cell_type}")
    dim = _DIM_FROM_CELL_TYPE[cell_type]
    if arity != dim + 1:
        raise BidomainError("cell arity inconsistent with cell type")

    pos = find("SCALARS")
    if tokens[pos + 1] != "region":
        raise BidomainError("expected region scalars as first CELL_DATA")
    # layout: SCALARS region int 1 / LOOKUP_TABLE default / values
    tags = np.array(tokens[pos + 6: pos + 6 + n_el], dtype=np.int64)

    vertices = coords[:, :dim].copy()
    heart_elements = cells[tags == Region.HEART]
    n_heart = int(heart_elements.max()) + 1 if heart_elements.size else 0
    mesh = Mesh(dim, vertices, cells, tags, n_heart)
    mesh.validate()
    return mesh
