"""Legacy ASCII VTK output (``# vtk DataFile Version 3.0``).

Discrete fields are discontinuous, so vertices are duplicated per element
and nodal values come from each element's own polynomial.
"""
from pathlib import Path

import numpy as np

from .quadrature import reference_vertices

CELL_TYPES = {1: 3, 2: 5, 3: 10}  # line, triangle, tetra


def _num(v):
    return format(float(v), ".16e")


def _write(path, title, points, cells, cell_type, point_data=()):
    path = Path(path)
    n, nv = cells.shape
    pts = np.zeros((len(points), 3))
    pts[:, :points.shape[1]] = points
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double"]
    lines += [" ".join(_num(c) for c in p) for p in pts]
    lines.append(f"CELLS {n} {n * (nv + 1)}")
    lines += [" ".join([str(nv)] + [str(int(i)) for i in c]) for c in cells]
    lines.append(f"CELL_TYPES {n}")
    lines += [str(cell_type)] * n
    if point_data:
        lines.append(f"POINT_DATA {len(pts)}")
    for name, vals in point_data:
        vals = np.asarray(vals, dtype=float)
        if vals.ndim == 1:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_num(v) for v in vals]
        else:
            vec = np.zeros((len(vals), 3))
            vec[:, :vals.shape[1]] = vals
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_num(c) for c in v) for v in vec]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def write_mesh_vtk(mesh, path):
    """Mesh only, shared vertices."""
    return _write(path, f"mesh dim={mesh.dim} elements={mesh.n_elements}", mesh.vertices,
                  mesh.elements, CELL_TYPES[mesh.dim])


def write_solution_vtk(sol, path):
    """Volume fields ``y, z`` (scalars) and ``q, p`` (vectors) at element vertices."""
    mesh = sol.mesh
    ne, nv = mesh.elements.shape
    ref = reference_vertices(mesh.dim)
    points = mesh.vertices[mesh.elements].reshape(-1, mesh.dim)
    cells = np.arange(ne * nv).reshape(ne, nv)
    elems = np.arange(ne)
    data = []
    for name in ("y", "z", "q", "p"):
        vals = sol.volume_field(name).evaluate(elems, ref)  # (ne, nv[, d])
        data.append((name, vals.reshape(ne * nv, *vals.shape[2:])))
    return _write(path, f"hdg solution k={sol.space.k} gamma={sol.gamma!r}", points, cells,
                  CELL_TYPES[mesh.dim], data)


def write_control_vtk(sol, path):
    """Boundary control ``u`` on the boundary faces."""
    mesh = sol.mesh
    faces = mesh.boundary_faces
    nv = mesh.dim
    ref = reference_vertices(mesh.dim - 1)
    points = mesh.vertices[mesh.faces[faces]].reshape(-1, mesh.dim)
    cells = np.arange(len(faces) * nv).reshape(len(faces), nv)
    vals = sol.control_field().evaluate(faces, ref).ravel()
    return _write(path, f"hdg control k={sol.space.k}", points, cells, CELL_TYPES[mesh.dim - 1],
                  [("u", vals)])
