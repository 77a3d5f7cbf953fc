import numpy as np

from hdgcontrol.mesh import build_box_mesh
from hdgcontrol.space import SpaceConfig
from hdgcontrol.system import solve
from hdgcontrol.vtk import write_control_vtk, write_mesh_vtk, write_solution_vtk


def _sections(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    return lines


def test_mesh_file(tmp_path):
    m = build_box_mesh(3, (0, 0, 0), (1, 1, 1), 0)
    lines = _sections(write_mesh_vtk(m, tmp_path / "m.vtk"))
    assert f"POINTS {len(m.vertices)} double" in lines
    assert f"CELLS 6 30" in lines and lines.count("10") == 6


def test_solution_values(tmp_path):
    m = build_box_mesh(2, (0, 0), (1, 1), 1)
    y_d = lambda x: x[..., 0] + 1  # noqa: E731
    sol = solve(m, SpaceConfig(2, 1), None, y_d, 1.0)
    lines = _sections(write_solution_vtk(sol, tmp_path / "s.vtk"))
    n = 3 * m.n_elements
    i = lines.index("SCALARS y double 1")
    vals = np.array([float(v) for v in lines[i + 2:i + 2 + n]])
    # first element, first vertex: y at the vertex from its own polynomial
    y0 = sol.volume_field("y").evaluate_physical(np.array([0]), m.vertices[m.elements[0]][None])[0]
    np.testing.assert_allclose(vals[:3], y0, rtol=1e-15)
    assert "VECTORS q double" in lines and "VECTORS p double" in lines
    lines = _sections(write_control_vtk(sol, tmp_path / "u.vtk"))
    assert f"CELLS {len(m.boundary_faces)} {3 * len(m.boundary_faces)}" in lines
    assert "SCALARS u double 1" in lines
