"""Solve one optimal control problem and write VTK files for a viewer.

Also prints the cost functional for a range of gamma: a larger penalty
buys a smaller control at the price of a worse state fit.
"""
from pathlib import Path

import numpy as np

from hdgcontrol import SpaceConfig, build_box_mesh, solve
from hdgcontrol.errors import cost_functional
from hdgcontrol.expressions import Expression
from hdgcontrol.vtk import write_control_vtk, write_solution_vtk

out = Path("demo_output")
out.mkdir(exist_ok=True)
mesh = build_box_mesh(2, (0, 0), (1, 1), 4)
space = SpaceConfig(2, 1)
y_d = Expression("sin(2*pi*x)*y + 0.5", dim=2)

for gamma in (1e-3, 1e-2, 1e-1, 1.0):
    sol = solve(mesh, space, None, y_d, gamma)
    J = cost_functional(sol.volume_field("y"), sol.control_field(), y_d, gamma)
    print(f"gamma={gamma:7.0e}  J={J:.6e}  |u| coeff norm={np.linalg.norm(sol.u):.4e}")

write_solution_vtk(sol, out / "fields.vtk")
write_control_vtk(sol, out / "control.vtk")
print("wrote", out / "fields.vtk", "and", out / "control.vtk")
