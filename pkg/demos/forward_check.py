"""Manufactured-solution check of the underlying Poisson solver.

y = sin(pi x) sin(pi y) on the unit square with k = 1: the scalar converges
at order k+2 = 3 and the flux at k+1 = 2 because the scalar space has one
degree more than the flux and trace spaces.
"""
from hdgcontrol.study import ForwardProblem, run_forward_verification

report = run_forward_verification(ForwardProblem(levels=[1, 2, 3, 4, 5, 6]), progress=print)
print(report.to_markdown())
