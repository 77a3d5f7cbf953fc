"""3D convergence study on the cube of side 1/32.

Levels 1..3 against a level-4 reference (393216 tetrahedra).  The reference
solve uses the block trace solver and peaks near 4 GB; expect about a minute
on one core.

    python demos/reproduce_table2.py
"""
from hdgcontrol.study import run_study, table2_problem

TARGET = {"u": 1.58, "q": 1.14, "y": 2.03, "p": 1.80, "z": 2.80}

if __name__ == "__main__":
    report = run_study(table2_problem(), progress=print)
    print()
    print(report.to_markdown())
    for k, v in report.final_orders().items():
        print(f"  {k}: {v:6.3f}   target {TARGET[k]:.2f}")
