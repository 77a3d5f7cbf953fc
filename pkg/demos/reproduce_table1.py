"""2D convergence study on the quarter-unit square.

Solves levels 2..5 (h halves at each step, 32 to 2048 triangles) and a
level-7 reference, then prints the error table and compares the last-step
orders with the target asymptotic values.  About 15 s on one core.

    python demos/reproduce_table1.py [--levels 2,3,4,5] [--reference 7]
"""
import argparse

from hdgcontrol.study import run_study, table1_problem

TARGET = {"u": 1.48, "q": 0.99, "y": 1.98, "p": 1.88, "z": 2.89}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--levels", default="2,3,4,5")
    ap.add_argument("--reference", type=int, default=7)
    args = ap.parse_args()
    levels = [int(v) for v in args.levels.split(",")]

    report = run_study(table1_problem(levels, args.reference), progress=print)
    print()
    print(report.to_markdown())
    print("last-step orders vs target:")
    for k, v in report.final_orders().items():
        print(f"  {k}: {v:6.3f}   target {TARGET[k]:.2f}   diff {v - TARGET[k]:+.3f}")
    print(f"max equation residual over all solves: {report.max_residual:.2e}")


if __name__ == "__main__":
    main()
