"""Command line entry point: ``hdgcontrol {study,forward-verify,export}``."""
import argparse
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

log = logging.getLogger("hdgcontrol")


def _levels(text):
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from None


def _common(p):
    p.add_argument("--output-dir", type=Path, default=Path("."), help="directory for output files")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    p.add_argument("-v", "--verbose", action="store_true")


def _problem_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", type=Path, help="INI problem file")
    g.add_argument("--preset", choices=["table1", "table2"], help="built-in problem")
    p.add_argument("--levels", type=_levels, help="study levels, e.g. 2,3,4")
    p.add_argument("--reference-level", type=int, help="override the reference level")


def build_parser():
    ap = argparse.ArgumentParser(prog="hdgcontrol", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("study", help="convergence study against a fine reference solution")
    _problem_args(p)
    p.add_argument("--no-residuals", action="store_true", help="skip equation residual checks")
    _common(p)

    p = sub.add_parser("forward-verify", help="manufactured-solution check of the Poisson solver")
    p.add_argument("--config", type=Path, help="INI file with a [forward] section")
    p.add_argument("--levels", type=_levels)
    _common(p)

    p = sub.add_parser("export", help="convert a report or write VTK/Matrix-Market output")
    p.add_argument("--format", choices=["csv", "md", "vtk"], required=True)
    p.add_argument("--report", type=Path, help="report CSV (csv/md formats)")
    _problem_args(p)
    p.add_argument("--level", type=int, help="mesh level to solve for vtk output")
    p.add_argument("--matrix", action="store_true", help="also dump K and F in Matrix-Market format")
    _common(p)
    return ap


def _load_problem(args):
    from .study import PRESETS, ProblemData

    if args.config:
        problem = ProblemData.from_file(args.config)
    else:
        problem = PRESETS[args.preset or "table1"]()
    levels = args.levels or problem.levels
    ref = args.reference_level if args.reference_level is not None else problem.reference_level
    if args.levels and args.reference_level is None:
        ref = max(ref, max(levels) + 1)
    return ProblemData(problem.dim, problem.lower, problem.upper, problem.gamma, problem.f,
                       problem.y_d, problem.k, levels, ref, problem.stabilization,
                       problem.solver, problem.name)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def cmd_study(args):
    from .study import run_study

    problem = _load_problem(args)
    report = run_study(problem, check_residuals=not args.no_residuals)
    _write(args.output_dir / f"{problem.name}.csv", report.to_csv())
    md = report.to_markdown()
    _write(args.output_dir / f"{problem.name}.md", md)
    print(md, end="")


def cmd_forward(args):
    from .study import ForwardProblem, run_forward_verification

    problem = ForwardProblem.from_file(args.config) if args.config else ForwardProblem()
    if args.levels:
        problem.levels = args.levels
    report = run_forward_verification(problem)
    _write(args.output_dir / f"{problem.name}.csv", report.to_csv())
    md = report.to_markdown()
    _write(args.output_dir / f"{problem.name}.md", md)
    print(md, end="")


def cmd_export(args):
    from .errors import ConvergenceReport

    if args.format in ("csv", "md"):
        if args.report is None:
            raise ValueError("--report is required for csv/md export")
        try:
            report = ConvergenceReport.from_csv(args.report.read_text())
        except OSError as exc:
            raise OSError(f"cannot read {args.report}: {exc.strerror}") from exc
        text = report.to_csv() if args.format == "csv" else report.to_markdown()
        _write(args.output_dir / (args.report.stem + "." + args.format), text)
        return

    from .linalg import write_matrix_market
    from .system import assemble_condensed, solve_trace_system
    from .solution import recover
    from .vtk import write_control_vtk, write_mesh_vtk, write_solution_vtk

    problem = _load_problem(args)
    level = args.level if args.level is not None else problem.levels[-1]
    mesh = problem.mesh(level)
    f, y_d = problem.data()
    system = assemble_condensed(mesh, problem.space, f, y_d, problem.gamma)
    gvec, res = solve_trace_system(system, problem.solver)
    sol = recover(gvec, system, mesh, problem.space)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{problem.name}_L{level}"
    for path in (write_mesh_vtk(mesh, out / f"{stem}_mesh.vtk"),
                 write_solution_vtk(sol, out / f"{stem}_fields.vtk"),
                 write_control_vtk(sol, out / f"{stem}_control.vtk")):
        log.info("wrote %s", path)
    if args.matrix:
        write_matrix_market(out / f"{stem}_K.mtx", system.K, comment="condensed trace matrix")
        write_matrix_market(out / f"{stem}_F.mtx", system.F[:, None], comment="trace load")
    print(f"level {level}: {mesh.n_elements} elements, trace residual {res:.2e}, output in {out}")


COMMANDS = {"study": cmd_study, "forward-verify": cmd_forward, "export": cmd_export}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        from threadpoolctl import threadpool_limits
        limit = threadpool_limits(limits=args.threads)
    else:
        limit = nullcontext()
    try:
        with limit:
            COMMANDS[args.command](args)
    except Exception as exc:  # reported, not re-raised: the exit code carries failure
        print(f"hdgcontrol {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
