"""Problem definitions and convergence studies.

Problems are read from INI files::

    [problem]
    dim = 2
    lower = 0, 0
    upper = 0.25, 0.25
    gamma = 1
    f = 0
    y_d = (x^2 + y^2)^0.00001

    [discretization]
    k = 1
    levels = 2, 3, 4, 5
    reference_level = 7

Level ``L`` is the structured box mesh with ``2 * 4**L`` triangles or
``6 * 8**L`` tetrahedra; ``h`` halves with each level.
"""
import configparser
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConvergenceReport, l2_error_boundary, l2_error_volume
from .expressions import Expression
from .mesh import build_box_mesh
from .solution import max_residual, residuals
from .space import SpaceConfig
from .system import solve, solve_forward

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class ConfigError(ValueError):
    pass


class StudyError(RuntimeError):
    """A level failed; ``partial`` holds the levels finished so far."""

    def __init__(self, msg, level=None, partial=None):
        super().__init__(msg)
        self.level = level
        self.partial = partial


def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _ints(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


@dataclass
class ProblemData:
    """Box domain, data fields and the level sequence of a study."""

    dim: int
    lower: tuple
    upper: tuple
    gamma: float
    f: str = "0"
    y_d: str = "0"
    k: int = 1
    levels: list = field(default_factory=lambda: [1, 2, 3])
    reference_level: int = 5
    stabilization: str = "face"
    solver: str = "auto"
    name: str = "study"

    def __post_init__(self):
        self.lower, self.upper = tuple(map(float, self.lower)), tuple(map(float, self.upper))
        self.levels = sorted(int(v) for v in self.levels)
        if self.dim not in (2, 3):
            raise ConfigError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ConfigError("lower/upper must have dim components")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.levels or self.levels[0] < 0:
            raise ConfigError("levels must be a nonempty list of nonnegative integers")
        if self.reference_level < self.levels[-1] + 1:
            raise ConfigError(f"reference level {self.reference_level} must exceed the finest "
                              f"study level {self.levels[-1]}")
        SpaceConfig(self.dim, self.k, self.stabilization)  # validates k and stabilization
        self.f_expr = Expression(self.f, self.dim)
        self.y_d_expr = Expression(self.y_d, self.dim)

    @property
    def space(self):
        return SpaceConfig(self.dim, self.k, self.stabilization)

    def data(self):
        """``(f, y_d)`` callables, ``None`` for identically zero data."""
        return (None if self.f_expr.is_zero else self.f_expr,
                None if self.y_d_expr.is_zero else self.y_d_expr)

    def mesh(self, level):
        return build_box_mesh(self.dim, self.lower, self.upper, level)

    def metadata(self):
        return {"name": self.name, "dim": self.dim, "lower": " ".join(map(repr, self.lower)),
                "upper": " ".join(map(repr, self.upper)), "gamma": repr(float(self.gamma)),
                "f": self.f, "y_d": self.y_d, "k": self.k,
                "reference_level": self.reference_level, "stabilization": self.stabilization,
                "version": __version__}

    @classmethod
    def from_config(cls, cp):
        try:
            pr, di = cp["problem"], cp["discretization"]
            kw = dict(dim=pr.getint("dim"), lower=_floats(pr["lower"]), upper=_floats(pr["upper"]),
                      gamma=pr.getfloat("gamma", 1.0), f=pr.get("f", "0"), y_d=pr.get("y_d", "0"),
                      name=pr.get("name", "study"), k=di.getint("k", 1),
                      levels=_ints(di["levels"]), reference_level=di.getint("reference_level"),
                      stabilization=di.get("stabilization", "face"))
            if cp.has_section("solver"):
                kw["solver"] = cp["solver"].get("backend", "auto")
        except KeyError as exc:
            raise ConfigError(f"missing config entry {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
        return cls.from_config(cp)

    @classmethod
    def from_string(cls, text):
        cp = configparser.ConfigParser()
        cp.read_string(text)
        return cls.from_config(cp)


def table1_problem(levels=(2, 3, 4, 5), reference_level=7, **kw):
    """2D example: unit-quarter square, ``f = 0``, ``y_d = (x^2 + y^2)^s``."""
    return ProblemData(2, (0, 0), (0.25, 0.25), 1.0, "0", "(x^2 + y^2)^0.00001", 1,
                       list(levels), reference_level, name="table1", **kw)


def table2_problem(levels=(1, 2, 3), reference_level=4, **kw):
    """3D example on the cube of side 1/32 with a singular ``y_d``."""
    return ProblemData(3, (0, 0, 0), (1 / 32,) * 3, 1.0, "0",
                       "(x^2 + y^2 + z^2)^(-0.25 + 0.00001)", 1,
                       list(levels), reference_level, name="table2", **kw)


PRESETS = {"table1": table1_problem, "table2": table2_problem}


def _check_residuals(sol, f, y_d, level):
    res = residuals(sol, f, y_d)
    worst = max_residual(res)
    if worst > RESIDUAL_TOL:
        log.warning("level %d: residual %.3e exceeds %.0e (%s)", level, worst, RESIDUAL_TOL, res)
    return worst


def run_study(problem, check_residuals=True, progress=None):
    """Solve the reference and every study level; return the error table.

    Errors are measured against the reference-level solution on the nested
    mesh.  The finest study level is flagged as contaminated because the
    reference error is not negligible there.
    """
    f, y_d = problem.data()
    space = problem.space
    say = progress or log.info

    def run(level):
        mesh = problem.mesh(level)
        sol = solve(mesh, space, f, y_d, problem.gamma, backend=problem.solver)
        worst = _check_residuals(sol, f, y_d, level) if check_residuals else math.nan
        say(f"level {level}: {mesh.n_elements} elements, h={mesh.h:.4e}, "
            f"trace residual {sol.trace_residual:.2e}, equation residual {worst:.2e}")
        return sol, worst

    try:
        ref, ref_res = run(problem.reference_level)
    except Exception as exc:
        raise StudyError(f"reference level {problem.reference_level} failed: {exc}",
                         problem.reference_level) from exc
    ref_fields = {n: ref.volume_field(n) for n in "qpyz"}
    ref_u = ref.control_field()
    del ref

    levels, hs, errors, worst = [], [], {n: [] for n in "qpyzu"}, [ref_res]
    for level in problem.levels:
        try:
            sol, res = run(level)
        except Exception as exc:
            partial = ConvergenceReport(levels, hs, errors, problem.metadata())
            raise StudyError(f"level {level} failed: {exc}", level, partial) from exc
        worst.append(res)
        levels.append(level)
        hs.append(sol.mesh.h)
        for n in "qpyz":
            errors[n].append(l2_error_volume(sol.volume_field(n), ref_fields[n]))
        errors["u"].append(l2_error_boundary(sol.control_field(), ref_u))

    contaminated = [lv == levels[-1] for lv in levels]
    report = ConvergenceReport(levels, hs, errors, problem.metadata(), contaminated)
    report.max_residual = max(worst) if check_residuals else math.nan
    return report


# -- forward verification ----------------------------------------------------

@dataclass
class ForwardProblem:
    """Manufactured Poisson problem ``-lap y = f``, ``y = g`` on the boundary.

    ``qx, qy[, qz]`` are the components of ``q = -grad y``.
    """

    y: str = "sin(pi*x)*sin(pi*y)"
    f: str = "2*pi^2*sin(pi*x)*sin(pi*y)"
    q: tuple = ("-pi*cos(pi*x)*sin(pi*y)", "-pi*sin(pi*x)*cos(pi*y)")
    dim: int = 2
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)
    k: int = 1
    levels: list = field(default_factory=lambda: [2, 3, 4, 5])
    name: str = "forward"

    def __post_init__(self):
        if len(self.q) != self.dim:
            raise ConfigError("q needs one component per dimension")
        self.y_expr = Expression(self.y, self.dim)
        self.f_expr = Expression(self.f, self.dim)
        self.q_exprs = [Expression(c, self.dim) for c in self.q]

    def q_exact(self, x):
        return np.stack([c(x) for c in self.q_exprs], axis=-1)

    @classmethod
    def from_file(cls, path):
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise ConfigError(f"cannot read config {path}")
        try:
            sec = cp["forward"]
            dim = sec.getint("dim", 2)
            q = tuple(sec[f"q{c}"] for c in "xyz"[:dim])
            return cls(y=sec["y"], f=sec["f"], q=q, dim=dim,
                       lower=_floats(sec.get("lower", " ".join(["0"] * dim))),
                       upper=_floats(sec.get("upper", " ".join(["1"] * dim))),
                       k=sec.getint("k", 1), levels=_ints(sec.get("levels", "2 3 4 5")),
                       name=sec.get("name", "forward"))
        except KeyError as exc:
            raise ConfigError(f"missing config entry {exc}") from None


def run_forward_verification(problem=None, progress=None):
    """Errors of ``y`` and ``q`` against the manufactured solution per level."""
    problem = problem or ForwardProblem()
    space = SpaceConfig(problem.dim, problem.k)
    say = progress or log.info
    levels, hs, errors = [], [], {"q": [], "y": []}
    for level in problem.levels:
        mesh = build_box_mesh(problem.dim, problem.lower, problem.upper, level)
        try:
            sol = solve_forward(mesh, space, problem.f_expr, problem.y_expr)
        except Exception as exc:
            partial = ConvergenceReport(levels, hs, errors)
            raise StudyError(f"level {level} failed: {exc}", level, partial) from exc
        levels.append(level)
        hs.append(mesh.h)
        errors["q"].append(l2_error_volume(sol.volume_field("q"), problem.q_exact))
        errors["y"].append(l2_error_volume(sol.volume_field("y"), problem.y_expr))
        say(f"level {level}: {mesh.n_elements} elements, y error {errors['y'][-1]:.4e}")
    meta = {"name": problem.name, "y": problem.y, "k": problem.k, "version": __version__}
    return ConvergenceReport(levels, hs, errors, meta)
