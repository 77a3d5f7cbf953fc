import math

import numpy as np
import pytest

from hdgcontrol.errors import cost_functional
from hdgcontrol.study import (ConfigError, ForwardProblem, ProblemData, StudyError, run_forward_verification,
                              run_study, table1_problem, table2_problem)
from hdgcontrol.space import SpaceConfig
from hdgcontrol.system import solve

INI = """
[problem]
dim = 2
lower = 0, 0
upper = 1, 1
gamma = 0.5
y_d = x*y
[discretization]
levels = 1, 2
reference_level = 3
"""


def test_config_parsing():
    p = ProblemData.from_string(INI)
    assert p.levels == [1, 2] and p.reference_level == 3 and p.gamma == 0.5 and p.k == 1
    assert p.data()[0] is None and p.data()[1] is not None


@pytest.mark.parametrize("bad,match", [
    (INI.replace("gamma = 0.5", "gamma = 0"), "gamma"),
    (INI.replace("reference_level = 3", "reference_level = 2"), "reference"),
    (INI.replace("dim = 2", "dim = 4"), "dim"),
    (INI.replace("y_d = x*y", "y_d = import os"), "parse"),
    (INI.replace("levels = 1, 2\n", ""), "levels"),
])
def test_config_errors(bad, match):
    with pytest.raises(ValueError, match=match):
        ProblemData.from_string(bad)


def test_presets_match_configs():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for name, preset in (("table1", table1_problem), ("table2", table2_problem)):
        a, b = ProblemData.from_file(root / f"{name}.ini"), preset()
        assert a.metadata() == b.metadata() and a.levels == b.levels
    with pytest.raises(ConfigError):
        ProblemData.from_file(root / "missing.ini")


def test_zero_data_study():
    p = ProblemData(2, (0, 0), (1, 1), 1.0, levels=[0, 1], reference_level=2)
    r = run_study(p)
    for k in "qpyzu":
        assert r.errors[k] == [0.0, 0.0]
        assert all(math.isnan(o) for o in r.orders[k])
    assert r.contaminated == [False, True]


def test_small_study_orders_positive():
    p = ProblemData.from_string(INI)
    r = run_study(p)
    assert r.max_residual <= 1e-10
    assert all(r.orders[k][-1] > 0.5 for k in "qpyzu")
    assert r.levels == [1, 2] and r.hs[0] == pytest.approx(2 * r.hs[1])


def test_gamma_sensitivity_and_cost():
    # larger gamma penalizes the control: its norm shrinks and J grows
    p = ProblemData.from_string(INI)
    m = p.mesh(2)
    f, y_d = p.data()
    costs, norms = [], []
    for g in (0.1, 1.0, 10.0):
        sol = solve(m, SpaceConfig(2, 1), f, y_d, g)
        norms.append(np.linalg.norm(sol.u))
        costs.append(cost_functional(sol.volume_field("y"), sol.control_field(), y_d, g))
    assert norms[0] > norms[1] > norms[2]
    assert costs[0] < costs[1] < costs[2]


def test_forward_exact_quadratic():
    fp = ForwardProblem(y="x^2 - y^2 + x*y", f="0", q=("-(2*x + y)", "-(x - 2*y)"), levels=[1, 2])
    r = run_forward_verification(fp)
    assert max(r.errors["y"] + r.errors["q"]) <= 1e-11


def test_forward_config_requires_q(tmp_path):
    path = tmp_path / "f.ini"
    path.write_text("[forward]\ny = x\nf = 0\nqx = -1\n")
    with pytest.raises(ConfigError):
        ForwardProblem.from_file(path)


def test_study_error_carries_partial(monkeypatch):
    import hdgcontrol.study as study
    p = ProblemData(2, (0, 0), (1, 1), 1.0, y_d="x", levels=[0, 1], reference_level=2)
    real = study.solve

    def flaky(mesh, *a, **kw):
        if mesh.level == 1:
            raise RuntimeError("boom")
        return real(mesh, *a, **kw)

    monkeypatch.setattr(study, "solve", flaky)
    with pytest.raises(StudyError) as exc:
        run_study(p)
    assert exc.value.level == 1 and exc.value.partial.levels == [0]
