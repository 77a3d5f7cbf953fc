import numpy as np
import pytest

from conftest import random_data
from hdgcontrol.mesh import build_box_mesh
from hdgcontrol.quadrature import quadrature_rule
from hdgcontrol.solution import FIELDS, DiscreteField, TraceField, max_residual, recover, residuals
from hdgcontrol.space import SpaceConfig
from hdgcontrol.system import assemble_condensed, solve


@pytest.fixture(scope="module")
def solved():
    rng = np.random.default_rng(7)
    m = build_box_mesh(2, (0, 0), (1, 1), 2)
    sp = SpaceConfig(2, 1)
    f, y_d = random_data(rng, 2)
    return solve(m, sp, f, y_d, 0.7), f, y_d


def test_recover_zero(mesh2d):
    sp = SpaceConfig(2, 1)
    ts = assemble_condensed(mesh2d, sp, gamma=1.0)
    sol = recover(np.zeros(ts.dofmap.n_gamma), ts, mesh2d, sp)
    assert all(np.all(getattr(sol, n) == 0) for n in FIELDS)


def test_shapes_match_dofmap(solved):
    sol, _, _ = solved
    m, sp = sol.mesh, sol.space
    assert sol.q.shape == sol.p.shape == (m.n_elements, sp.n_flux)
    assert sol.y.shape == sol.z.shape == (m.n_elements, sp.n_scalar)
    assert sol.yhat.shape == (len(m.interior_faces), sp.n_trace)
    assert sol.u.shape == (len(m.boundary_faces), sp.n_trace)
    assert sol.trace_vector().size == (2 * len(m.interior_faces) + len(m.boundary_faces)) * sp.n_trace


def test_residuals_small(solved):
    sol, f, y_d = solved
    res = residuals(sol, f, y_d)
    assert set(res) == {"state_flux", "adjoint_flux", "state_local", "adjoint_local",
                        "flux_continuity", "optimality"}
    assert max_residual(res) <= 1e-10


def test_residuals_detect_perturbation(solved):
    sol, f, y_d = solved
    import copy
    bad = copy.copy(sol)
    bad.u = sol.u.copy()
    bad.u[0, 0] += 1e-3
    res = residuals(bad, f, y_d)
    assert res["optimality"] > 1e-6 and res["state_flux"] > 1e-6


def _trace_at(sol, faces, x):
    m = sol.mesh
    yhat = TraceField(m, sol.yhat, sol.space.k, m.interior_faces)
    out = np.empty(x.shape[:-1])
    bnd = np.isin(faces, m.boundary_faces)
    if bnd.any():
        out[bnd] = sol.control_field().evaluate_physical(faces[bnd], x[bnd])
    if (~bnd).any():
        out[~bnd] = yhat.evaluate_physical(faces[~bnd], x[~bnd])
    return out


def test_flux_equation_random_linear_test_functions(solved):
    # (q, r)_K - (y, div r)_K + <yhat, r.n>_dK = 0 for vector-valued linear r,
    # every term integrated here by plain quadrature on the fields
    sol, _, _ = solved
    m = sol.mesh
    rng = np.random.default_rng(3)
    qf, yf = sol.volume_field("q"), sol.volume_field("y")
    vol = quadrature_rule(2, 6)
    edge = quadrature_rule(1, 6)
    amap = m.element_map
    for _ in range(20):
        e = int(rng.integers(m.n_elements))
        c0, C = rng.normal(size=2), rng.normal(size=(2, 2))
        r = lambda x: c0 + x @ C.T  # noqa: E731
        xq = amap.points(vol.points)[e]
        wq = vol.weights * abs(amap.det[e])
        qv = qf.evaluate(np.array([e]), vol.points)[0]
        yv = yf.evaluate(np.array([e]), vol.points)[0]
        total = np.sum(wq * np.einsum("mc,mc->m", qv, r(xq))) - np.trace(C) * np.sum(wq * yv)
        scale = np.sum(wq * np.abs(np.einsum("mc,mc->m", qv, r(xq))))
        for fl in range(3):
            f = m.element_faces[e, fl]
            fv = m.vertices[m.faces[f]]
            xs = fv[0] + edge.points @ (fv[1:] - fv[0])
            ws = edge.weights * m.face_measure[f]
            yh = _trace_at(sol, np.array([f]), xs[None])[0]
            total += np.sum(ws * yh * (r(xs) @ m.normals[e, fl]))
        assert abs(total) <= 1e-10 * max(scale, 1.0)


def test_evaluate_physical_consistent(solved, rng):
    sol, _, _ = solved
    m = sol.mesh
    for name in ("q", "y"):
        fld = sol.volume_field(name)
        ref = rng.uniform(0, 0.5, size=(5, 2))
        els = np.arange(0, m.n_elements, 3)
        x = m.element_map.points(ref)[els]
        np.testing.assert_allclose(fld.evaluate_physical(els, x), fld.evaluate(els, ref), atol=1e-13)
    u = sol.control_field()
    s = np.array([[0.2], [0.7]])
    faces = m.boundary_faces[:4]
    fv = m.vertices[m.faces[faces]]
    x = fv[:, None, 0] + s[None] * (fv[:, None, 1] - fv[:, None, 0])
    np.testing.assert_allclose(u.evaluate_physical(faces, x), u.evaluate(faces, s), atol=1e-13)


def test_discrete_field_constant():
    m = build_box_mesh(3, (0, 0, 0), (1, 1, 1), 0)
    c = np.zeros((m.n_elements, 4))
    c[:, 0] = np.sqrt(6.0)  # orthonormal constant on the reference tetrahedron is sqrt(6)
    vals = DiscreteField(m, c, 1).evaluate(np.arange(m.n_elements), np.array([[0.1, 0.2, 0.3]]))
    np.testing.assert_allclose(vals, 6.0)
