"""Recovered HDG solutions, discrete fields and equation residuals."""
from dataclasses import dataclass, field

import numpy as np

from .basis import orthonormal_basis
from .local import element_blocks

FIELDS = ("q", "p", "y", "z", "yhat", "zhat", "u")


@dataclass
class HdgSolution:
    """Coefficients of the seven discrete fields.

    ``q, p`` have shape (n_elements, n_flux), ``y, z`` (n_elements,
    n_scalar), ``yhat, zhat`` (n_interior_faces, n_trace) and ``u``
    (n_boundary_faces, n_trace), all in the orthonormal modal bases.
    """

    mesh: object
    space: object
    gamma: float
    q: np.ndarray
    p: np.ndarray
    y: np.ndarray
    z: np.ndarray
    yhat: np.ndarray
    zhat: np.ndarray
    u: np.ndarray
    trace_residual: float = field(default=0.0)

    def fields(self):
        return {name: getattr(self, name) for name in FIELDS}

    def volume_field(self, name):
        kind = "flux" if name in ("q", "p") else "scalar"
        degree = self.space.k if kind == "flux" else self.space.k + 1
        return DiscreteField(self.mesh, getattr(self, name), degree, kind)

    def control_field(self):
        return TraceField(self.mesh, self.u, self.space.k, self.mesh.boundary_faces)

    def trace_vector(self):
        return np.concatenate([self.yhat.ravel(), self.zhat.ravel(), self.u.ravel()])


def recover(gamma_vec, system, mesh, space):
    """Element-by-element recovery of fluxes and scalars from the traces."""
    dm = system.dofmap
    nV, nW = space.n_flux, space.n_scalar
    ne = mesh.n_elements
    q, p = np.zeros((ne, nV)), np.zeros((ne, nV))
    y, z = np.zeros((ne, nW)), np.zeros((ne, nW))
    ext = np.append(gamma_vec, 0.0)  # index -1 reads the trailing zero
    for part in system.recovery:
        t = ext[dm.local_to_global[part.elements]]
        alpha = np.einsum("nij,nj->ni", part.G1, t) + part.alpha0
        beta = np.einsum("nij,nj->ni", part.G2, t) + part.beta0
        q[part.elements], p[part.elements] = alpha[:, :nV], alpha[:, nV:]
        y[part.elements], z[part.elements] = beta[:, :nW], beta[:, nW:]
    yhat, zhat, u = dm.split_traces(gamma_vec)
    return HdgSolution(mesh, space, system.gamma, q, p, y, z,
                       yhat.copy(), zhat.copy(), u.copy())


class DiscreteField:
    """Piecewise polynomial on a mesh: scalar (degree ``degree``) or flux."""

    def __init__(self, mesh, coeffs, degree, kind="scalar"):
        self.mesh = mesh
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.degree = degree
        self.kind = kind

    @property
    def value_shape(self):
        return (self.mesh.dim,) if self.kind == "flux" else ()

    def evaluate(self, elements, ref_points):
        """Values at reference points; ``ref_points`` is (m, d) or (n, m, d)."""
        d = self.mesh.dim
        basis = orthonormal_basis(d, self.degree)
        c = self.coeffs[elements]
        if ref_points.ndim == 2:
            phi = basis.eval(ref_points)  # (m, nb)
            if self.kind == "flux":
                return np.einsum("ncb,mb->nmc", c.reshape(len(c), d, -1), phi)
            return c @ phi.T
        n, m, _ = ref_points.shape
        phi = basis.eval(ref_points.reshape(-1, d)).reshape(n, m, -1)
        if self.kind == "flux":
            return np.einsum("ncb,nmb->nmc", c.reshape(n, d, -1), phi)
        return np.einsum("nb,nmb->nm", c, phi)

    def evaluate_physical(self, elements, x):
        """Values at physical points ``x`` (n, m, d) lying in ``elements``."""
        amap = self.mesh.element_map
        xi = np.einsum("nij,nmj->nmi", amap.inv[elements], x - amap.origin[elements][:, None, :])
        return self.evaluate(elements, xi)


class TraceField:
    """Face polynomials of degree ``degree`` on a subset of faces."""

    def __init__(self, mesh, coeffs, degree, faces):
        self.mesh = mesh
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.degree = degree
        self.faces = np.asarray(faces)
        self._pos = -np.ones(mesh.n_faces, dtype=np.int64)
        self._pos[self.faces] = np.arange(len(self.faces))

    def evaluate(self, faces, ref_points):
        basis = orthonormal_basis(self.mesh.dim - 1, self.degree)
        c = self.coeffs[self._pos[faces]]
        if ref_points.ndim == 2:
            return c @ basis.eval(ref_points).T
        n, m, dd = ref_points.shape
        psi = basis.eval(ref_points.reshape(-1, dd)).reshape(n, m, -1)
        return np.einsum("nb,nmb->nm", c, psi)

    def evaluate_physical(self, faces, x):
        fmap = self.mesh.face_map
        J = fmap.jac[faces]  # (n, d, d-1)
        rhs = np.einsum("nki,nmk->nmi", J, x - fmap.origin[faces][:, None, :])
        gram = np.einsum("nki,nkj->nij", J, J)
        s = np.linalg.solve(gram[:, None], rhs[..., None])[..., 0]
        return self.evaluate(faces, s)


def _local_traces(sol):
    """Per-element trace vectors ``(y-slots, z-slots)`` (zeros where inactive)."""
    mesh, nM = sol.mesh, sol.space.n_trace
    ne = mesh.n_elements
    ef = mesh.element_faces
    ipos = np.full(mesh.n_faces, -1)
    ipos[mesh.interior_faces] = np.arange(len(mesh.interior_faces))
    bpos = np.full(mesh.n_faces, -1)
    bpos[mesh.boundary_faces] = np.arange(len(mesh.boundary_faces))
    yh = np.vstack([sol.yhat, np.zeros((1, nM))])
    zh = np.vstack([sol.zhat, np.zeros((1, nM))])
    uu = np.vstack([sol.u, np.zeros((1, nM))])
    is_b = bpos[ef] >= 0
    ys = np.where(is_b[..., None], uu[bpos[ef]], yh[ipos[ef]]).reshape(ne, -1)
    zs = np.where(is_b[..., None], 0.0, zh[ipos[ef]]).reshape(ne, -1)
    return ys, zs


def _rel(res, *terms):
    num = np.linalg.norm(res)
    den = sum(np.linalg.norm(t) for t in terms)
    return float(num / den) if den > 0 else float(num)


def residuals(sol, f=None, y_d=None, blocks=None):
    """Relative residuals of the discrete equations for a recovered solution.

    Returns a dict with keys ``state_flux``, ``adjoint_flux``, ``state_local``,
    ``adjoint_local``, ``flux_continuity`` (interior faces, state and
    adjoint), and ``optimality`` (boundary faces).  Each value is
    ``||residual|| / sum of ||terms||``.
    """
    mesh, space = sol.mesh, sol.space
    if blocks is None:
        blocks = element_blocks(mesh, space, f, y_d)
    nM = space.n_trace
    ys, zs = _local_traces(sol)
    bslot = blocks.boundary_slots(nM)
    mv = lambda A, x: np.einsum("nij,nj->ni", A, x)  # noqa: E731
    mtv = lambda A, x: np.einsum("nji,nj->ni", A, x)  # noqa: E731

    out = {}
    t1, t2, t3 = mv(blocks.a1, sol.q), -mv(blocks.a2, sol.y), mv(blocks.a3, ys)
    out["state_flux"] = _rel(t1 + t2 + t3, t1, t2, t3)
    t1, t2, t3 = mv(blocks.a1, sol.p), -mv(blocks.a2, sol.z), mv(blocks.a3, zs)
    out["adjoint_flux"] = _rel(t1 + t2 + t3, t1, t2, t3)
    t1, t2, t3 = mtv(blocks.a2, sol.q), mv(blocks.a5, sol.y), -mv(blocks.a7, ys)
    out["state_local"] = _rel(t1 + t2 + t3 - blocks.b1, t1, t2, t3, blocks.b1)
    t1, t2, t3, t4 = mtv(blocks.a2, sol.p), -mv(blocks.a4, sol.y), mv(blocks.a5, sol.z), -mv(blocks.a7, zs)
    out["adjoint_local"] = _rel(t1 + t2 + t3 + t4 + blocks.b2, t1, t2, t3, t4, blocks.b2)

    # numerical flux tested against traces, per element side
    qn = mtv(blocks.a3, sol.q) + mtv(blocks.a7, sol.y) - mv(blocks.a6, ys)
    pn = mtv(blocks.a3, sol.p) + mtv(blocks.a7, sol.z)
    pn_int = pn - mv(blocks.a6, zs)
    ne = mesh.n_elements
    nF = mesh.dim + 1
    faces = mesh.element_faces

    def face_sum(vals):
        acc = np.zeros((mesh.n_faces, nM))
        np.add.at(acc, faces.ravel(), vals.reshape(ne * nF, nM))
        return acc

    inter = mesh.interior_faces
    qn_i = np.where(bslot, 0.0, qn)
    pn_i = np.where(bslot, 0.0, pn_int)
    r_cont = np.concatenate([face_sum(qn_i)[inter].ravel(), face_sum(pn_i)[inter].ravel()])
    terms = [mtv(blocks.a3, sol.q), mtv(blocks.a7, sol.y), mv(blocks.a6, ys),
             mtv(blocks.a3, sol.p), mtv(blocks.a7, sol.z), mv(blocks.a6, zs)]
    out["flux_continuity"] = _rel(r_cont, *[np.where(bslot, 0.0, t) for t in terms])

    # <u + (p.n + tau P_M z)/gamma, mu> on boundary faces
    mu_u = mv(blocks.face_mass, ys)
    opt_terms = [np.where(bslot, mu_u, 0.0), np.where(bslot, pn / sol.gamma, 0.0)]
    out["optimality"] = _rel(opt_terms[0] + opt_terms[1], *opt_terms)
    return out


def max_residual(res):
    return max(res.values())
