"""Global numbering, condensed trace system and the monolithic oracle."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import linalg
from .local import condense, condense_forward, element_blocks
from .mesh import classify_faces

CHUNK = 4096
MONOLITHIC_LIMIT = 10_000


@dataclass
class DofMap:
    """Global unknown layout.

    Traces are ordered ``[yhat (interior faces); zhat (interior faces);
    u (boundary faces)]``, face-major with local basis index minor.
    Interior unknowns of the monolithic system are
    ``[q; p; y; z]``, element-major within each field.
    """

    n_elements: int
    n_flux: int
    n_scalar: int
    n_trace: int
    interior_faces: np.ndarray
    boundary_faces: np.ndarray
    face_interior_pos: np.ndarray  # (n_faces,) position among interior faces or -1
    face_boundary_pos: np.ndarray  # (n_faces,) position among boundary faces or -1
    local_to_global: np.ndarray  # (ne, 2 nT) trace slot -> trace dof, -1 if inactive

    @property
    def dim(self):
        return self.local_to_global.shape[1] // (2 * self.n_trace) - 1

    @property
    def n_interior_faces(self):
        return len(self.interior_faces)

    @property
    def n_boundary_faces(self):
        return len(self.boundary_faces)

    @property
    def yhat_offset(self):
        return 0

    @property
    def zhat_offset(self):
        return self.n_interior_faces * self.n_trace

    @property
    def u_offset(self):
        return 2 * self.n_interior_faces * self.n_trace

    @property
    def n_gamma(self):
        return (2 * self.n_interior_faces + self.n_boundary_faces) * self.n_trace

    @property
    def n_interior_unknowns(self):
        return 2 * self.n_elements * (self.n_flux + self.n_scalar)

    def split_traces(self, gamma_vec):
        nM = self.n_trace
        yhat = gamma_vec[:self.zhat_offset].reshape(-1, nM)
        zhat = gamma_vec[self.zhat_offset:self.u_offset].reshape(-1, nM)
        u = gamma_vec[self.u_offset:].reshape(-1, nM)
        return yhat, zhat, u


def build_dofmap(mesh, space):
    interior, boundary = classify_faces(mesh)
    nM = space.n_trace
    nF = mesh.dim + 1
    ipos = -np.ones(mesh.n_faces, dtype=np.int64)
    ipos[interior] = np.arange(len(interior))
    bpos = -np.ones(mesh.n_faces, dtype=np.int64)
    bpos[boundary] = np.arange(len(boundary))

    ef = mesh.element_faces
    basis_idx = np.arange(nM)
    n_int = len(interior)
    is_bdy = bpos[ef] >= 0  # (ne, nF)
    y_first = np.where(is_bdy, 2 * n_int * nM + bpos[ef] * nM, ipos[ef] * nM)
    z_first = np.where(is_bdy, -1, n_int * nM + ipos[ef] * nM)
    y_slots = (y_first[..., None] + basis_idx).reshape(mesh.n_elements, nF * nM)
    z_slots = np.where(is_bdy[..., None], -1, z_first[..., None] + basis_idx)
    z_slots = z_slots.reshape(mesh.n_elements, nF * nM)
    l2g = np.concatenate([y_slots, z_slots], axis=1)
    return DofMap(mesh.n_elements, space.n_flux, space.n_scalar, nM, interior, boundary,
                  ipos, bpos, l2g)


def _scatter(rows, cols, vals):
    """COO triplets from element blocks, skipping inactive (-1) indices."""
    r = np.broadcast_to(rows[:, :, None], vals.shape)
    c = np.broadcast_to(cols[:, None, :], vals.shape)
    keep = (r >= 0) & (c >= 0)
    return r[keep], c[keep], vals[keep]


@dataclass
class _Recovery:
    elements: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    alpha0: np.ndarray
    beta0: np.ndarray


@dataclass
class TraceSystem:
    """Condensed global system ``K gamma = F`` and per-element recovery data."""

    K: object
    F: np.ndarray
    dofmap: DofMap
    gamma: float
    recovery: list = field(repr=False, default_factory=list)

    @property
    def nnz(self):
        return self.K.nnz


def assemble_condensed(mesh, space, f=None, y_d=None, gamma=1.0, chunk=CHUNK):
    """Assemble the condensed trace system element chunk by element chunk.

    The control rows are scaled by ``gamma``; this changes ``K`` but not the
    solution.  The monolithic matrix is never formed.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    dm = build_dofmap(mesh, space)
    rows, cols, vals = [], [], []
    F = np.zeros(dm.n_gamma)
    recovery = []
    for start in range(0, mesh.n_elements, chunk):
        sel = np.arange(start, min(start + chunk, mesh.n_elements))
        blocks = element_blocks(mesh, space, f, y_d, elements=sel)
        try:
            ce = condense(blocks, gamma, space.n_trace)
        except linalg.NotSPDError as exc:
            bad = None if exc.index is None else int(sel[exc.index[0]])
            raise linalg.NotSPDError(f"local solver breakdown on element {bad}", index=bad) from None
        l2g = dm.local_to_global[sel]
        r, c, v = _scatter(l2g, l2g, ce.K)
        rows.append(r)
        cols.append(c)
        vals.append(v)
        active = l2g >= 0
        np.add.at(F, l2g[active], ce.F[active])
        alpha0 = np.einsum("nij,nj->ni", ce.H1, ce.load)
        beta0 = np.einsum("nij,nj->ni", ce.H2, ce.load)
        recovery.append(_Recovery(sel, ce.G1, ce.G2, alpha0, beta0))
    K = linalg.coo_to_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                          (dm.n_gamma, dm.n_gamma))
    return TraceSystem(K, F, dm, gamma, recovery)


class BlockTraceSolver:
    """Solve ``K gamma = F`` by eliminating the interior traces.

    With traces ordered ``[yhat; zhat; u]`` the matrix has the pattern::

        [Kyy  0    Kyu]
        [Kzy  Kzz  Kzu]
        [Kuy  Kuz  Kuu]

    ``Kyy`` and ``Kzz`` are the same symmetric Poisson trace operator, so a
    single sparse LU serves both state and adjoint solves.  The remaining
    control Schur complement (boundary faces only) is solved by GMRES with a
    face-block Jacobi preconditioner.  Far less fill than factoring ``K``.
    """

    def __init__(self, system, rtol=1e-14, maxiter=500):
        dm = system.dofmap
        K = system.K.tocsr()
        ny, nu = dm.zhat_offset, dm.n_boundary_faces * dm.n_trace
        y, z, u = slice(0, ny), slice(ny, 2 * ny), slice(2 * ny, 2 * ny + nu)
        self.K, self.ny, self.nu = K, ny, nu
        self.Kzy, self.Kyu, self.Kzu = K[z, y], K[y, u], K[z, u]
        self.Kuy, self.Kuz, self.Kuu = K[u, y], K[u, z], K[u, u]
        Kyy, Kzz = K[y, y], K[z, z]
        self.fy = linalg.SparseLU(Kyy, symmetric=True)
        same = ny == 0 or abs(Kyy - Kzz).max() <= 1e-13 * abs(Kyy).max()
        self.fz = self.fy if same else linalg.SparseLU(Kzz, symmetric=True)
        self.rtol, self.maxiter = rtol, maxiter
        self.iterations = 0

        nM = dm.n_trace
        blocks = np.stack([self.Kuu[i:i + nM, i:i + nM].toarray() for i in range(0, nu, nM)]) \
            if nu else np.zeros((0, nM, nM))
        self._jacobi = np.linalg.inv(blocks) if nu else blocks
        self._nM = nM

    def _interior(self, cy, cz):
        a = self.fy.apply_inverse(cy)
        b = self.fz.apply_inverse(cz - self.Kzy @ a)
        return a, b

    def _schur(self, v):
        a, b = self._interior(self.Kyu @ v, self.Kzu @ v)
        return self.Kuu @ v - self.Kuy @ a - self.Kuz @ b

    def _precond(self, v):
        return np.einsum("nij,nj->ni", self._jacobi, v.reshape(-1, self._nM)).ravel()

    def _apply(self, F):
        ny = self.ny
        fy, fz, fu = F[:ny], F[ny:2 * ny], F[2 * ny:]
        a0, b0 = self._interior(fy, fz)
        rhs = fu - self.Kuy @ a0 - self.Kuz @ b0
        if self.nu and np.linalg.norm(rhs) > 0:
            op = spla.LinearOperator((self.nu, self.nu), matvec=self._schur)
            pc = spla.LinearOperator((self.nu, self.nu), matvec=self._precond)
            count = [0]
            uvec, info = spla.gmres(op, rhs, rtol=self.rtol, atol=0.0, restart=200,
                                    maxiter=self.maxiter, M=pc,
                                    callback=lambda _: count.__setitem__(0, count[0] + 1),
                                    callback_type="pr_norm")
            self.iterations += count[0]
        else:
            uvec = np.zeros(self.nu)
        a, b = self._interior(fy - self.Kyu @ uvec, fz - self.Kzu @ uvec)
        return np.concatenate([a, b, uvec])

    def solve(self, F, refine=1):
        F = np.asarray(F, dtype=float)
        x = self._apply(F)
        for _ in range(refine):
            x += self._apply(F - self.K @ x)
        return x, linalg.relative_residual(self.K, x, F)


# beyond these sizes "auto" switches from factoring K to the block solver
DIRECT_LIMIT = {2: 250_000, 3: 30_000}


def solve_trace_system(system, backend="auto"):
    """Return ``(gamma_vec, relative_residual)``.

    ``backend`` is ``"block"``, ``"auto"`` or any key of
    :data:`linalg.SPARSE_BACKENDS` (direct factorization of ``K``).
    """
    if backend == "auto":
        dm = system.dofmap
        backend = "superlu" if dm.n_gamma <= DIRECT_LIMIT[dm.dim] else "block"
    if backend == "block":
        return BlockTraceSolver(system).solve(system.F)
    factor = linalg.sparse_lu(system.K, backend=backend)
    return factor.solve(system.F)


def solve(mesh, space, f=None, y_d=None, gamma=1.0, backend="auto"):
    """Solve the discrete optimality system by static condensation."""
    from .solution import recover

    system = assemble_condensed(mesh, space, f, y_d, gamma)
    gvec, res = solve_trace_system(system, backend)
    sol = recover(gvec, system, mesh, space)
    sol.trace_residual = res
    return sol


@dataclass
class MonolithicSystem:
    A: object
    b: np.ndarray
    dofmap: DofMap
    offsets: dict


def assemble_monolithic(mesh, space, f=None, y_d=None, gamma=1.0, limit=MONOLITHIC_LIMIT):
    """Full seven-field sparse system, for verification only.

    Block rows, in order: flux equations for ``q`` and ``p``, scalar
    equations for ``y`` and ``z``, flux continuity on interior faces for
    ``yhat`` and ``zhat``, and the unscaled optimality condition for ``u``::

        [ A1   0  -A2   0   A3o  0   A3b ] [q ]   [  0 ]
        [ 0   A1   0  -A2   0   A3o  0   ] [p ]   [  0 ]
        [A2^T  0   A5   0  -A7o  0  -A7b ] [y ]   [ b1 ]
        [ 0  A2^T -A4  A5   0  -A7o  0   ] [z ] = [-b2 ]
        [A3o^T 0 A7o^T  0  -A6o  0   0   ] [yh]   [  0 ]
        [ 0 A3o^T  0 A7o^T  0  -A6o  0   ] [zh]   [  0 ]
        [ 0 A3b^T/g 0 A7b^T/g 0  0   Mb  ] [u ]   [  0 ]
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    dm = build_dofmap(mesh, space)
    ne, nV, nW = mesh.n_elements, space.n_flux, space.n_scalar
    n_total = dm.n_interior_unknowns + dm.n_gamma
    if n_total > limit:
        raise ValueError(f"monolithic oracle refused: {n_total} unknowns exceed limit {limit}")
    blocks = element_blocks(mesh, space, f, y_d)

    off = {"q": 0, "p": ne * nV, "y": 2 * ne * nV, "z": 2 * ne * nV + ne * nW}
    off["trace"] = 2 * ne * (nV + nW)
    e = np.arange(ne)
    q = off["q"] + e[:, None] * nV + np.arange(nV)
    p = off["p"] + e[:, None] * nV + np.arange(nV)
    y = off["y"] + e[:, None] * nW + np.arange(nW)
    z = off["z"] + e[:, None] * nW + np.arange(nW)
    nT = space.n_trace_local
    l2g = dm.local_to_global
    ys = off["trace"] + l2g[:, :nT]
    zs = np.where(l2g[:, nT:] >= 0, off["trace"] + l2g[:, nT:], -1)
    bslot = blocks.boundary_slots(space.n_trace)
    yo = np.where(bslot, -1, ys)  # yhat slots only
    ub = np.where(bslot, ys, -1)  # control slots only

    a2t = np.swapaxes(blocks.a2, 1, 2)
    a3t = np.swapaxes(blocks.a3, 1, 2)
    a7t = np.swapaxes(blocks.a7, 1, 2)
    entries = [
        (q, q, blocks.a1), (q, y, -blocks.a2), (q, ys, blocks.a3),
        (p, p, blocks.a1), (p, z, -blocks.a2), (p, zs, blocks.a3),
        (y, q, a2t), (y, y, blocks.a5), (y, ys, -blocks.a7),
        (z, p, a2t), (z, y, -blocks.a4), (z, z, blocks.a5), (z, zs, -blocks.a7),
        (yo, q, a3t), (yo, y, a7t), (yo, yo, -blocks.a6),
        (zs, p, a3t), (zs, z, a7t), (zs, zs, -blocks.a6),
        (ub, p, a3t / gamma), (ub, z, a7t / gamma), (ub, ub, blocks.face_mass),
    ]
    rows, cols, vals = zip(*(_scatter(r, c, v) for r, c, v in entries))
    A = linalg.coo_to_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                          (n_total, n_total))
    b = np.zeros(n_total)
    b[y.ravel()] = blocks.b1.ravel()
    b[z.ravel()] = -blocks.b2.ravel()
    return MonolithicSystem(A, b, dm, off)


def solve_monolithic(mesh, space, f=None, y_d=None, gamma=1.0):
    """Solve the monolithic oracle system; returns an ``HdgSolution``."""
    from .solution import HdgSolution

    ms = assemble_monolithic(mesh, space, f, y_d, gamma)
    x, res = linalg.sparse_lu(ms.A).solve(ms.b)
    ne, nV, nW = mesh.n_elements, space.n_flux, space.n_scalar
    o = ms.offsets
    yhat, zhat, u = ms.dofmap.split_traces(x[o["trace"]:])
    sol = HdgSolution(mesh, space, gamma,
                      q=x[o["q"]:o["p"]].reshape(ne, nV), p=x[o["p"]:o["y"]].reshape(ne, nV),
                      y=x[o["y"]:o["z"]].reshape(ne, nW), z=x[o["z"]:o["trace"]].reshape(ne, nW),
                      yhat=yhat.copy(), zhat=zhat.copy(), u=u.copy())
    sol.trace_residual = res
    return sol


@dataclass
class ForwardSolution:
    """Solution of the state equation alone (manufactured-solution checks)."""

    mesh: object
    space: object
    q: np.ndarray
    y: np.ndarray
    yhat: np.ndarray  # interior faces
    u: np.ndarray  # prescribed boundary traces
    residual: float = 0.0

    def volume_field(self, name):
        from .solution import DiscreteField

        if name == "q":
            return DiscreteField(self.mesh, self.q, self.space.k, "flux")
        if name == "y":
            return DiscreteField(self.mesh, self.y, self.space.k + 1)
        raise KeyError(name)


def solve_forward(mesh, space, f, g, chunk=CHUNK):
    """HDG solve of ``-lap y = f`` with ``y = g`` on the boundary.

    The Dirichlet data enter as ``P_M g`` on boundary faces.
    """
    from .basis import l2_project_face

    dm = build_dofmap(mesh, space)
    nM, nT = space.n_trace, space.n_trace_local
    n_int = dm.n_interior_faces
    u = l2_project_face(g, mesh.vertices[mesh.faces[dm.boundary_faces]], space.k,
                        order=space.quad_order)

    rows, cols, vals = [], [], []
    F = np.zeros(n_int * nM)
    parts = []
    for start in range(0, mesh.n_elements, chunk):
        sel = np.arange(start, min(start + chunk, mesh.n_elements))
        blocks = element_blocks(mesh, space, f, None, elements=sel)
        cf = condense_forward(blocks)
        ef = mesh.element_faces[sel]
        ipos = dm.face_interior_pos[ef]
        bpos = dm.face_boundary_pos[ef]
        slots = np.where(ipos >= 0, ipos * nM, -1)[..., None] + np.arange(nM)
        slots = np.where((ipos >= 0)[..., None], slots, -1).reshape(len(sel), nT)
        t_known = np.where((bpos >= 0)[..., None], u[np.maximum(bpos, 0)], 0.0).reshape(len(sel), nT)
        r, c, v = _scatter(slots, slots, cf.K)
        rows.append(r)
        cols.append(c)
        vals.append(v)
        rhs = cf.F - np.einsum("nij,nj->ni", cf.K, t_known)
        active = slots >= 0
        np.add.at(F, slots[active], rhs[active])
        parts.append((sel, cf, slots, t_known))
    K = linalg.coo_to_csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                          (len(F), len(F)))
    yhat_vec, res = linalg.SparseLU(K, symmetric=True).solve(F)
    yhat = yhat_vec.reshape(-1, nM)
    q = np.zeros((mesh.n_elements, space.n_flux))
    y = np.zeros((mesh.n_elements, space.n_scalar))
    for sel, cf, slots, t_known in parts:
        t = np.where(slots >= 0, yhat_vec[np.maximum(slots, 0)], t_known)
        q[sel], y[sel] = cf.interior(t)
    return ForwardSolution(mesh, space, q, y, yhat, u, res)
