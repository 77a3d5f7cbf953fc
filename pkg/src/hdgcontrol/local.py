"""Element-local HDG matrices and static condensation.

All arrays are batched over elements.  Local trace slots are laid out face by
face (local face ``i`` is opposite local vertex ``i``), ``n_trace`` modal
coefficients per face, in the face's global parametrization (its vertices in
ascending global order), so neighbouring elements see identical trace bases.

Scalar basis functions are the orthonormal modal basis of degree ``k + 1``;
flux basis functions are ``e_c * theta_a`` with ``theta`` the degree-``k``
prefix of the same hierarchical basis, ordered component-major.
"""
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .basis import orthonormal_basis
from .quadrature import quadrature_rule, reference_vertices


@dataclass
class LocalBlocks:
    """Element matrices for a batch of elements.

    Shapes use ``nV`` flux, ``nW`` scalar and ``nT`` local trace unknowns.

    a1 : (ne, nV, nV)  (phi_j, phi_i)
    a2 : (ne, nV, nW)  (w_j, div phi_i)
    a3 : (ne, nV, nT)  <mu_j, phi_i . n>
    a4 : (ne, nW, nW)  (w_j, w_i)
    a5 : (ne, nW, nW)  <tau P_M w_j, P_M w_i>
    a6 : (ne, nT, nT)  <tau mu_j, mu_i>
    a7 : (ne, nW, nT)  <tau mu_j, w_i>
    grad_w : (ne, nW, nV)  (phi_j, grad w_i)
    flux_trace : (ne, nW, nV)  <phi_j . n, w_i>
    face_mass : (ne, nT, nT)  <mu_j, mu_i>, unweighted
    boundary : (ne, nF) bool, local face lies on the domain boundary
    b1, b2 : (ne, nW) loads (f, w_i) and (y_d, w_i)
    """

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray
    a5: np.ndarray
    a6: np.ndarray
    a7: np.ndarray
    grad_w: np.ndarray
    flux_trace: np.ndarray
    face_mass: np.ndarray
    boundary: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    tau: np.ndarray = field(default=None)

    @property
    def n_elements(self):
        return self.a1.shape[0]

    def boundary_slots(self, n_trace):
        """(ne, nT) mask of local trace slots on boundary faces."""
        return np.repeat(self.boundary, n_trace, axis=1)


def _face_keys(mesh):
    """Local vertex position of each face vertex, and a compact key."""
    d = mesh.dim
    fverts = mesh.faces[mesh.element_faces]  # (ne, nF, d)
    eq = fverts[..., None] == mesh.elements[:, None, None, :]
    pos = np.argmax(eq, axis=-1)  # (ne, nF, d)
    key = (pos * (d + 1) ** np.arange(d)).sum(axis=-1)
    return pos, key


def _zero(x):
    return np.zeros(x.shape[:-1])


def stabilization(mesh, space):
    """Penalty ``tau`` per (element, local face)."""
    if space.stabilization == "global":
        return np.full(mesh.element_faces.shape, 1.0 / mesh.h)
    return 1.0 / mesh.face_diameter[mesh.element_faces]


def element_blocks(mesh, space, f=None, y_d=None, quad_order=None, elements=None):
    """Assemble :class:`LocalBlocks` for ``elements`` (default: all).

    ``f`` and ``y_d`` map physical points (..., dim) to values (...); ``None``
    means zero.
    """
    d, k = space.dim, space.k
    if mesh.dim != d:
        raise ValueError("mesh and space dimensions differ")
    order = space.quad_order if quad_order is None else quad_order
    sel = np.arange(mesh.n_elements) if elements is None else np.asarray(elements)
    ne, nF = len(sel), d + 1
    nK, nW, nM = space.n_flux_scalar, space.n_scalar, space.n_trace
    nV, nT = space.n_flux, nF * nM

    amap = mesh.element_map
    det = amap.measure_scale[sel]
    inv = amap.inv[sel]  # (ne, d, d), grad_x = inv^T grad_xi

    basis = orthonormal_basis(d, k + 1)
    vrule = quadrature_rule(d, order)
    w_ref = basis.eval(vrule.points)  # (P, nW)
    g_ref = basis.grad(vrule.points)  # (P, nW, d)
    th_ref = w_ref[:, :nK]
    wq = vrule.weights

    mass_w = np.einsum("p,pi,pj->ij", wq, w_ref, w_ref)
    a4 = det[:, None, None] * mass_w
    mass_th = mass_w[:nK, :nK]
    a1 = np.zeros((ne, nV, nV))
    for c in range(d):
        a1[:, c * nK:(c + 1) * nK, c * nK:(c + 1) * nK] = det[:, None, None] * mass_th

    # R[m, i, j] = int d_m w_i * w_j on the reference element
    R = np.einsum("p,pim,pj->mij", wq, g_ref, w_ref)
    # physical d_c w_i = sum_m inv[m, c] d_m w_i
    grad_mass = det[:, None, None, None] * np.einsum("nmc,mij->ncij", inv, R)  # (ne, d, nW, nW)
    a2 = np.zeros((ne, nV, nW))
    grad_w = np.zeros((ne, nW, nV))
    for c in range(d):
        a2[:, c * nK:(c + 1) * nK, :] = grad_mass[:, c, :nK, :]
        grad_w[:, :, c * nK:(c + 1) * nK] = grad_mass[:, c, :, :nK]

    # face integrals, grouped by how the face parametrization sits in the element
    frule = quadrature_rule(d - 1, order)
    psi = orthonormal_basis(d - 1, k).eval(frule.points)  # (Q, nM)
    lam = frule.barycentric  # (Q, d)
    mass_psi = np.einsum("q,qa,qb->ab", frule.weights, psi, psi)
    pos, key = _face_keys(mesh)
    pos, key = pos[sel], key[sel]
    refv = reference_vertices(d)
    E_ref, S_ref = {}, {}
    for kk in np.unique(key):
        e0, f0 = np.argwhere(key == kk)[0]
        xi = lam @ refv[pos[e0, f0]]  # (Q, d)
        wf = basis.eval(xi)
        E_ref[kk] = np.einsum("q,qi,qa->ia", frule.weights, wf, psi)
        S_ref[kk] = np.einsum("q,qi,qj->ij", frule.weights, wf, wf)
    keys = np.array(sorted(E_ref))
    kidx = np.searchsorted(keys, key)
    E_tab = np.stack([E_ref[kk] for kk in keys])
    S_tab = np.stack([S_ref[kk] for kk in keys])

    gfaces = mesh.element_faces[sel]
    scale = mesh.face_map.measure_scale[gfaces]  # (ne, nF)
    E = scale[..., None, None] * E_tab[kidx]  # (ne, nF, nW, nM)
    S = scale[..., None, None] * S_tab[kidx]  # (ne, nF, nW, nW)
    Mf = scale[..., None, None] * mass_psi  # (ne, nF, nM, nM)
    normals = mesh.normals[sel]  # (ne, nF, d)
    tau = stabilization(mesh, space)[sel]

    Mf_inv = np.linalg.inv(Mf)
    a5 = np.einsum("nf,nfia,nfab,nfjb->nij", tau, E, Mf_inv, E)
    a3 = np.zeros((ne, nV, nT))
    a7 = np.zeros((ne, nW, nT))
    a6 = np.zeros((ne, nT, nT))
    face_mass = np.zeros((ne, nT, nT))
    flux_trace = np.zeros((ne, nW, nV))
    for fl in range(nF):
        cols = slice(fl * nM, (fl + 1) * nM)
        for c in range(d):
            rows = slice(c * nK, (c + 1) * nK)
            a3[:, rows, cols] = normals[:, fl, c, None, None] * E[:, fl, :nK, :]
            flux_trace[:, :, rows] += normals[:, fl, c, None, None] * S[:, fl, :, :nK]
        a7[:, :, cols] = tau[:, fl, None, None] * E[:, fl]
        a6[:, cols, cols] = tau[:, fl, None, None] * Mf[:, fl]
        face_mass[:, cols, cols] = Mf[:, fl]

    x = amap.points(vrule.points)[sel]
    fx = _zero(x) if f is None else np.broadcast_to(f(x), x.shape[:-1])
    yx = _zero(x) if y_d is None else np.broadcast_to(y_d(x), x.shape[:-1])
    b1 = det[:, None] * np.einsum("np,p,pi->ni", fx, wq, w_ref)
    b2 = det[:, None] * np.einsum("np,p,pi->ni", yx, wq, w_ref)

    boundary = mesh.face_counts[gfaces] == 1
    return LocalBlocks(a1, a2, a3, a4, a5, a6, a7, grad_w, flux_trace, face_mass,
                       boundary, b1, b2, tau)


@dataclass
class CondensedElement:
    """Element restrictions of the local solver ``[a; b] = [G1 H1; G2 H2][t; load]``.

    ``a = [q; p]``, ``b = [y; z]`` and ``t = [y-trace slots; z-trace slots]``
    where on boundary faces the y-trace slot carries the control ``u`` and
    the z-trace slot is inactive.  ``load = [b1; -b2]``.
    """

    G1: np.ndarray  # (ne, 2nV, 2nT)
    G2: np.ndarray  # (ne, 2nW, 2nT)
    H1: np.ndarray  # (ne, 2nV, 2nW)
    H2: np.ndarray  # (ne, 2nW, 2nW)
    K: np.ndarray  # (ne, 2nT, 2nT) element contribution to the trace system
    F: np.ndarray  # (ne, 2nT)
    load: np.ndarray  # (ne, 2nW)

    def interior(self, t):
        """Recover ``(alpha, beta)`` from local trace vectors ``t`` (ne, 2nT)."""
        alpha = np.einsum("nij,nj->ni", self.G1, t) + np.einsum("nij,nj->ni", self.H1, self.load)
        beta = np.einsum("nij,nj->ni", self.G2, t) + np.einsum("nij,nj->ni", self.H2, self.load)
        return alpha, beta


def _blockdiag2(A, B):
    n, r1, c1 = A.shape
    _, r2, c2 = B.shape
    out = np.zeros((n, r1 + r2, c1 + c2))
    out[:, :r1, :c1] = A
    out[:, r1:, c1:] = B
    return out


def interior_system(blocks, n_trace):
    """Element blocks ``B1..B5`` of the first two block rows.

    ``B1 a + B2 b + B3 t = 0`` and ``-B2^T a + B4 b + B5 t = load``.
    """
    bslot = blocks.boundary_slots(n_trace)
    a3z = np.where(bslot[:, None, :], 0.0, blocks.a3)
    a7z = np.where(bslot[:, None, :], 0.0, blocks.a7)
    ne, nW = blocks.a4.shape[:2]
    B1 = _blockdiag2(blocks.a1, blocks.a1)
    B2 = _blockdiag2(-blocks.a2, -blocks.a2)
    B3 = _blockdiag2(blocks.a3, a3z)
    B4 = _blockdiag2(blocks.a5, blocks.a5)
    B4[:, nW:, :nW] = -blocks.a4
    B5 = _blockdiag2(-blocks.a7, -a7z)
    return B1, B2, B3, B4, B5


def trace_rows(blocks, n_trace, gamma):
    """Element blocks ``B6, B7, B8`` of the trace equations.

    Rows follow the local trace slots: interior-face y-slots hold the
    flux-continuity equation for the state, interior-face z-slots the one
    for the adjoint, and boundary-face y-slots the optimality condition
    multiplied by ``gamma``.  Boundary z-slot rows are zero.
    """
    bslot = blocks.boundary_slots(n_trace)
    ne, nV, nT = blocks.a3.shape
    nW = blocks.a4.shape[1]
    a3t = np.swapaxes(blocks.a3, 1, 2)
    a7t = np.swapaxes(blocks.a7, 1, 2)
    ib = bslot[:, :, None]
    B6 = np.zeros((ne, 2 * nT, 2 * nV))
    B7 = np.zeros((ne, 2 * nT, 2 * nW))
    B8 = np.zeros((ne, 2 * nT, 2 * nT))
    # y-slot rows: state continuity (interior) or optimality (boundary)
    B6[:, :nT, :nV] = np.where(ib, 0.0, a3t)
    B6[:, :nT, nV:] = np.where(ib, a3t, 0.0)
    B7[:, :nT, :nW] = np.where(ib, 0.0, a7t)
    B7[:, :nT, nW:] = np.where(ib, a7t, 0.0)
    both = bslot[:, :, None] & bslot[:, None, :]
    B8[:, :nT, :nT] = np.where(both, gamma * blocks.face_mass, -blocks.a6)
    # z-slot rows: adjoint continuity on interior faces
    B6[:, nT:, nV:] = np.where(ib, 0.0, a3t)
    B7[:, nT:, nW:] = np.where(ib, 0.0, a7t)
    inter = ~bslot[:, :, None] & ~bslot[:, None, :]
    B8[:, nT:, nT:] = np.where(inter, -blocks.a6, 0.0)
    return B6, B7, B8


def condense(blocks, gamma, n_trace):
    """Static condensation of one batch of elements.

    Uses the block lower-triangular structure of
    ``B4 + B2^T B1^{-1} B2 = [[C1, 0], [-A4, C2]]`` whose inverse is
    ``[[C1^{-1}, 0], [C2^{-1} A4 C1^{-1}, C2^{-1}]]`` with ``C1, C2`` SPD.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    B1, B2, B3, B4, B5 = interior_system(blocks, n_trace)
    nV = blocks.a1.shape[1]
    nW = blocks.a4.shape[1]

    L1 = linalg.cholesky_factor(blocks.a1)
    # B1 is block diagonal with two copies of A1
    def b1_solve(X):
        top = linalg.cholesky_solve(None, X[:, :nV], factor=L1)
        bot = linalg.cholesky_solve(None, X[:, nV:], factor=L1)
        return np.concatenate([top, bot], axis=1)

    B2t = np.swapaxes(B2, 1, 2)
    B1iB2 = b1_solve(B2)
    B1iB3 = b1_solve(B3)
    S = B4 + B2t @ B1iB2
    C1 = S[:, :nW, :nW]
    C2 = S[:, nW:, nW:]
    try:
        L_c1 = linalg.cholesky_factor(0.5 * (C1 + np.swapaxes(C1, 1, 2)), check_symmetry=False)
        L_c2 = linalg.cholesky_factor(0.5 * (C2 + np.swapaxes(C2, 1, 2)), check_symmetry=False)
    except linalg.NotSPDError as exc:
        raise linalg.NotSPDError(f"local solver breakdown on element {exc.index}",
                                 index=exc.index) from None
    eye = np.broadcast_to(np.eye(nW), C1.shape)
    C1i = linalg.cholesky_solve(None, eye, factor=L_c1)
    C2i = linalg.cholesky_solve(None, eye, factor=L_c2)
    H2 = np.zeros_like(S)
    H2[:, :nW, :nW] = C1i
    H2[:, nW:, nW:] = C2i
    H2[:, nW:, :nW] = C2i @ blocks.a4 @ C1i

    R = B5 + B2t @ B1iB3
    G2 = -H2 @ R
    H1 = -B1iB2 @ H2
    G1 = B1iB2 @ H2 @ R - B1iB3

    B6, B7, B8 = trace_rows(blocks, n_trace, gamma)
    load = np.concatenate([blocks.b1, -blocks.b2], axis=1)
    K = B6 @ G1 + B7 @ G2 + B8
    F = -np.einsum("nij,nj->ni", B6 @ H1 + B7 @ H2, load)
    return CondensedElement(G1, G2, H1, H2, K, F, load)


@dataclass
class CondensedForward:
    """Local solver of the state equation alone: ``[q; y] = G t + H b1``."""

    G_q: np.ndarray
    G_y: np.ndarray
    H_q: np.ndarray
    H_y: np.ndarray
    K: np.ndarray  # (ne, nT, nT)
    F: np.ndarray  # (ne, nT)
    load: np.ndarray

    def interior(self, t):
        q = np.einsum("nij,nj->ni", self.G_q, t) + np.einsum("nij,nj->ni", self.H_q, self.load)
        y = np.einsum("nij,nj->ni", self.G_y, t) + np.einsum("nij,nj->ni", self.H_y, self.load)
        return q, y


def condense_forward(blocks):
    """Condense the Poisson problem with Dirichlet traces on every face.

    Trace rows are the flux-continuity equations ``A3^T q + A7^T y - A6 t``.
    """
    L1 = linalg.cholesky_factor(blocks.a1)
    X = linalg.cholesky_solve(None, blocks.a2, factor=L1)  # A1^{-1} A2
    Y = linalg.cholesky_solve(None, blocks.a3, factor=L1)  # A1^{-1} A3
    a2t = np.swapaxes(blocks.a2, 1, 2)
    C = blocks.a5 + a2t @ X
    Lc = linalg.cholesky_factor(0.5 * (C + np.swapaxes(C, 1, 2)), check_symmetry=False)
    nW = C.shape[1]
    Ci = linalg.cholesky_solve(None, np.broadcast_to(np.eye(nW), C.shape), factor=Lc)
    # y = C^{-1} (b1 + (A7 + A2^T A1^{-1} A3) t),  q = A1^{-1}(A2 y - A3 t)
    G_y = Ci @ (blocks.a7 + a2t @ Y)
    H_y = Ci
    G_q = X @ G_y - Y
    H_q = X @ H_y
    a3t = np.swapaxes(blocks.a3, 1, 2)
    a7t = np.swapaxes(blocks.a7, 1, 2)
    K = a3t @ G_q + a7t @ G_y - blocks.a6
    F = -np.einsum("nij,nj->ni", a3t @ H_q + a7t @ H_y, blocks.b1)
    return CondensedForward(G_q, G_y, H_q, H_y, K, F, blocks.b1)


def apply_hdg_operator(mesh, space, blocks, q, y, yhat, r, w, mu):
    """Evaluate the HDG bilinear form summed over all elements.

    ``q, r`` are flux coefficients (ne, nV); ``y, w`` scalar coefficients
    (ne, nW); ``yhat, mu`` trace coefficients per global face
    (n_faces, nM).  Boundary-face trace values are ignored, as the form only
    uses traces on interior faces.  Each term is evaluated in the form it is
    defined, without integrating by parts.
    """
    nM = space.n_trace
    ne = mesh.n_elements
    arrays = [np.asarray(a, dtype=float) for a in (q, y, yhat, r, w, mu)]
    q, y, yhat, r, w, mu = arrays
    if q.shape != (ne, space.n_flux) or r.shape != q.shape:
        raise ValueError("flux arguments do not match the flux space")
    if y.shape != (ne, space.n_scalar) or w.shape != y.shape:
        raise ValueError("scalar arguments do not match the scalar space")
    if yhat.shape != (mesh.n_faces, nM) or mu.shape != yhat.shape:
        raise ValueError("trace arguments do not match the trace space")

    bslot = blocks.boundary_slots(nM)
    yh_loc = np.where(bslot, 0.0, yhat[mesh.element_faces].reshape(ne, -1))
    mu_loc = np.where(bslot, 0.0, mu[mesh.element_faces].reshape(ne, -1))

    def bil(A, left, right):
        return np.einsum("ni,nij,nj->", left, A, right)

    val = bil(blocks.a1, r, q) - bil(blocks.a2, r, y) + bil(blocks.a3, r, yh_loc)
    val += -bil(blocks.grad_w, w, q) + bil(blocks.flux_trace, w, q) + bil(blocks.a5, w, y)
    val -= bil(blocks.a7, w, yh_loc)
    # -<q.n + tau (P_M y - yhat), mu> on interior faces
    a3t = np.swapaxes(blocks.a3, 1, 2)
    a7t = np.swapaxes(blocks.a7, 1, 2)
    val -= bil(a3t, mu_loc, q) + bil(a7t, mu_loc, y) - bil(blocks.a6, mu_loc, yh_loc)
    return float(val)
