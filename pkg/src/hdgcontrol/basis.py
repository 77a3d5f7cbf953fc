"""Polynomial bases on reference simplices, affine maps and L2 projections.

The modal basis is orthonormal on the reference simplex and hierarchical:
the first ``num_polys(j, dim)`` functions of any degree-``p`` basis span
``P_j`` for every ``j <= p``.  Under an affine map the element mass matrix is
therefore ``|det J| * I``.
"""
from functools import lru_cache
from itertools import product
from math import comb

import numpy as np
from numpy.polynomial import legendre

from .quadrature import quadrature_rule, reference_vertices


class DegenerateElementError(ValueError):
    """Raised for elements with zero or negative Jacobian determinant."""


def num_polys(degree, dim):
    """Dimension of P_degree in ``dim`` variables."""
    if degree < 0:
        return 0
    return comb(degree + dim, dim)


def _multi_indices(degree, dim):
    idx = [a for a in product(range(degree + 1), repeat=dim) if sum(a) <= degree]
    # graded ordering keeps the basis hierarchical
    return sorted(idx, key=lambda a: (sum(a), tuple(-x for x in a)))


class OrthonormalBasis:
    """Orthonormal basis of P_degree on the reference ``dim``-simplex."""

    def __init__(self, dim, degree):
        self.dim = dim
        self.degree = degree
        self.indices = np.array(_multi_indices(degree, dim), dtype=int).reshape(-1, dim)
        self.size = len(self.indices)
        rule = quadrature_rule(dim, max(2 * degree, 1))
        coeffs = np.eye(self.size)
        # two Cholesky passes: the second one mops up rounding from the first
        for _ in range(2):
            v = self._raw(rule.points) @ coeffs.T
            gram = (v * rule.weights[:, None]).T @ v
            chol = np.linalg.cholesky(gram)
            coeffs = np.linalg.solve(chol, coeffs)
        self._coeffs = coeffs

    def _legendre_tables(self, points, deriv):
        # table[i][a] = P_a(2 x_i - 1) or its x-derivative
        s = 2.0 * np.asarray(points, dtype=float) - 1.0
        out = np.empty((self.dim, self.degree + 1, s.shape[0]))
        for a in range(self.degree + 1):
            c = np.zeros(a + 1)
            c[a] = 1.0
            if deriv:
                c = 2.0 * legendre.legder(c) if a > 0 else np.zeros(1)
            for i in range(self.dim):
                out[i, a] = legendre.legval(s[:, i], c)
        return out

    def _raw(self, points):
        tab = self._legendre_tables(points, False)
        vals = np.ones((len(points), self.size))
        for i in range(self.dim):
            vals *= tab[i, self.indices[:, i]].T
        return vals

    def _raw_grad(self, points):
        tab = self._legendre_tables(points, False)
        dtab = self._legendre_tables(points, True)
        grads = np.ones((len(points), self.size, self.dim))
        for j in range(self.dim):
            for i in range(self.dim):
                t = dtab if i == j else tab
                grads[:, :, j] *= t[i, self.indices[:, i]].T
        return grads

    def eval(self, points):
        """Values, shape (n_points, size)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self._raw(points) @ self._coeffs.T

    def grad(self, points):
        """Reference gradients, shape (n_points, size, dim)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.einsum("pjd,ij->pid", self._raw_grad(points), self._coeffs)


@lru_cache(maxsize=None)
def orthonormal_basis(dim, degree):
    return OrthonormalBasis(dim, degree)


def lattice_points(dim, degree):
    """Equispaced nodes of degree ``degree``; the simplex vertices come first."""
    verts = reference_vertices(dim)
    if degree == 0:
        return verts.mean(axis=0, keepdims=True)
    pts = [np.array(a, dtype=float) / degree for a in product(range(degree + 1), repeat=dim)
           if sum(a) <= degree]
    pts = np.array(pts)
    is_vertex = np.array([np.any(np.all(np.isclose(p, verts), axis=1)) for p in pts])
    return np.vstack([verts, pts[~is_vertex]])


@lru_cache(maxsize=None)
def _lagrange_coeffs(dim, degree):
    basis = orthonormal_basis(dim, degree)
    return np.linalg.inv(basis.eval(lattice_points(dim, degree)))


def scalar_basis_eval(degree, points, dim=None, nodal=False, gradients=False):
    """Evaluate a degree-``degree`` scalar basis at reference points.

    Parameters
    ----------
    degree : int
    points : array_like, shape (n, dim)
    nodal : bool
        Use the Lagrange basis on equispaced nodes instead of the modal
        orthonormal one.
    gradients : bool
        Also return reference gradients, shape (n, size, dim).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim = points.shape[1] if dim is None else dim
    basis = orthonormal_basis(dim, degree)
    vals = basis.eval(points)
    grads = basis.grad(points) if gradients else None
    if nodal:
        c = _lagrange_coeffs(dim, degree)
        vals = vals @ c
        if gradients:
            grads = np.einsum("pid,ij->pjd", grads, c)
    return (vals, grads) if gradients else vals


class AffineMap:
    """Batched affine maps ``x = x0 + J xi`` of simplices.

    ``vertices`` has shape (n, d + 1, d) for volume elements.  For faces
    (shape (n, d, d)) only ``points`` and ``measure_scale`` are meaningful.
    """

    def __init__(self, vertices, check=True):
        v = np.asarray(vertices, dtype=float)
        if v.ndim == 2:
            v = v[None]
        self.vertices = v
        self.origin = v[:, 0, :]
        self.jac = np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))
        if self.jac.shape[1] == self.jac.shape[2]:
            self.det = np.linalg.det(self.jac)
            if check and np.any(self.det <= 0):
                bad = np.flatnonzero(self.det <= 0)
                raise DegenerateElementError(
                    f"nonpositive Jacobian determinant on element(s) {bad[:10].tolist()}")
            self.inv = np.linalg.inv(self.jac)
            self.measure_scale = np.abs(self.det)
        else:
            gram = np.einsum("nki,nkj->nij", self.jac, self.jac)
            self.det = None
            self.inv = None
            self.measure_scale = np.sqrt(np.linalg.det(gram)) if gram.shape[1] else np.ones(len(v))

    def points(self, ref_points):
        """Physical images of reference points, shape (n, n_points, d)."""
        return self.origin[:, None, :] + np.einsum("nij,pj->npi", self.jac, ref_points)

    def pull_back(self, x):
        """Reference coordinates of physical points ``x`` of shape (n, m, d)."""
        return np.einsum("nij,nmj->nmi", self.inv, x - self.origin[:, None, :])

    def gradients(self, ref_grads):
        """Map reference gradients (p, b, d) to physical ones (n, p, b, d)."""
        return np.einsum("nji,pbj->npbi", self.inv, ref_grads)

    def volume(self, dim):
        from math import factorial
        return self.measure_scale / factorial(dim)


def push_forward(vertices, ref_points):
    """Affine images of ``ref_points`` plus Jacobians.

    Returns
    -------
    points : (n, p, d) physical points
    jac : (n, d, d)
    det : (n,)
    inv_t : (n, d, d) inverse transpose, maps reference to physical gradients
    """
    amap = AffineMap(vertices)
    return amap.points(ref_points), amap.jac, amap.det, np.transpose(amap.inv, (0, 2, 1))


def l2_project_volume(f, vertices, degree, order=None):
    """Coefficients of the L2 projection of ``f`` onto P_degree per element.

    ``f`` maps physical points of shape (..., d) to values of shape (...).
    Returns an array of shape (n_elements, num_polys(degree, d)) in the
    orthonormal modal basis.
    """
    amap = AffineMap(vertices)
    dim = amap.jac.shape[1]
    order = 2 * degree + 2 if order is None else order
    rule = quadrature_rule(dim, order)
    phi = orthonormal_basis(dim, degree).eval(rule.points)
    vals = f(amap.points(rule.points))
    # the modal mass matrix is |det J| I, so the |det J| factors cancel
    return np.einsum("np,p,pi->ni", vals, rule.weights, phi)


def l2_project_face(g, face_vertices, degree, order=None):
    """Coefficients of the face L2 projection P_M onto P_degree(face).

    ``face_vertices`` has shape (n_faces, d, d); the face basis is the
    orthonormal basis of the reference (d-1)-simplex pulled through the
    affine parametrization given by the vertex order.
    """
    fv = np.asarray(face_vertices, dtype=float)
    if fv.ndim == 2:
        fv = fv[None]
    fdim = fv.shape[1] - 1
    amap = AffineMap(fv)
    order = 2 * degree + 2 if order is None else order
    rule = quadrature_rule(fdim, order)
    psi = orthonormal_basis(fdim, degree).eval(rule.points) if fdim else np.ones((1, 1))
    vals = g(amap.points(rule.points))
    return np.einsum("np,p,pi->ni", vals, rule.weights, psi)
