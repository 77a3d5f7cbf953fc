"""Structured simplicial meshes of boxes.

A level-``L`` mesh splits the box into ``2**L`` cells per axis and every cell
into ``dim!`` Kuhn (Freudenthal) simplices sharing the main diagonal.  This
gives ``2 * 4**L`` triangles or ``6 * 8**L`` tetrahedra.  Kuhn
triangulations are nested under halving of the cell size, which is what
makes index-arithmetic point location between levels exact.
"""
from itertools import combinations, permutations
from math import factorial

import numpy as np

from .basis import AffineMap


class InvalidDomainError(ValueError):
    pass


class MeshTopologyError(ValueError):
    pass


class Mesh:
    """Conforming simplicial mesh with globally numbered faces.

    Attributes
    ----------
    dim : int
    vertices : (n_vertices, dim) float array
    elements : (n_elements, dim + 1) int array, positively oriented
    faces : (n_faces, dim) int array, vertex ids sorted ascending
    face_elements : (n_faces, 2) int array, owner first, -1 if boundary
    face_local : (n_faces, 2) int array, local face number in each neighbour
    element_faces : (n_elements, dim + 1) int array; local face ``i`` is
        opposite local vertex ``i``
    element_face_sign : (n_elements, dim + 1) +1 for the owner side, -1 else
    normals : (n_elements, dim + 1, dim) outward unit normals per local face
    face_diameter, element_diameter : float arrays
    h : float, maximum element diameter
    """

    def __init__(self, vertices, elements, lower=None, upper=None, level=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.elements = np.ascontiguousarray(elements, dtype=np.int64)
        self.dim = self.vertices.shape[1]
        self.lower = None if lower is None else np.asarray(lower, dtype=float)
        self.upper = None if upper is None else np.asarray(upper, dtype=float)
        self.level = level
        for a in (self.vertices, self.elements):
            a.setflags(write=False)
        self._build_faces()
        self._build_geometry()

    # -- construction -------------------------------------------------
    def _build_faces(self):
        d = self.dim
        ne = len(self.elements)
        local = np.array([[j for j in range(d + 1) if j != i] for i in range(d + 1)])
        fv = np.sort(self.elements[:, local], axis=2).reshape(ne * (d + 1), d)
        faces, first, inverse, counts = np.unique(
            fv, axis=0, return_index=True, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise MeshTopologyError(
                f"{np.count_nonzero(counts > 2)} face(s) shared by more than two elements")

        face_elements = -np.ones((len(faces), 2), dtype=np.int64)
        face_local = -np.ones((len(faces), 2), dtype=np.int64)
        face_elements[:, 0] = first // (d + 1)
        face_local[:, 0] = first % (d + 1)
        slot = np.arange(ne * (d + 1))
        second = slot != first[inverse]
        face_elements[inverse[second], 1] = slot[second] // (d + 1)
        face_local[inverse[second], 1] = slot[second] % (d + 1)

        self.faces = faces
        self.face_elements = face_elements
        self.face_local = face_local
        self.face_counts = counts
        self.element_faces = inverse.reshape(ne, d + 1)
        self.element_face_sign = np.where(second, -1, 1).reshape(ne, d + 1)
        self.boundary_faces = np.flatnonzero(counts == 1)
        self.interior_faces = np.flatnonzero(counts == 2)

    def _build_geometry(self):
        d = self.dim
        amap = AffineMap(self.vertices[self.elements])
        self.element_map = amap
        self.volumes = amap.volume(d)
        # outward normals from barycentric gradients: n_i ~ -grad(lambda_i)
        grad_lam = np.concatenate([-amap.inv.sum(axis=1, keepdims=True), amap.inv], axis=1)
        norms = np.linalg.norm(grad_lam, axis=2, keepdims=True)
        self.normals = -grad_lam / norms

        xv = self.vertices[self.elements]
        edges = [np.linalg.norm(xv[:, i] - xv[:, j], axis=1)
                 for i, j in combinations(range(d + 1), 2)]
        self.element_diameter = np.max(edges, axis=0)
        self.h = float(self.element_diameter.max())

        xf = self.vertices[self.faces]
        fedges = [np.linalg.norm(xf[:, i] - xf[:, j], axis=1)
                  for i, j in combinations(range(d), 2)]
        self.face_diameter = np.max(fedges, axis=0)
        self.face_map = AffineMap(xf)
        self.face_measure = self.face_map.measure_scale / factorial(d - 1)
        owner, loc = self.face_elements[:, 0], self.face_local[:, 0]
        self.face_normals = self.normals[owner, loc]

    # -- queries ------------------------------------------------------
    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def is_structured(self):
        return self.level is not None

    @property
    def cells_per_axis(self):
        return 2 ** self.level

    def face_vertex_coords(self):
        return self.vertices[self.faces]

    def locate(self, points):
        """Element index containing each point, by index arithmetic.

        Only valid for structured meshes from :func:`build_box_mesh`.  Points
        on element boundaries are assigned to one of the adjacent elements.
        """
        if not self.is_structured:
            raise MeshTopologyError("point location needs a structured box mesh")
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        n = self.cells_per_axis
        t = (pts - self.lower) / (self.upper - self.lower) * n
        cell = np.clip(np.floor(t).astype(np.int64), 0, n - 1)
        frac = t - cell
        order = np.argsort(-frac, axis=1, kind="stable")
        code = (order * (self.dim ** np.arange(self.dim))).sum(axis=1)
        perm_id = _perm_lookup(self.dim)[code]
        cell_id = np.ravel_multi_index(tuple(cell.T), (n,) * self.dim)
        return cell_id * factorial(self.dim) + perm_id

    def __repr__(self):
        return (f"Mesh(dim={self.dim}, elements={self.n_elements}, faces={self.n_faces}, "
                f"h={self.h:.4g})")


def _kuhn_paths(dim):
    return list(permutations(range(dim)))


def _perm_lookup(dim):
    table = -np.ones(dim ** dim, dtype=np.int64)
    for pid, perm in enumerate(_kuhn_paths(dim)):
        table[sum(p * dim ** j for j, p in enumerate(perm))] = pid
    return table


def build_box_mesh(dim, lower, upper, level):
    """Kuhn triangulation of the box ``[lower, upper]`` at refinement ``level``.

    Level 0 has ``dim!`` simplices; each level halves ``h``.
    """
    if dim not in (2, 3):
        raise InvalidDomainError(f"dim must be 2 or 3, got {dim}")
    lower = np.asarray(lower, dtype=float).reshape(-1)
    upper = np.asarray(upper, dtype=float).reshape(-1)
    if lower.shape != (dim,) or upper.shape != (dim,):
        raise InvalidDomainError("box corners must have length dim")
    if np.any(lower >= upper):
        raise InvalidDomainError(f"degenerate box {lower} .. {upper}")
    if level < 0:
        raise InvalidDomainError("level must be nonnegative")

    n = 2 ** level
    shape = (n + 1,) * dim
    grid = np.stack(np.meshgrid(*[np.arange(n + 1)] * dim, indexing="ij"), axis=-1)
    vertices = lower + (upper - lower) * grid.reshape(-1, dim) / n

    cells = np.stack(np.meshgrid(*[np.arange(n)] * dim, indexing="ij"), axis=-1).reshape(-1, dim)
    elems = []
    for perm in _kuhn_paths(dim):
        offs = np.zeros((dim + 1, dim), dtype=np.int64)
        for i, axis in enumerate(perm):
            offs[i + 1:, axis] += 1
        corner = cells[:, None, :] + offs[None]
        ids = np.ravel_multi_index(tuple(np.moveaxis(corner, -1, 0)), shape)
        if np.linalg.det(offs[1:] - offs[0]) < 0:
            ids[:, [-2, -1]] = ids[:, [-1, -2]]
        elems.append(ids)
    elements = np.stack(elems, axis=1).reshape(-1, dim + 1)
    return Mesh(vertices, elements, lower, upper, level)


def refine(mesh):
    """One uniform refinement of a structured box mesh (halves ``h``)."""
    if not mesh.is_structured:
        raise MeshTopologyError("refine needs a structured box mesh")
    return build_box_mesh(mesh.dim, mesh.lower, mesh.upper, mesh.level + 1)


def classify_faces(mesh):
    """Return ``(interior_faces, boundary_faces)`` index arrays."""
    if np.any(mesh.face_counts > 2) or np.any(mesh.face_counts < 1):
        raise MeshTopologyError("nonconforming mesh")
    return mesh.interior_faces, mesh.boundary_faces


def parent_elements(fine, coarse):
    """Coarse element containing each fine element of a nested pair."""
    if not (fine.is_structured and coarse.is_structured) or fine.level < coarse.level:
        raise MeshTopologyError("meshes are not a nested structured pair")
    if not (np.allclose(fine.lower, coarse.lower) and np.allclose(fine.upper, coarse.upper)):
        raise MeshTopologyError("meshes cover different boxes")
    centroids = fine.vertices[fine.elements].mean(axis=1)
    return coarse.locate(centroids)


def parent_faces(fine, coarse, faces=None):
    """Coarse face containing each given fine face (default: boundary faces).

    A fine face inside a coarse element interior has no parent face; -1 is
    returned for those.
    """
    faces = fine.boundary_faces if faces is None else np.asarray(faces)
    parents = parent_elements(fine, coarse)[fine.face_elements[faces, 0]]
    centroid = fine.vertices[fine.faces[faces]].mean(axis=1)
    # barycentric coordinates of the fine-face centroid in the parent element
    amap = coarse.element_map
    xi = np.einsum("nij,nj->ni", amap.inv[parents], centroid - amap.origin[parents])
    lam = np.hstack([1.0 - xi.sum(axis=1, keepdims=True), xi])
    tol = 1e-10
    on_face = np.abs(lam) < tol
    out = -np.ones(len(faces), dtype=np.int64)
    hit = on_face.any(axis=1)
    loc = np.argmax(on_face, axis=1)
    out[hit] = coarse.element_faces[parents[hit], loc[hit]]
    return out
