"""Dense and sparse linear algebra kernels.

Dense kernels work on single matrices or stacks ``(..., n, n)``.  Sparse
direct solves go through SuperLU (``scipy.sparse.linalg.splu``); other
backends can be registered in :data:`SPARSE_BACKENDS`.
"""
import warnings

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

PIVOT_TOL = 1e-13
DROP_TOL = 1e-300


class NotSPDError(np.linalg.LinAlgError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


def _first_failure(A):
    for idx in np.ndindex(A.shape[:-2]):
        try:
            np.linalg.cholesky(A[idx])
        except np.linalg.LinAlgError:
            return idx
    return None


def cholesky_factor(A, check_symmetry=True):
    """Lower Cholesky factor of one SPD matrix or a stack of them."""
    A = np.asarray(A, dtype=float)
    if check_symmetry:
        asym = np.abs(A - np.swapaxes(A, -1, -2)).max(initial=0.0)
        if asym > 1e-12 * max(np.abs(A).max(initial=0.0), 1e-300):
            raise NotSPDError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        idx = _first_failure(A)
        raise NotSPDError(f"nonpositive pivot in Cholesky factorization (block {idx})",
                          index=idx) from None


def cholesky_solve(A, B, factor=None):
    """Solve ``A X = B`` for SPD ``A`` via Cholesky.

    ``B`` may be a vector or matrix (or stacks matching ``A``).
    """
    L = cholesky_factor(A) if factor is None else factor
    B = np.asarray(B, dtype=float)
    vec = B.ndim == L.ndim - 1
    if vec:
        B = B[..., None]
    Y = np.linalg.solve(L, B)
    X = np.linalg.solve(np.swapaxes(L, -1, -2), Y)
    return X[..., 0] if vec else X


def lu_solve(A, B):
    """Solve ``A X = B`` by LU with partial pivoting.

    Raises :class:`SingularMatrixError` if a pivot falls below
    ``PIVOT_TOL`` relative to the largest pivot.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim > 2:
        return np.linalg.solve(A, B)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)  # reported below instead
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    d = np.abs(np.diag(lu))
    if d.size and d.min() <= PIVOT_TOL * d.max():
        raise SingularMatrixError(f"matrix is numerically singular at pivot {int(d.argmin())}",
                                  pivot=int(d.argmin()))
    return scipy.linalg.lu_solve((lu, piv), B)


def relative_residual(A, x, b):
    """``||A x - b|| / (||A|| ||x|| + ||b||)`` with Frobenius/2-norms."""
    r = A @ x - b
    if sp.issparse(A):
        anorm = spla.norm(A)
    else:
        anorm = np.linalg.norm(A)
    denom = anorm * np.linalg.norm(x) + np.linalg.norm(b)
    return float(np.linalg.norm(r) / denom) if denom > 0 else float(np.linalg.norm(r))


def coo_to_csr(rows, cols, vals, shape):
    """Accumulate coordinate triplets into canonical CSR.

    Duplicates are summed in input order, column indices are sorted, and
    entries below ``DROP_TOL`` in magnitude are removed.
    """
    A = sp.coo_matrix((np.asarray(vals, dtype=float).ravel(),
                       (np.asarray(rows).ravel(), np.asarray(cols).ravel())), shape=shape).tocsr()
    A.sum_duplicates()
    A.data[np.abs(A.data) < DROP_TOL] = 0.0
    A.eliminate_zeros()
    A.sort_indices()
    return A


class SparseLU:
    """Factorization of a sparse square matrix.

    ``symmetric=True`` orders on the pattern of ``A + A^T`` and prefers
    diagonal pivots, which keeps fill low for symmetric definite blocks.
    """

    def __init__(self, A, permc_spec=None, symmetric=False):
        self.A = sp.csc_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError("matrix must be square")
        self._lu = None
        if self.A.shape[0] == 0:
            return
        if symmetric:
            kw = dict(permc_spec=permc_spec or "MMD_AT_PLUS_A", diag_pivot_thresh=1e-3,
                      options=dict(SymmetricMode=True))
        else:
            kw = dict(permc_spec=permc_spec or "COLAMD")
        try:
            self._lu = spla.splu(self.A, **kw)
        except RuntimeError as exc:
            raise SingularMatrixError(f"sparse LU failed: {exc}") from None
        d = np.abs(self._lu.U.diagonal())
        if d.size and d.min() <= PIVOT_TOL * d.max():
            raise SingularMatrixError(
                f"matrix is numerically singular at pivot {int(d.argmin())}", pivot=int(d.argmin()))

    @property
    def fill(self):
        return 0 if self._lu is None else self._lu.L.nnz + self._lu.U.nnz

    def apply_inverse(self, b):
        """Plain triangular solves, no residual bookkeeping."""
        if self.A.shape[0] == 0:
            return np.array(b, dtype=float)
        return self._lu.solve(np.asarray(b, dtype=float))

    def solve(self, b, refine=1):
        """Return ``(x, relative_residual)``; ``refine`` steps of iterative refinement."""
        b = np.asarray(b, dtype=float)
        if self.A.shape[0] == 0:
            return b.copy(), 0.0
        x = self._lu.solve(b)
        for _ in range(refine):
            x += self._lu.solve(b - self.A @ x)
        return x, relative_residual(self.A, x, b)


SPARSE_BACKENDS = {"superlu": SparseLU}


def sparse_lu(A, backend="superlu"):
    """Factor a sparse matrix with a registered backend."""
    try:
        factory = SPARSE_BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown sparse backend {backend!r}") from None
    return factory(A)


def solve(factor, b):
    return factor.solve(b)


def write_matrix_market(path, A, comment=""):
    """Write a dense array or sparse matrix in Matrix-Market format."""
    A = np.atleast_2d(A) if not sp.issparse(A) else sp.coo_matrix(A)
    scipy.io.mmwrite(str(path), A, comment=comment)


def read_matrix_market(path):
    """Read a Matrix-Market file; sparse files come back as CSR."""
    A = scipy.io.mmread(str(path))
    return A.tocsr() if sp.issparse(A) else np.asarray(A)
