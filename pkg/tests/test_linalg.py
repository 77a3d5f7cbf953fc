import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from hdgcontrol import linalg


def spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(np.geomspace(1, cond, n)) @ q.T


def test_cholesky_identity_and_scalar(rng):
    B = rng.normal(size=(4, 3))
    np.testing.assert_array_equal(linalg.cholesky_solve(np.eye(4), B), B)
    assert linalg.cholesky_solve(np.array([[4.0]]), np.array([2.0]))[0] == 0.5


def test_cholesky_vs_lu(rng):
    A = spd(rng, 12, 1e4)
    B = rng.normal(size=(12, 5))
    X = linalg.cholesky_solve(A, B)
    np.testing.assert_allclose(X, linalg.lu_solve(A, B), rtol=1e-11, atol=1e-11 * np.abs(X).max())
    assert np.linalg.norm(A @ X - B) <= 1e-11 * np.linalg.norm(A) * np.linalg.norm(X)


def test_cholesky_batched(rng):
    A = np.stack([spd(rng, 5) for _ in range(7)])
    b = rng.normal(size=(7, 5))
    x = linalg.cholesky_solve(A, b)
    np.testing.assert_allclose(np.einsum("nij,nj->ni", A, x), b, atol=1e-12)


def test_not_spd(rng):
    A = spd(rng, 4)
    A[2, 2] = -5.0
    with pytest.raises(linalg.NotSPDError):
        linalg.cholesky_factor(A)
    with pytest.raises(linalg.NotSPDError, match="symmetric"):
        linalg.cholesky_factor(A + np.triu(np.ones((4, 4)), 1))
    batch = np.stack([np.eye(3), -np.eye(3), np.eye(3)])
    with pytest.raises(linalg.NotSPDError) as exc:
        linalg.cholesky_factor(batch)
    assert exc.value.index == (1,)


def test_lu_permutation_and_singular():
    P = np.eye(4)[[2, 0, 3, 1]]
    b = np.arange(4.0)
    np.testing.assert_array_equal(linalg.lu_solve(P, b), P.T @ b)
    S = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(linalg.SingularMatrixError) as exc:
        linalg.lu_solve(S, np.ones(2))
    assert exc.value.pivot is not None


def test_coo_to_csr_canonical():
    rows = [2, 0, 0, 1, 2, 0]
    cols = [1, 2, 0, 1, 1, 2]
    vals = [1.0, 2.0, 3.0, 1e-310, 4.0, 5.0]
    A = linalg.coo_to_csr(rows, cols, vals, (3, 3))
    assert A.has_canonical_format
    for i in range(3):
        idx = A.indices[A.indptr[i]:A.indptr[i + 1]]
        assert np.all(np.diff(idx) > 0)
    assert A[1, 1] == 0 and A.nnz == 3
    assert A[0, 2] == 7.0 and A[2, 1] == 5.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), st.floats(-10, 10)), min_size=1, max_size=40))
def test_coo_to_csr_matches_dense(triplets):
    r, c, v = zip(*triplets)
    A = linalg.coo_to_csr(r, c, v, (6, 6))
    D = np.zeros((6, 6))
    np.add.at(D, (np.array(r), np.array(c)), np.array(v))
    D[np.abs(D) < linalg.DROP_TOL] = 0
    np.testing.assert_allclose(A.toarray(), D, atol=1e-12)


def _sparse_system(rng, n=200):
    A = sp.random(n, n, density=0.02, random_state=np.random.RandomState(1)) + 4 * sp.eye(n)
    return A.tocsr(), rng.normal(size=n)


def test_sparse_lu_residual(rng):
    A, b = _sparse_system(rng)
    x, res = linalg.solve(linalg.sparse_lu(A), b)
    assert res <= 1e-10
    # reported residual recomputed independently
    assert abs(res - linalg.relative_residual(A, x, b)) <= 1e-13
    # iterative-refinement oracle: a further correction step changes nothing
    dx = linalg.lu_solve(A.toarray(), b - A @ x)
    assert np.linalg.norm(dx) <= 1e-12 * np.linalg.norm(x)


def test_sparse_identity_and_symmetric(rng):
    I = sp.eye(10, format="csr")
    b = rng.normal(size=10)
    np.testing.assert_allclose(linalg.sparse_lu(I).solve(b)[0], b)
    S = sp.csr_matrix(spd(rng, 30))
    x, res = linalg.SparseLU(S, symmetric=True).solve(b.repeat(3))
    assert res < 1e-12


def test_sparse_singular_and_backend():
    S = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(linalg.SingularMatrixError):
        linalg.sparse_lu(S)
    with pytest.raises(ValueError, match="backend"):
        linalg.sparse_lu(sp.eye(2), backend="nope")
    f = linalg.sparse_lu(sp.csr_matrix((0, 0)))
    assert f.solve(np.zeros(0))[0].shape == (0,)


def test_matrix_market_round_trip(tmp_path, rng):
    A, _ = _sparse_system(rng, 30)
    linalg.write_matrix_market(tmp_path / "A.mtx", A)
    B = linalg.read_matrix_market(tmp_path / "A.mtx")
    assert sp.issparse(B) and (abs(A - B)).max() == 0
    D = rng.normal(size=(3, 2))
    linalg.write_matrix_market(tmp_path / "D.mtx", D)
    np.testing.assert_array_equal(linalg.read_matrix_market(tmp_path / "D.mtx"), D)
