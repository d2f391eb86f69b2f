import numpy as np
import pytest
import scipy.sparse as sp

from ibstokes.errors import IndexOutOfRange, SolverBreakdown
from ibstokes.solver import SaddleOperator, finalize, residual_norm, solve_symmetric_indefinite


def test_duplicates_summed():
    M = finalize([0, 0], [0, 0], [1.0, 2.0], (1, 1))
    assert M.nnz == 1 and M[0, 0] == 3.0


def test_identity_triplets():
    n = 6
    M = finalize(range(n), range(n), np.ones(n), (n, n))
    x = np.arange(n, dtype=float)
    assert np.array_equal(M @ x, x)


def test_random_triplets_match_dense(rng):
    n = 50
    rows = rng.integers(0, n, 600)
    cols = rng.integers(0, n, 600)
    vals = rng.standard_normal(600)
    dense = np.zeros((n, n))
    for r, c, v in zip(rows, cols, vals):
        dense[r, c] += v
    M = finalize(rows, cols, vals, (n, n))
    x = rng.standard_normal(n)
    assert np.allclose(M @ x, dense @ x, atol=1e-13, rtol=0)
    assert M.has_canonical_format
    for i in range(n):
        idx = M.indices[M.indptr[i]:M.indptr[i + 1]]
        assert np.all(np.diff(idx) > 0)


def test_explicit_zeros_dropped():
    M = finalize([0, 0, 1], [1, 1, 0], [1.0, -1.0, 2.0], (2, 2))
    assert M.nnz == 1


def test_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        finalize([0, 3], [0, 0], [1.0, 1.0], (3, 3))


def test_identity_solve():
    b = np.array([1.0, -2.0, 3.0])
    x, info = solve_symmetric_indefinite(sp.identity(3), b)
    assert np.allclose(x, b)


def test_two_by_two_saddle():
    x, info = solve_symmetric_indefinite(sp.csr_matrix([[2.0, 1.0], [1.0, 0.0]]), np.array([3.0, 1.0]))
    assert np.allclose(x, [1.0, 1.0], atol=1e-15)
    assert info.residual <= 1e-14


def test_zero_rhs():
    x, info = solve_symmetric_indefinite(sp.identity(4), np.zeros(4))
    assert not np.any(x)


def test_singular_raises():
    K = sp.csr_matrix([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SolverBreakdown):
        solve_symmetric_indefinite(K, np.array([1.0, 1.0]))


def _small_saddle(rng, n=30, m=8):
    R = rng.standard_normal((n, n))
    A = sp.csr_matrix(R @ R.T + n * np.eye(n))
    B = sp.csr_matrix(rng.standard_normal((m, n)))
    c = rng.uniform(0.5, 1.5, m)
    return SaddleOperator(A, B, c)


def test_saddle_matrix_layout(rng):
    op = _small_saddle(rng)
    K = op.matrix()
    assert K.shape == (op.size, op.size)
    assert abs(K - K.T).max() == 0
    assert np.all(K.diagonal()[op.n_velocity:] == 0)


def test_minres_path_matches_direct(rng):
    op = _small_saddle(rng)
    b = rng.standard_normal(op.size)
    x_direct, info_d = solve_symmetric_indefinite(op, b, tol=1e-11)
    x_iter, info_i = solve_symmetric_indefinite(op, b, tol=1e-11, direct_threshold=0)
    assert info_d.method == "direct" and info_i.method == "minres"
    assert residual_norm(op.matrix(), x_iter, b) <= 1e-11
    assert np.allclose(x_iter, x_direct, atol=1e-8)


def test_minres_breakdown_reports_diagnostics(rng):
    op = _small_saddle(rng)
    b = rng.standard_normal(op.size)
    with pytest.raises(SolverBreakdown) as err:
        solve_symmetric_indefinite(op, b, tol=1e-14, direct_threshold=0, max_iter=2)
    assert err.value.iterations <= 2
    assert err.value.residual > 1e-14


def test_deterministic(rng):
    op = _small_saddle(rng)
    b = rng.standard_normal(op.size)
    x1, _ = solve_symmetric_indefinite(op, b)
    x2, _ = solve_symmetric_indefinite(op, b)
    assert np.array_equal(x1, x2)
