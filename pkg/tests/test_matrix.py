import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvsolve import matrix as mx
from nvsolve import vector as nv
from nvsolve.errors import CompatibilityError, MatrixCompatibilityError, RepresentationError


def random_sparse(rng, rows, cols, density, fmt):
    a = rng.normal(size=(rows, cols)) * (rng.random((rows, cols)) < density)
    return a, mx.sparse_from_dense(a, fmt)


def test_dense_layout_is_column_major():
    m = mx.DenseMatrix(2, 3)
    m[1, 2] = 7.0
    assert m.data[2 * 2 + 1] == 7.0
    assert m.unwrap()[2, 1] == 7.0
    assert m.as_array()[1, 2] == 7.0


def test_dense_scale_add_example():
    a = mx.DenseMatrix.from_array([[1.0, 0.0], [0.0, 1.0]])
    b = mx.DenseMatrix.from_array([[0.0, 1.0], [1.0, 0.0]])
    mx.scale_add(2.0, a, b)
    assert a.to_array().tolist() == [[2.0, 1.0], [1.0, 2.0]]


def test_scale_add_identity_examples(rng):
    a = mx.DenseMatrix.from_array(rng.normal(size=(3, 3)))
    mx.scale_add_identity(0.0, a)
    assert np.array_equal(a.to_array(), np.eye(3))
    z = mx.DenseMatrix(4)
    mx.scale_add_identity(1.0, z)
    assert np.array_equal(z.to_array(), np.eye(4))
    with pytest.raises(MatrixCompatibilityError):
        mx.scale_add_identity(1.0, mx.DenseMatrix(2, 3))


def test_dense_ops_match_numpy(rng):
    A, B = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
    a, b = mx.DenseMatrix.from_array(A), mx.DenseMatrix.from_array(B)
    c = mx.clone(a)
    mx.copy(a, c)
    assert np.array_equal(c.to_array(), A)
    mx.scale_add(-1.5, c, b)
    assert np.array_equal(c.to_array(), -1.5 * A + B)
    mx.zero(c)
    assert not c.to_array().any()
    x = rng.normal(size=5)
    y = nv.serial(np.zeros(5))
    mx.matvec(a, nv.serial(x), y)
    np.testing.assert_allclose(y.data, A @ x, rtol=1e-14, atol=1e-14)


def test_dense_shape_mismatch():
    with pytest.raises(MatrixCompatibilityError):
        mx.scale_add(1.0, mx.DenseMatrix(2), mx.DenseMatrix(3))
    with pytest.raises(MatrixCompatibilityError):
        mx.scale_add(1.0, mx.DenseMatrix(2), mx.BandMatrix(2, 1, 1))


def test_matvec_identity_and_errors():
    i3 = mx.DenseMatrix.from_array(np.eye(3))
    y = nv.serial(np.zeros(3))
    mx.matvec(i3, nv.serial([1.0, 2.0, 3.0]), y)
    assert y.data.tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(RepresentationError):
        mx.matvec(i3, nv.pylist([1.0, 2.0, 3.0]), y)
    with pytest.raises(CompatibilityError):
        mx.matvec(i3, nv.serial([1.0, 2.0]), y)


def tridiagonal(n):
    b = mx.BandMatrix(n, 1, 1)
    for i in range(n):
        b[i, i] = 2.0
        if i > 0:
            b[i, i - 1] = -1.0
            b[i - 1, i] = -1.0
    return b


def test_band_tridiagonal_matvec():
    b = tridiagonal(6)
    y = nv.serial(np.zeros(6))
    mx.matvec(b, nv.serial(np.ones(6)), y)
    assert y.data.tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 1.0]


def test_band_access_rules():
    b = tridiagonal(5)
    assert b[0, 4] == 0.0
    with pytest.raises(IndexError):
        b[0, 4] = 1.0
    with pytest.raises(IndexError):
        b[4, 0] = 1.0
    full = b.to_array()
    assert full[0, 3] == 0.0 and full[3, 0] == 0.0
    assert np.array_equal(full, 2 * np.eye(5) - np.eye(5, k=1) - np.eye(5, k=-1))


def test_band_ops_match_dense(rng):
    n = 8
    a, b = mx.BandMatrix(n, 2, 1), mx.BandMatrix(n, 2, 1)
    for m in (a, b):
        for j in range(n):
            for i in range(max(0, j - 2), min(n, j + 2)):
                m[i, j] = rng.normal()
    A, B = a.to_array(), b.to_array()
    mx.scale_add(0.5, a, b)
    assert np.array_equal(a.to_array(), 0.5 * A + B)
    mx.scale_add_identity(3.0, a)
    assert np.array_equal(a.to_array(), 3.0 * (0.5 * A + B) + np.eye(n))
    c = mx.clone(a)
    mx.copy(a, c)
    assert np.array_equal(c.to_array(), a.to_array())
    x = rng.normal(size=n)
    y = nv.serial(np.zeros(n))
    mx.matvec(a, nv.serial(x), y)
    np.testing.assert_allclose(y.data, a.to_array() @ x, rtol=1e-14, atol=1e-14)


def test_sparse_identity_layout():
    m = mx.sparse_from_triplets(mx.CSC, 2, 2, [(0, 0, 1.0), (1, 1, 1.0)])
    assert m.data.tolist() == [1.0, 1.0]
    assert m.indexptrs.tolist() == [0, 1, 2]
    assert m.indexvals.tolist() == [0, 1]


def test_sparse_empty_and_duplicates():
    e = mx.sparse_from_triplets(mx.CSR, 3, 3, [])
    assert e.indexptrs.tolist() == [0, 0, 0, 0]
    d = mx.sparse_from_triplets(mx.CSC, 2, 2, [(0, 0, 1.0), (0, 0, 2.0)])
    assert d.stored == 1 and d.data[0] == 3.0
    with pytest.raises(IndexError):
        mx.sparse_from_triplets(mx.CSC, 2, 2, [(2, 0, 1.0)])


def test_sparse_csr_layout(rng):
    A, m = random_sparse(rng, 6, 7, 0.4, mx.CSR)
    for i in range(6):
        for k in range(m.indexptrs[i], m.indexptrs[i + 1]):
            assert A[i, m.indexvals[k]] == m.data[k]
    assert np.array_equal(m.to_array(), A)


def test_sparse_scale_add_disjoint_patterns(rng):
    for _ in range(20):
        mask = rng.random((6, 6)) < 0.5
        A = rng.normal(size=(6, 6)) * mask * (rng.random((6, 6)) < 0.6)
        B = rng.normal(size=(6, 6)) * ~mask * (rng.random((6, 6)) < 0.6)
        a, b = mx.sparse_from_dense(A), mx.sparse_from_dense(B)
        mx.scale_add(1.75, a, b)
        mx.validate_sparse(a)
        assert np.array_equal(a.to_array(), 1.75 * A + B)
        assert a.nnz >= a.stored == np.count_nonzero(A) + np.count_nonzero(B)


def test_sparse_scale_add_zero_scale_copies_pattern(rng):
    A, a = random_sparse(rng, 5, 5, 0.3, mx.CSC)
    B, b = random_sparse(rng, 5, 5, 0.3, mx.CSC)
    mx.scale_add(0.0, a, b)
    assert np.array_equal(a.to_array(), B)


def test_sparse_identity_growth(rng):
    A = rng.normal(size=(6, 6))
    np.fill_diagonal(A, 0.0)
    A *= rng.random((6, 6)) < 0.3
    a = mx.sparse_from_dense(A)
    cap = a.nnz
    mx.scale_add_identity(2.0, a)
    mx.validate_sparse(a)
    assert np.array_equal(a.to_array(), 2.0 * A + np.eye(6))
    assert a.nnz >= cap + 6
    assert a.nnz & (a.nnz - 1) == 0


def test_sparse_format_mismatch():
    with pytest.raises(MatrixCompatibilityError):
        mx.scale_add(1.0, mx.SparseMatrix(2, 2, 1, mx.CSC), mx.SparseMatrix(2, 2, 1, mx.CSR))


def test_csc_and_csr_matvec_agree(rng):
    A = rng.normal(size=(9, 9)) * (rng.random((9, 9)) < 0.4)
    x = rng.normal(size=9)
    ys = []
    for fmt in (mx.CSC, mx.CSR):
        y = nv.serial(np.zeros(9))
        mx.matvec(mx.sparse_from_dense(A, fmt), nv.serial(x), y)
        ys.append(y.data)
    np.testing.assert_allclose(ys[0], ys[1], rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(ys[0], A @ x, rtol=1e-14, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**31 - 1),
       st.sampled_from([mx.CSC, mx.CSR]))
def test_sparse_round_trip_and_invariants(rows, cols, seed, fmt):
    rng = np.random.default_rng(seed)
    A, m = random_sparse(rng, rows, cols, 0.4, fmt)
    mx.validate_sparse(m)
    assert np.array_equal(m.to_array(), A)
    assert np.array_equal(mx.to_dense(m).to_array(), A)
    c = mx.clone(m)
    mx.copy(m, c)
    mx.validate_sparse(c)
    assert np.array_equal(c.to_array(), A)
    mx.zero(c)
    mx.validate_sparse(c)
    assert not c.to_array().any()


def dense_table():
    return mx.MatrixOpsTable(
        clone=lambda p: np.zeros_like(p),
        zero=lambda p: p.fill(0.0),
        copy=lambda s, d: d.__setitem__(slice(None), s),
        scale_add=lambda c, a, b: a.__setitem__(slice(None), c * a + b),
        scale_add_identity=lambda c, a: a.__setitem__(slice(None), c * a + np.eye(a.shape[0])),
        matvec=lambda a, x, y: y.__setitem__(slice(None), a @ x),
        space=lambda p: (p.size, 0),
    )


def test_custom_matrix_matches_dense(rng):
    A, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    ops = dense_table()
    ca, cb = mx.make_custom(ops, A.copy(), 4, 4), mx.make_custom(ops, B.copy(), 4, 4)
    da, db = mx.DenseMatrix.from_array(A), mx.DenseMatrix.from_array(B)
    for op in (lambda a, b: mx.scale_add(0.3, a, b), lambda a, b: mx.scale_add_identity(-2.0, a)):
        op(ca, cb)
        op(da, db)
        assert np.array_equal(ca.unwrap(), da.to_array())
    assert np.array_equal(mx.to_dense(ca).to_array(), da.to_array())
    assert mx.space(ca) == (16, 0)
    with pytest.raises(MatrixCompatibilityError):
        mx.scale_add(1.0, ca, mx.make_custom(dense_table(), B.copy(), 4, 4))
