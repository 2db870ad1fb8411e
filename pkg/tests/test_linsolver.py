import numpy as np
import pytest

from nvsolve import linsolver as ls
from nvsolve import matrix as mx
from nvsolve import vector as nv
from nvsolve.errors import AlreadyAttachedError, KrylovConvergenceError, SingularMatrixError


def dense_solve(A, b):
    s = ls.dense(nv.serial(np.zeros(len(b))), mx.DenseMatrix(len(b)))
    s.setup(mx.DenseMatrix.from_array(A))
    x = nv.serial(np.zeros(len(b)))
    s.solve(x, nv.serial(np.array(b, dtype=float)))
    return x.data


def random_band(rng, n, mu, ml):
    m = mx.BandMatrix(n, mu, ml)
    for j in range(n):
        for i in range(max(0, j - mu), min(n, j + ml + 1)):
            m[i, j] = rng.normal()
        m[j, j] += 4.0 * np.sign(m[j, j])
    return m


def band_solve(m, b):
    s = ls.band(nv.serial(np.zeros(m.n)), m)
    s.setup(m)
    x = nv.serial(np.zeros(m.n))
    s.solve(x, nv.serial(np.array(b, dtype=float)))
    return x.data


def diag_dominant(rng, n):
    A = rng.normal(size=(n, n))
    A += np.diag(np.abs(A).sum(axis=1) + 1.0)
    return A


def test_dense_examples():
    assert dense_solve(np.diag([2.0, 4.0]), [2.0, 4.0]).tolist() == [1.0, 1.0]
    assert dense_solve(np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 2.0]).tolist() == [2.0, 1.0]


def test_dense_random_residual(rng):
    A = rng.normal(size=(50, 50)) + 10 * np.eye(50)
    b = rng.normal(size=50)
    x = dense_solve(A, b)
    bound = 1e-10 * (np.abs(A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max())
    assert np.abs(A @ x - b).max() <= bound


def test_dense_singular_reports_column():
    s = ls.dense(nv.serial(np.zeros(3)), mx.DenseMatrix(3))
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularMatrixError) as info:
        s.setup(mx.DenseMatrix.from_array(A))
    assert info.value.column == 1


def test_band_tridiagonal():
    n = 10
    m = mx.BandMatrix(n, 1, 1)
    for i in range(n):
        m[i, i] = 2.0
        if i:
            m[i, i - 1] = m[i - 1, i] = -1.0
    b = m.to_array() @ np.ones(n)
    np.testing.assert_allclose(band_solve(m, b), np.ones(n), atol=1e-12, rtol=0)


def test_band_diagonal_is_division():
    m = mx.BandMatrix(4, 0, 0)
    for i, v in enumerate([2.0, -4.0, 0.5, 8.0]):
        m[i, i] = v
    assert band_solve(m, [1.0, 1.0, 1.0, 1.0]).tolist() == [0.5, -0.25, 2.0, 0.125]


def test_band_singular():
    m = mx.BandMatrix(3, 1, 1)
    with pytest.raises(SingularMatrixError):
        band_solve(m, [1.0, 1.0, 1.0])


def test_band_lu_matches_dense_lu(rng):
    for _ in range(100):
        n = int(rng.integers(1, 20))
        mu, ml = int(rng.integers(0, n)), int(rng.integers(0, n))
        m = random_band(rng, n, mu, ml)
        b = rng.normal(size=n)
        xb = band_solve(m, b)
        xd = dense_solve(mx.to_dense(m).to_array(), b)
        np.testing.assert_allclose(xb, xd, atol=1e-10, rtol=0)


def _spgmr_run(A, b, tol=1e-10, prec=None, **kw):
    s = ls.spgmr(**kw)
    x = nv.serial(np.zeros(len(b)))

    def atimes(v, z):
        z.data[:] = A @ v.data

    st = s.solve(atimes, prec, x, nv.serial(b.copy()), tol)
    return x.data, st


def test_spgmr_identity_one_iteration(rng):
    b = rng.normal(size=7)
    x, st = _spgmr_run(np.eye(7), b)
    assert st.iterations == 1
    np.testing.assert_allclose(x, b, rtol=1e-14)


def test_spgmr_matches_dense(rng):
    for gs in (ls.MODIFIED_GS, ls.CLASSICAL_GS):
        A = diag_dominant(rng, 50)
        b = rng.normal(size=50)
        x, _ = _spgmr_run(A, b, maxl=30, max_restarts=5, gs_type=gs)
        np.testing.assert_allclose(x, dense_solve(A, b), atol=1e-8, rtol=0)


def test_gram_schmidt_variants_agree(rng):
    A = diag_dominant(rng, 30)
    b = rng.normal(size=30)
    xm, _ = _spgmr_run(A, b, maxl=30, gs_type=ls.MODIFIED_GS)
    xc, _ = _spgmr_run(A, b, maxl=30, gs_type=ls.CLASSICAL_GS)
    np.testing.assert_allclose(xm, xc, atol=1e-8, rtol=0)


@pytest.mark.parametrize("make", [ls.prec_left, ls.prec_right])
def test_spgmr_exact_preconditioner(rng, make):
    A = diag_dominant(rng, 50)
    Ainv = np.linalg.inv(A)
    b = rng.normal(size=50)

    def psolve(r, z, left):
        z.data[:] = Ainv @ r.data

    x, st = _spgmr_run(A, b, prec=make(psolve))
    assert st.iterations == 1
    np.testing.assert_allclose(x, dense_solve(A, b), atol=1e-8, rtol=0)


def test_spgmr_failure_reports_residual(rng):
    A = diag_dominant(rng, 40) + 5 * rng.normal(size=(40, 40))
    with pytest.raises(KrylovConvergenceError) as info:
        _spgmr_run(A, rng.normal(size=40), tol=1e-14, maxl=2)
    assert info.value.res_norm > 1e-14


def test_attach_twice():
    s = ls.dense(nv.serial(np.zeros(2)), mx.DenseMatrix(2))
    tok = s.attach()
    assert tok.solver is s
    with pytest.raises(AlreadyAttachedError):
        s.attach()
    k = ls.spgmr()
    ls.claim(k)
    with pytest.raises(AlreadyAttachedError):
        ls.claim(k)


def test_attachment_is_permanent():
    from nvsolve import ode
    s = ls.dense(nv.serial(np.zeros(1)), mx.DenseMatrix(1))
    sess = ode.init(ode.BDF, ode.Newton(ode.Dls(s)), ode.SStolerances(1e-6, 1e-8),
                    lambda t, y, yd: yd.__setitem__(0, -y[0]), 0.0, nv.serial([1.0]))
    del sess
    with pytest.raises(AlreadyAttachedError):
        s.attach()


def test_custom_direct_round_trip_and_counting():
    from nvsolve import ode
    counts = {"setup": 0}

    def setup(state, a):
        counts["setup"] += 1
        state["lu"] = a.as_array().copy()
        state["piv"] = ls.dense_getrf(state["lu"])

    def solve(state, m, x, b):
        w = np.array(b)
        ls.dense_getrs(state["lu"], state["piv"], w)
        x[:] = w

    state = {}
    s = ls.make_custom_dls(ls.DlsOps(setup, solve), state, mx.DenseMatrix(2))
    assert ls.unwrap_custom(s) is state
    with pytest.raises(TypeError):
        ls.unwrap_custom(ls.spgmr())

    def rhs(t, y, yd):
        yd[0] = y[1]
        yd[1] = -100.0 * y[0] - y[1]

    sess = ode.init(ode.BDF, ode.Newton(ode.Dls(s)), ode.SStolerances(1e-6, 1e-9), rhs,
                    0.0, nv.serial([1.0, 0.0]))
    sess.solve_normal(1.0)
    assert counts["setup"] == sess.get_stats().num_lin_setups > 0
