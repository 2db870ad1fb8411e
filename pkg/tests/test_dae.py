import io
import math

import numpy as np
import pytest

from nvsolve import dae
from nvsolve import linsolver as ls
from nvsolve import matrix as mx
from nvsolve import pendulum as pd
from nvsolve import vector as nv
from nvsolve.errors import CompatibilityError, IllegalInputError, LifecycleError

X, Y, VX, VY, P = range(5)
D, A = dae.VarId.differential, dae.VarId.algebraic


def pendulum_session(state, g=9.8):
    residual, roots, jac = pd.cartesian_problem(pd.PendulumConfig(g=g))
    v = nv.serial(np.array(state, dtype=float))
    vp = nv.serial(np.zeros(5))
    s = dae.init(dae.Dls(ls.dense(v, mx.DenseMatrix(5)), jac), dae.SStolerances(1e-9, 1e-9),
                 residual, 0.0, v, vp, roots=(1, roots))
    ids = nv.serial(np.array([D, D, D, D, A]))
    s.set_id(ids)
    s.set_suppress_alg(True)
    return s, v, vp, ids, residual


def residual_norm(residual, v, vp):
    r = np.zeros(5)
    residual(0.0, v.data, vp.data, r)
    return np.abs(r).max()


def test_calc_ic_at_horizontal():
    s, v, vp, ids, residual = pendulum_session([1.0, 0.0, 0.0, 0.0, 0.3])
    before = v.data[:4].copy()
    s.calc_ic_ya_yd_prime(v, vp, ids, 0.01)
    assert abs(v.data[P]) <= 1e-10
    assert np.array_equal(v.data[:4], before)
    assert residual_norm(residual, v, vp) <= 1e-10


def test_calc_ic_hanging():
    s, v, vp, ids, residual = pendulum_session([0.0, -1.0, 0.0, 0.0, 0.0])
    s.calc_ic_ya_yd_prime(v, vp, ids, 0.01)
    assert v.data[P] == pytest.approx(-9.8, abs=1e-8)
    assert np.array_equal(v.data[:4], [0.0, -1.0, 0.0, 0.0])
    assert residual_norm(residual, v, vp) <= 1e-10


def test_calc_ic_moving_state_matches_closed_form():
    # p (x^2 + y^2) = g y - (vx^2 + vy^2) from the twice-differentiated constraint
    th, w = 0.4, 1.3
    state = [math.sin(th), -math.cos(th), w * math.cos(th), w * math.sin(th), 0.0]
    s, v, vp, ids, residual = pendulum_session(state)
    s.calc_ic_ya_yd_prime(v, vp, ids, 0.01)
    assert v.data[P] == pytest.approx(9.8 * state[Y] - w * w, abs=1e-9)
    assert np.array_equal(v.data[:4], state[:4])


def test_calc_ic_consistent_input_unchanged():
    s, v, vp, ids, residual = pendulum_session([0.0, -1.0, 0.0, 0.0, -9.8])
    vp.data[:] = [0.0, 0.0, 0.0, 0.0, 0.0]
    s.calc_ic_ya_yd_prime(v, vp, ids, 0.01)
    assert v.data.tolist() == [0.0, -1.0, 0.0, 0.0, -9.8]
    assert vp.data.tolist() == [0.0] * 5


def test_scalar_dae_initializes_and_solves():
    def res(t, y, yp, r):
        r[0] = y[0] - yp[0]

    def jac(args, J):
        J[0, 0] = 1.0 - args.jac_coef

    y = nv.serial([1.0])
    s = dae.init(dae.Dls(ls.dense(y, mx.DenseMatrix(1)), jac), dae.SStolerances(1e-8, 1e-10),
                 res, 0.0, y, nv.serial([1.0]))
    out, outp = nv.serial([0.0]), nv.serial([0.0])
    s.solve_normal(1.0, out, outp)
    assert out.data[0] == pytest.approx(math.e, rel=1e-5)


def test_mismatched_lengths():
    def res(t, y, yp, r):
        r[:] = y - yp

    y = nv.serial([1.0, 1.0])
    with pytest.raises(CompatibilityError):
        dae.init(dae.Dls(ls.dense(y, mx.DenseMatrix(2)), None), dae.SStolerances(1e-6, 1e-6),
                 res, 0.0, y, nv.serial([1.0]))


def test_set_id_validation_and_lifecycle():
    s, v, vp, ids, _ = pendulum_session([1.0, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(IllegalInputError):
        s.set_id(nv.serial([1.0, 1.0, 0.5, 1.0, 0.0]))
    fresh = dae.DaeSession(dae.Dls(ls.dense(v, mx.DenseMatrix(5)), None), dae.SStolerances(1e-6, 1e-6),
                           lambda t, y, yp, r: None)
    with pytest.raises(LifecycleError):
        fresh.reinit(0.0, v, vp)


def test_dls_accessors_on_dae():
    s, v, vp, ids, _ = pendulum_session([1.0, 0.0, 0.0, 0.0, 0.0])
    s.calc_ic_ya_yd_prime(v, vp, ids, 0.01)
    s.solve_normal(0.1, v, vp)
    assert dae.Dls.get_num_jac_evals(s) >= 1
    assert dae.Dls.get_num_res_evals(s) >= 0


def test_constraint_and_first_root():
    out = io.StringIO()
    summary = pd.run_cartesian(pd.PendulumConfig(t_end=1.0), out)
    for line in out.getvalue().splitlines():
        t, x, y = map(float, line.split("\t"))
        assert abs(x * x + y * y - 1.0) <= 1e-6
    assert summary.bounces[0].t == pytest.approx(0.7133720578, abs=1e-4)


def test_fifty_bounces():
    # a short rod and a soft wall give many impacts in little simulated time
    cfg = pd.PendulumConfig(r=0.001, k=-0.95, t_end=3.0, dt=0.05)
    summary = pd.run_cartesian(cfg, io.StringIO())
    assert len(summary.bounces) >= 50
    for b in summary.bounces:
        assert b.speed_after == pytest.approx(0.95 * b.speed_before, rel=1e-12)
