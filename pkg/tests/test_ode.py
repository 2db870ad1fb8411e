import math

import numpy as np
import pytest

from nvsolve import linsolver as ls
from nvsolve import matrix as mx
from nvsolve import ode
from nvsolve import vector as nv
from nvsolve.errors import CompatibilityError, IllegalInputError, LifecycleError, WrongSolverError
from nvsolve.rootfind import BOTH, DECREASING, INCREASING

E_INV = 0.36787944117144233


def decay(t, y, yd):
    yd[:] = -y


def dense_newton(n):
    return ode.Newton(ode.Dls(ls.dense(nv.serial(np.zeros(n)), mx.DenseMatrix(n))))


def decay_session(method=ode.BDF, rtol=1e-8, atol=1e-8, y0=1.0, **kw):
    it = ode.Functional() if method == ode.ADAMS else dense_newton(1)
    return ode.init(method, it, ode.SStolerances(rtol, atol), decay, 0.0, nv.serial([y0]), **kw)


@pytest.mark.parametrize("method", [ode.ADAMS, ode.BDF])
def test_exponential_decay(method):
    s = decay_session(method)
    y = nv.serial([0.0])
    t, flag = s.solve_normal(1.0, y)
    assert flag is ode.SolveFlag.SUCCESS and t == 1.0
    assert abs(y.data[0] - E_INV) <= 1e-6


@pytest.mark.parametrize("method", [ode.ADAMS, ode.BDF])
@pytest.mark.parametrize("rtol", [1e-4, 1e-6, 1e-8, 1e-10])
def test_tolerance_proportionality(method, rtol):
    s = decay_session(method, rtol, rtol)
    y = nv.serial([0.0])
    s.set_stop_time(1.0)
    s.solve_normal(1.0, y)
    assert abs(y.data[0] - E_INV) <= 100 * rtol


def _fixed_step_error(h):
    s = decay_session(ode.BDF, 10.0, 10.0)
    s.set_max_ord(1)
    s.set_init_step(h)
    s.set_max_step(h)
    s.set_stop_time(1.0)
    y = nv.serial([0.0])
    t, flag = s.solve_normal(1.0, y)
    assert t == 1.0
    assert s.get_stats().last_order == 1
    return abs(y.data[0] - E_INV)


def test_backward_euler_first_order():
    for h in (0.02, 0.01):
        ratio = _fixed_step_error(h) / _fixed_step_error(h / 2)
        assert 1.5 <= ratio <= 2.5


def test_fresh_session_state():
    s = ode.init(ode.BDF, dense_newton(2), ode.default_tolerances,
                 lambda t, y, yd: yd.__setitem__(slice(None), [y[1], -y[0]]), 0.0, nv.serial([1.0, 0.0]))
    st = s.get_stats()
    assert st.num_steps == 0 and st.num_lin_setups == 0 and st.current_time == 0.0


def test_polar_pendulum_functional_initial_state():
    def rhs(t, y, yd):
        yd[0] = y[1]
        yd[1] = -9.8 * math.sin(y[0])

    s = ode.init(ode.ADAMS, ode.Functional(), ode.default_tolerances, rhs, 0.0,
                 nv.serial([math.pi / 2, 0.0]))
    y = nv.serial([0.0, 0.0])
    s.solve_normal(0.1, y)
    assert y.data[0] == pytest.approx(math.pi / 2 - 0.5 * 9.8 * 0.01, abs=1e-3)


def test_stop_time_reached():
    s = decay_session()
    s.set_stop_time(10.0)
    t, flag = s.solve_normal(20.0)
    assert flag is ode.SolveFlag.STOP_TIME_REACHED and t == 10.0
    with pytest.raises(IllegalInputError):
        s.set_stop_time(5.0)


def _root_times(g, directions, t_end):
    s = ode.init(ode.BDF, dense_newton(1), ode.SStolerances(1e-10, 1e-10),
                 lambda t, y, yd: yd.__setitem__(0, 1.0), 0.0, nv.serial([0.0]), roots=(1, g))
    s.set_all_root_directions(directions)
    s.set_stop_time(t_end)
    # y' = 1 is integrated exactly, so without a cap one step can span two crossings
    s.set_max_step(0.5)
    found = []
    while True:
        res = s.solve_normal(t_end)
        if res.flag is not ode.SolveFlag.ROOTS_FOUND:
            return found
        found.append(res.t)


def test_root_direction_increasing_skips_falling_cos():
    assert _root_times(lambda t, y, g: g.__setitem__(0, math.cos(y[0])), INCREASING, 3.0) == []
    r = _root_times(lambda t, y, g: g.__setitem__(0, math.cos(y[0])), DECREASING, 3.0)
    assert r == [pytest.approx(math.pi / 2, abs=1e-8)]


def test_both_directions_sin():
    r = _root_times(lambda t, y, g: g.__setitem__(0, math.sin(y[0])), BOTH, 2 * math.pi + 0.5)
    assert r == [pytest.approx(math.pi, abs=1e-8), pytest.approx(2 * math.pi, abs=1e-8)]


def test_root_times_bracket_zero():
    def g(t, y, out):
        out[0] = math.sin(3.0 * y[0]) - 0.2

    def rhs(t, y, yd):
        yd[0] = 1.0 + 0.5 * math.cos(t)

    s = ode.init(ode.ADAMS, ode.Functional(), ode.SStolerances(1e-9, 1e-12), rhs, 0.0,
                 nv.serial([0.0]), roots=(1, g))
    s.set_stop_time(6.0)
    y = nv.serial([0.0])
    count = 0
    while True:
        res = s.solve_normal(6.0, y)
        if res.flag is not ode.SolveFlag.ROOTS_FOUND:
            break
        count += 1
        ts = res.t
        d = 1e-8 * max(1.0, abs(ts))
        vals = []
        for tt in (ts - d, ts + d):
            yy = nv.serial([0.0])
            s.get_dky(min(tt, s.get_current_time()), 0, yy)
            out = [0.0]
            # extend slightly past the current step by the derivative
            if tt > s.get_current_time():
                yy.data[0] += (tt - s.get_current_time()) * (1.0 + 0.5 * math.cos(tt))
            g(tt, yy.data, out)
            vals.append(out[0])
        gt = [0.0]
        g(ts, y.data, gt)
        assert vals[0] * vals[1] <= 0.0 or abs(gt[0]) <= 1e-10
    assert count >= 4


def test_reinit_matches_fresh_session():
    def run(s, y):
        out = []
        for k in range(1, 11):
            s.solve_normal(0.1 * k, y)
            out.append(y.data.tobytes())
        return out

    def rhs(t, y, yd):
        yd[0] = y[1]
        yd[1] = -math.sin(y[0])

    y0 = [1.0, 0.0]
    fresh = ode.init(ode.BDF, dense_newton(2), ode.default_tolerances, rhs, 0.0, nv.serial(y0))
    ref = run(fresh, nv.serial([0.0, 0.0]))
    reused = ode.init(ode.BDF, dense_newton(2), ode.default_tolerances, rhs, 0.0, nv.serial(y0))
    reused.solve_normal(0.37)
    reused.reinit(0.0, nv.serial(y0))
    assert run(reused, nv.serial([0.0, 0.0])) == ref


def test_reinit_before_init():
    s = ode.OdeSession(ode.BDF, dense_newton(1), ode.default_tolerances, decay)
    with pytest.raises(LifecycleError):
        s.reinit(0.0, nv.serial([1.0]))


def test_reinit_incompatible_vector():
    s = decay_session()
    with pytest.raises(CompatibilityError):
        s.reinit(0.0, nv.serial([1.0, 2.0]))


def test_stats_are_cumulative_across_reinit():
    s = decay_session()
    s.solve_normal(1.0)
    before = s.get_stats().num_steps
    s.reinit(0.0, nv.serial([1.0]))
    s.solve_normal(0.5)
    assert s.get_stats().num_steps > before


def test_diag_decoupled_system():
    lam = np.array([1.0, 10.0, 100.0, 1000.0])

    def rhs(t, y, yd):
        yd[:] = -lam * y

    s = ode.init(ode.BDF, ode.Newton(ode.diag_solver()), ode.SStolerances(1e-6, 1e-10), rhs, 0.0,
                 nv.serial(np.ones(4)))
    y = nv.serial(np.zeros(4))
    counts = []
    for tout in (0.25, 0.5, 1.0):
        s.solve_normal(tout, y)
        counts.append(ode.Diag.get_num_rhs_evals(s))
        np.testing.assert_allclose(y.data, np.exp(-lam * tout), atol=1e-4)
    assert counts == sorted(counts)
    st = s.get_stats()
    assert st.num_nonlin_iters <= 2 * st.num_steps
    assert ode.Diag.get_work_space(s) == (12, 0)


def test_wrong_solver_accessors():
    s = decay_session()
    s.solve_normal(0.1)
    with pytest.raises(WrongSolverError):
        ode.Diag.get_work_space(s)
    with pytest.raises(WrongSolverError):
        ode.Diag.get_num_rhs_evals(s)
    with pytest.raises(WrongSolverError):
        ode.Spils.get_num_lin_iters(s)
    assert ode.Dls.get_num_jac_evals(s) >= 1
    f = decay_session(ode.ADAMS)
    with pytest.raises(WrongSolverError):
        ode.Dls.get_num_jac_evals(f)


def test_functional_never_touches_linear_solvers(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("linear solver used")

    for cls in (ode._DlsLin, ode._SpilsLin, ode._DiagLin):
        monkeypatch.setattr(cls, "setup", boom)
        monkeypatch.setattr(cls, "solve", boom)
    s = decay_session(ode.ADAMS)
    s.solve_normal(2.0)
    assert s.get_stats().num_lin_setups == 0


def test_custom_vector_with_dense_solver_rejected():
    with pytest.raises(CompatibilityError):
        ode.init(ode.BDF, ode.Newton(ode.Dls(ls.DenseLU(mx.DenseMatrix(1)))), ode.default_tolerances,
                 decay, 0.0, nv.pylist([1.0]))


def test_custom_vector_with_diag_and_spgmr():
    def rhs(t, y, yd):
        yd[0] = -y[0]

    for lin in (ode.diag_solver(), ode.Spils(ls.spgmr())):
        s = ode.init(ode.BDF, ode.Newton(lin), ode.SStolerances(1e-8, 1e-8), rhs, 0.0,
                     nv.pylist([1.0]))
        y = nv.pylist([0.0])
        s.solve_normal(1.0, y)
        assert abs(y.data[0] - E_INV) <= 1e-6


def test_get_dky_range_checks():
    s = decay_session()
    s.solve_normal(1.0)
    out = nv.serial([0.0])
    s.get_dky(s.get_current_time(), 1, out)
    assert out.data[0] == pytest.approx(-math.exp(-s.get_current_time()), rel=1e-3)
    with pytest.raises(IllegalInputError):
        s.get_dky(s.get_current_time() + 1.0, 0, out)
    with pytest.raises(IllegalInputError):
        s.get_dky(s.get_current_time(), 9, out)


def test_determinism():
    def run():
        s = decay_session(ode.ADAMS, 1e-6, 1e-9)
        y = nv.serial([0.0])
        out = []
        for k in range(1, 20):
            s.solve_normal(0.2 * k, y)
            out.append(y.data.tobytes())
        return out

    assert run() == run()


def test_stats_report_work_space():
    s = decay_session()
    assert s.get_stats().work_space == s.get_work_space()
    assert s.get_work_space()[0] > 0
