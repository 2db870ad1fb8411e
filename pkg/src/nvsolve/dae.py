"""Variable-order BDF integrator for implicit systems F(t, y, y') = 0.

Fixed-leading-coefficient, divided-difference (phi array) formulation with
orders 1-5 and Newton iteration through a direct linear solver. Algebraic
components can be excluded from the error test, and consistent initial
values for algebraic y and differential y' are computed by
:meth:`DaeSession.calc_ic_ya_yd_prime`.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import linsolver as ls
from . import matrix as mx
from . import vector as nv
from .errors import (
    CallbackError,
    CompatibilityError,
    ConvergenceFailure,
    ErrorTestFailure,
    IllegalInputError,
    InitializationFailure,
    IntegrationError,
    LifecycleError,
    RecoverableFailure,
    SingularMatrixError,
    TooCloseError,
    TooMuchAccuracyError,
    TooMuchWorkError,
    WrongSolverError,
)
from .ode import SolveFlag, SolveResult, SStolerances, SVtolerances, default_tolerances
from .rootfind import RootDirection, RootSpec, RootTracker

__all__ = [
    "DaeSession", "JacArgs", "VarId", "Dls", "DaeStats", "init",
    "SStolerances", "SVtolerances", "default_tolerances", "SolveFlag", "SolveResult",
]

UROUND = sys.float_info.epsilon
MAXORD_DEFAULT = 5
MXSTEP_DEFAULT = 500
MAXCOR = 4
MXNCF, MXNEF = 10, 10
EPCON = 0.33
XRATE = 0.25
RATEMAX = 0.9
ONEPSM = 1.000001
FUZZ_FACTOR = 100.0
IC_MAX_ITERS = 10
IC_EPS = 1e-4 * EPCON

_SUCCESS, _NCONV_RECVR, _ERR_FAIL = 0, 1, 2
_LOWER, _MAINTAIN, _RAISE = -1, 0, 1


class VarId:
    differential = 1.0
    algebraic = 0.0


@dataclass
class JacArgs:
    """Arguments of a DAE Jacobian callback; fill df/dy + jac_coef * df/dy'."""

    jac_t: float
    jac_y: object
    jac_y_prime: object
    jac_coef: float
    jac_res: object


@dataclass
class Dls:
    """Direct linear solver with an optional Jacobian ``jac(JacArgs, J)``."""

    solver: object
    jac: Optional[Callable] = None

    @staticmethod
    def get_num_jac_evals(s: "DaeSession") -> int:
        return s._dls().nje

    @staticmethod
    def get_work_space(s: "DaeSession"):
        return s._dls().solver.work_space()

    @staticmethod
    def get_num_res_evals(s: "DaeSession") -> int:
        return s._dls().nre_dq


@dataclass
class DaeStats:
    num_steps: int = 0
    num_res_evals: int = 0
    num_lin_setups: int = 0
    num_error_test_failures: int = 0
    num_nonlin_iters: int = 0
    num_nonlin_conv_fails: int = 0
    num_g_evals: int = 0
    last_order: int = 0
    last_step: float = 0.0
    current_time: float = 0.0
    # (real words, integer words) of integrator storage
    work_space: tuple = (0, 0)

    def snapshot(self) -> "DaeStats":
        return DaeStats(**self.__dict__)


class _DlsLin:
    def __init__(self, s, cfg: Dls):
        self.s = s
        self.solver = ls.claim(cfg.solver)
        self.jac = cfg.jac
        self.M = self.solver.matrix
        self.nje = 0
        self.nre_dq = 0

    @staticmethod
    def check(cfg: Dls, y):
        solver = cfg.solver.solver if isinstance(cfg.solver, ls.AttachmentToken) else cfg.solver
        if isinstance(solver, ls.CustomDirect):
            if len(y) != solver.matrix.rows:
                raise CompatibilityError("matrix dimension differs from vector length")
        else:
            solver.check_vector(y)
        if cfg.jac is None and not y.backend.serial_representation:
            raise CompatibilityError("difference-quotient Jacobians need serial vectors")

    def form(self, t, yy, yp, rr, cj, M):
        """Fill M with dF/dy + cj dF/dy'."""
        s = self.s
        self.nje += 1
        mx.zero(M)
        if self.jac is not None:
            self.jac(JacArgs(t, yy.data, yp.data, cj, rr.data), M)
            return
        srur = math.sqrt(UROUND)
        ytmp, yptmp, rtmp = nv.clone(yy), nv.clone(yp), nv.clone(rr)
        nv.copy_into(yy, ytmp)
        nv.copy_into(yp, yptmp)
        yd, ypd, ew = ytmp.data, yptmp.data, s.ewt.data
        for j in range(len(yy)):
            yj, ypj = yd[j], ypd[j]
            inc = max(srur * max(abs(yj), abs(s.hh * ypj)), 1.0 / ew[j])
            if s.hh * ypj < 0.0:
                inc = -inc
            inc = (yj + inc) - yj
            yd[j] = yj + inc
            ypd[j] = ypj + cj * inc
            s._call_res(t, ytmp, yptmp, rtmp, count=False)
            self.nre_dq += 1
            col = (rtmp.data - rr.data) * (1.0 / inc)
            if isinstance(M, mx.BandMatrix):
                for i in range(max(0, j - M.mu), min(len(yy) - 1, j + M.ml) + 1):
                    M[i, j] = col[i]
            else:
                M.unwrap()[j, :] = col
            yd[j], ypd[j] = yj, ypj

    def setup(self, yy, yp, rr):
        s = self.s
        self.form(s.tn, yy, yp, rr, s.cj, self.M)
        try:
            self.solver.setup(self.M)
        except SingularMatrixError:
            raise RecoverableFailure("singular iteration matrix")

    def solve(self, b):
        s = self.s
        self.solver.solve(b, b)
        if s.cjratio != 1.0:
            nv.scale(2.0 / (1.0 + s.cjratio), b, b)


_CREATED, _INITIALIZED, _SOLVING = "created", "initialized", "solving"


class DaeSession:
    """Integrator state for one implicit initial-value problem.

    ``residual(t, y, yp, res)`` fills ``res`` with F(t, y, y'); root
    functions are ``g(t, y, yp, gout)``. All arguments are payloads.
    """

    def __init__(self, linear: Dls, tolerances, residual, roots=None):
        if not isinstance(linear, Dls):
            raise IllegalInputError("a Dls linear solver is required")
        self._linear_cfg = linear
        self.tol = tolerances
        self.res = residual
        if roots is not None and not isinstance(roots, RootSpec):
            roots = RootSpec(*roots)
        self.rootspec = roots
        self.roots = RootTracker(roots) if roots else None
        self.state = _CREATED
        self.maxord = MAXORD_DEFAULT
        self.mxstep = MXSTEP_DEFAULT
        self.hin = 0.0
        self.hmax_inv = 0.0
        self.tstop = None
        self.id = None
        self.suppress_alg = False
        self.stats = DaeStats()
        self.lin = None

    # ---------------------------------------------------------- lifecycle

    def init(self, t0: float, y0: nv.Vector, yp0: nv.Vector) -> "DaeSession":
        if self.state != _CREATED:
            raise LifecycleError("session already initialized; use reinit")
        if not nv.compatible(y0, yp0):
            raise CompatibilityError("y0 and y0' are incompatible")
        if isinstance(self.tol, SVtolerances) and not nv.compatible(self.tol.atol, y0):
            raise CompatibilityError("absolute tolerance vector incompatible with y0")
        _DlsLin.check(self._linear_cfg, y0)
        self.lin = _DlsLin(self, self._linear_cfg)
        m = self.maxord
        self.phi = [nv.clone(y0) for _ in range(m + 2)]
        self.ewt = nv.clone(y0)
        self.ewt_mask = nv.clone(y0)
        self.ee = nv.clone(y0)
        self.delta = nv.clone(y0)
        self.yy = nv.clone(y0)
        self.yp = nv.clone(y0)
        self.yypredict = nv.clone(y0)
        self.yppredict = nv.clone(y0)
        self.tempv = nv.clone(y0)
        self._reset(t0, y0, yp0)
        self.state = _INITIALIZED
        return self

    def _reset(self, t0, y0, yp0):
        if not (nv.compatible(y0, self.phi[0]) and nv.compatible(yp0, self.phi[0])):
            raise CompatibilityError("state vectors incompatible with the session")
        nv.copy_into(y0, self.phi[0])
        nv.copy_into(yp0, self.phi[1])
        self._yout, self._ypout = y0, yp0
        self.tn = float(t0)
        self.t0 = self.tn
        self.nst = 0
        self.kk = self.kused = 0
        self.knew = 0
        self.hh = self.hused = 0.0
        self.rr = 0.0
        self.phase = 0
        self.ns = 0
        self.cj = self.cjold = self.cjlast = 0.0
        self.cjratio = 1.0
        self.ss = 20.0
        n = self.maxord + 2
        self.psi = [0.0] * n
        self.alpha = [0.0] * n
        self.beta = [0.0] * n
        self.sigma = [0.0] * n
        self.gamma = [0.0] * n
        self.tretlast = self.tn
        self.irfnd = False
        self.stats.current_time = self.tn

    def reinit(self, t0: float, y0: nv.Vector, yp0: nv.Vector) -> None:
        if self.state == _CREATED:
            raise LifecycleError("reinit on a session that was never initialized")
        self._reset(t0, y0, yp0)
        self.state = _INITIALIZED

    # ---------------------------------------------------------- settings

    def _require_init(self):
        if self.state == _CREATED:
            raise LifecycleError("session not initialized")

    def set_id(self, var_id: nv.Vector) -> None:
        self._require_init()
        if not nv.compatible(var_id, self.phi[0]):
            raise CompatibilityError("id vector incompatible with the session")
        arr = var_id.to_array()
        if not np.all((arr == VarId.differential) | (arr == VarId.algebraic)):
            raise IllegalInputError("id entries must be differential (1.0) or algebraic (0.0)")
        self.id = nv.clone(var_id)
        nv.copy_into(var_id, self.id)

    def set_suppress_alg(self, flag: bool) -> None:
        self._require_init()
        self.suppress_alg = bool(flag)

    def set_stop_time(self, tstop: float) -> None:
        self._require_init()
        if self.nst > 0 and (tstop - self.tn) * self.hh < 0:
            raise IllegalInputError(f"stop time {tstop} is behind the current time {self.tn}")
        self.tstop = float(tstop)

    def clear_stop_time(self):
        self.tstop = None

    def set_all_root_directions(self, d) -> None:
        self._require_init()
        if self.roots is None:
            raise IllegalInputError("session has no root functions")
        self.roots.directions = [RootDirection(d)] * self.rootspec.nroots

    def set_root_directions(self, dirs) -> None:
        self._require_init()
        if self.roots is None or len(dirs) != self.rootspec.nroots:
            raise IllegalInputError("one direction per root function is required")
        self.roots.directions = [RootDirection(d) for d in dirs]

    def set_max_num_steps(self, n: int):
        self.mxstep = n if n > 0 else MXSTEP_DEFAULT

    def set_max_ord(self, q: int):
        if not 1 <= q <= MAXORD_DEFAULT:
            raise IllegalInputError("maximum order must be in 1..5")
        if self.state != _CREATED and q > self.maxord:
            raise IllegalInputError("maximum order cannot be raised after init")
        self.maxord = q

    def set_init_step(self, h: float):
        self.hin = float(h)

    def set_max_step(self, hmax: float):
        self.hmax_inv = 0.0 if hmax == 0 or math.isinf(hmax) else 1.0 / abs(hmax)

    # ---------------------------------------------------------- accessors

    def get_stats(self) -> DaeStats:
        st = self.stats.snapshot()
        st.last_order, st.last_step = self.kused, self.hused
        st.work_space = self.get_work_space()
        st.current_time = self.tn
        return st

    def get_num_steps(self):
        return self.stats.num_steps

    def get_num_res_evals(self):
        return self.stats.num_res_evals

    def get_current_time(self):
        return self.tn

    def get_work_space(self):
        n = len(self.phi[0]) if self.state != _CREATED else 0
        return (self.maxord + 2 + 9) * n + 50, 40

    def _dls(self):
        if not isinstance(self.lin, _DlsLin):
            raise WrongSolverError("session has no direct linear solver")
        return self.lin

    # ---------------------------------------------------------- callbacks

    def _call_res(self, t, y, yp, out, count=True):
        if count:
            self.stats.num_res_evals += 1
        try:
            self.res(t, y.data, yp.data, out.data)
        except RecoverableFailure:
            return 1
        except IntegrationError:
            raise
        except Exception as exc:
            raise CallbackError(f"residual raised {exc!r}", t) from exc
        if not math.isfinite(nv.l1_norm(out)):
            return 1
        return 0

    def _call_g(self, t, y, yp):
        gout = np.zeros(self.rootspec.nroots)
        self.stats.num_g_evals += 1
        self.rootspec.g(t, y.data, yp.data, gout)
        return gout

    # ---------------------------------------------------------- weights

    def _ewt_set(self, ycur):
        w = self.ewt
        nv.abs(ycur, self.tempv)
        if isinstance(self.tol, SStolerances):
            nv.scale(self.tol.rtol, self.tempv, self.tempv)
            nv.add_constant(self.tempv, self.tol.atol, self.tempv)
        else:
            nv.linear_sum(self.tol.rtol, self.tempv, 1.0, self.tol.atol, self.tempv)
        if nv.min_element(self.tempv) <= 0.0:
            return False
        nv.invert(self.tempv, w)
        if self.suppress_alg:
            nv.product(w, self.id, self.ewt_mask)
        return True

    def _norm(self, x, mask):
        if mask and self.suppress_alg:
            return nv.wrms_norm(x, self.ewt_mask)
        return nv.wrms_norm(x, self.ewt)

    # ---------------------------------------------------------- consistent IC

    def calc_ic_ya_yd_prime(self, y: nv.Vector | None = None, yp: nv.Vector | None = None,
                            var_id: nv.Vector | None = None, tout1: float | None = None) -> None:
        """Make (y, y') consistent at the current time.

        Differential components of y are kept; algebraic components of y
        and differential components of y' are corrected by Newton's method
        on the reduced system. Results are copied into ``y`` and ``yp``
        when given (and always into the session's history).
        """
        self._require_init()
        if self.nst > 0:
            raise LifecycleError("calc_ic must be called before the first step")
        if var_id is not None:
            self.set_id(var_id)
        if self.id is None:
            raise IllegalInputError("variable ids must be set before calc_ic")
        if tout1 is not None and tout1 == self.tn:
            raise TooCloseError("tout1 equals the initial time", self.tn)
        if not self._ewt_set(self.phi[0]):
            raise IllegalInputError("initial error weight is nonpositive")
        ids = self.id.to_array()
        diff = ids == VarId.differential
        n = len(ids)
        yy, yp_ = nv.clone(self.phi[0]), nv.clone(self.phi[0])
        nv.copy_into(self.phi[0], yy)
        nv.copy_into(self.phi[1], yp_)
        res = nv.clone(yy)
        J0 = mx.clone(self.lin.M)
        J1 = mx.clone(self.lin.M)
        self.hh = (tout1 - self.tn) if tout1 is not None else 1.0
        converged = False
        for _ in range(IC_MAX_ITERS):
            if self._call_res(self.tn, yy, yp_, res) != 0:
                raise InitializationFailure("residual failed during initial condition calculation", self.tn)
            self.lin.form(self.tn, yy, yp_, res, 0.0, J0)
            self.lin.form(self.tn, yy, yp_, res, 1.0, J1)
            fy = J0.to_array()
            fyp = J1.to_array() - fy
            red = np.where(diff[None, :], fyp, fy)
            delta = self._reduced_solve(red, res)
            if delta is None:
                raise InitializationFailure("singular reduced Jacobian in calc_ic", self.tn)
            ydat, ypdat = yy.to_array(), yp_.to_array()
            ydat[~diff] -= delta[~diff]
            ypdat[diff] -= delta[diff]
            for i in range(n):
                yy.data[i] = ydat[i]
                yp_.data[i] = ypdat[i]
            dnorm = float(np.sqrt(np.mean((delta * self.ewt.to_array()) ** 2)))
            if dnorm <= IC_EPS:
                converged = True
                break
        if not converged:
            raise InitializationFailure("Newton iteration for initial conditions did not converge", self.tn)
        nv.copy_into(yy, self.phi[0])
        nv.copy_into(yp_, self.phi[1])
        self.hh = 0.0
        for src, dst in ((yy, y), (yp_, yp)):
            if dst is not None:
                nv.copy_into(src, dst)

    def _reduced_solve(self, a, res):
        """Solve the reduced Newton system with the session's direct solver."""
        M = self.lin.M
        solver = self.lin.solver
        if isinstance(M, mx.DenseMatrix):
            store = M.as_array()
            store[:, :] = a
        elif isinstance(M, mx.BandMatrix):
            # the reduced matrix keeps the band structure of the full one
            M.zero()
            for j in range(M.n):
                for i in range(max(0, j - M.mu), min(M.n - 1, j + M.ml) + 1):
                    M[i, j] = a[i, j]
        else:
            lu = a.copy()
            try:
                piv = ls.dense_getrf(lu)
            except SingularMatrixError:
                return None
            b = res.to_array().copy()
            ls.dense_getrs(lu, piv, b)
            return b
        try:
            solver.setup(M)
        except SingularMatrixError:
            return None
        b = nv.clone(res)
        nv.copy_into(res, b)
        solver.solve(b, b)
        return b.to_array().copy()

    # ---------------------------------------------------------- interpolation

    def get_solution(self, t: float, yret: nv.Vector, ypret: nv.Vector) -> None:
        tfuzz = FUZZ_FACTOR * UROUND * (abs(self.tn) + abs(self.hh))
        if self.hh < 0:
            tfuzz = -tfuzz
        tp = self.tn - self.hused - tfuzz
        if (t - tp) * self.hh < 0.0 or (t - self.tn - tfuzz) * self.hh > 0.0:
            raise IllegalInputError(f"t = {t} outside the last step")
        self._interp(t, yret, ypret)

    def _interp(self, t, yret, ypret):
        kord = self.kused if self.kused else 1
        delt = t - self.tn
        c, d = 1.0, 0.0
        gam = delt / self.psi[0]
        nv.copy_into(self.phi[0], yret)
        nv.const_fill(0.0, ypret)
        for j in range(1, kord + 1):
            d = d * gam + c / self.psi[j - 1]
            c = c * gam
            gam = (delt + self.psi[j - 1]) / self.psi[j]
            nv.linear_sum(1.0, yret, c, self.phi[j], yret)
            nv.linear_sum(1.0, ypret, d, self.phi[j], ypret)

    # ---------------------------------------------------------- roots

    def _root_start(self):
        g0 = self._call_g(self.tn, self.phi[0], self.phi[1])
        ttol = (abs(self.tn) + abs(self.hh)) * UROUND * 100.0
        delta = math.copysign(10.0 * ttol, self.hh)
        nv.linear_sum(1.0, self.phi[0], delta / self.hh, self.phi[1], self.yy)
        nv.scale(1.0 / self.hh, self.phi[1], self.yp)
        gplus = self._call_g(self.tn + delta, self.yy, self.yp)
        self.roots.start(self.tn, g0, gplus)

    def _rcheck3(self, tout):
        if (tout - self.tn) * self.hh >= 0.0:
            thi = self.tn
        else:
            thi = tout
        self._interp(thi, self.yy, self.yp)
        ghi = self._call_g(thi, self.yy, self.yp)
        ttol = (abs(self.tn) + abs(self.hh)) * UROUND * 100.0

        def g_at(t):
            self._interp(t, self.yy, self.yp)
            return self._call_g(t, self.yy, self.yp)

        st = self.roots.check(thi, ghi, g_at, ttol)
        if st.found:
            self._interp(st.t, self.yy, self.yp)
        return st

    # ---------------------------------------------------------- solve

    def _finish(self, yret, ypret, t, flag, roots=None):
        nv.copy_into(self.yy, yret)
        nv.copy_into(self.yp, ypret)
        self.tretlast = t
        self.stats.current_time = self.tn
        return SolveResult(t, flag, roots or [])

    def solve_normal(self, tout: float, yret: nv.Vector | None = None,
                     ypret: nv.Vector | None = None) -> SolveResult:
        """Integrate to ``tout``; stop early at a root or at the stop time."""
        if self.state == _CREATED:
            raise LifecycleError("solve called before init")
        yret = yret if yret is not None else self._yout
        ypret = ypret if ypret is not None else self._ypout
        if not (nv.compatible(yret, self.phi[0]) and nv.compatible(ypret, self.phi[0])):
            raise CompatibilityError("output vectors incompatible with the session")
        if self.suppress_alg and self.id is None:
            raise IllegalInputError("suppress_alg requires variable ids")
        self.state = _SOLVING

        if self.nst == 0:
            self._first_call(tout)
        else:
            troundoff = FUZZ_FACTOR * UROUND * (abs(self.tn) + abs(self.hh))
            if self.roots is not None and abs(self.tn - self.tretlast) > troundoff:
                st = self._rcheck3(tout)
                if st.found:
                    return self._finish(yret, ypret, st.t, SolveFlag.ROOTS_FOUND, st.flags)
            self.irfnd = False
            if (self.tn - tout) * self.hh >= 0.0:
                self._interp(tout, self.yy, self.yp)
                return self._finish(yret, ypret, tout, SolveFlag.SUCCESS)
            if self.tstop is not None:
                if abs(self.tn - self.tstop) <= troundoff:
                    self._interp(self.tstop, self.yy, self.yp)
                    t, self.tstop = self.tstop, None
                    return self._finish(yret, ypret, t, SolveFlag.STOP_TIME_REACHED)
                if (self.tn + self.hh - self.tstop) * self.hh > 0.0:
                    self.hh = (self.tstop - self.tn) * (1.0 - 4.0 * UROUND)

        nstloc = 0
        while True:
            if nstloc >= self.mxstep:
                self._interp(self.tn, self.yy, self.yp)
                self._finish(yret, ypret, self.tn, SolveFlag.SUCCESS)
                raise TooMuchWorkError(f"{self.mxstep} steps taken before reaching tout", self.tn)
            if self.nst > 0 and not self._ewt_set(self.phi[0]):
                raise IllegalInputError("error weight became nonpositive")
            nrm = self._norm(self.phi[0], True)
            if UROUND * nrm > 1.0:
                raise TooMuchAccuracyError("tolerances too small for machine precision", self.tn)
            self._step()
            nstloc += 1

            if self.roots is not None:
                st = self._rcheck3(tout)
                if st.found:
                    self.irfnd = True
                    return self._finish(yret, ypret, st.t, SolveFlag.ROOTS_FOUND, st.flags)

            if (self.tn - tout) * self.hh >= 0.0:
                self._interp(tout, self.yy, self.yp)
                return self._finish(yret, ypret, tout, SolveFlag.SUCCESS)

            if self.tstop is not None:
                troundoff = FUZZ_FACTOR * UROUND * (abs(self.tn) + abs(self.hh))
                if abs(self.tn - self.tstop) <= troundoff:
                    self._interp(self.tstop, self.yy, self.yp)
                    t, self.tstop = self.tstop, None
                    return self._finish(yret, ypret, t, SolveFlag.STOP_TIME_REACHED)
                if (self.tn + self.hh - self.tstop) * self.hh > 0.0:
                    self.hh = (self.tstop - self.tn) * (1.0 - 4.0 * UROUND)

    def _first_call(self, tout):
        if not self._ewt_set(self.phi[0]):
            raise IllegalInputError("initial error weight is nonpositive")
        tdist = abs(tout - self.tn)
        if tdist == 0.0 or tdist < 2.0 * UROUND * max(abs(self.tn), abs(tout)):
            raise TooCloseError("tout too close to t0 to start integration", self.tn)
        if self.tstop is not None and (self.tstop - self.tn) * (tout - self.tn) <= 0.0:
            raise IllegalInputError("stop time is behind the initial time")
        h = self.hin
        if h != 0.0 and (tout - self.tn) * h < 0.0:
            raise IllegalInputError("initial step has the wrong sign")
        if h == 0.0:
            h = 0.001 * tdist
            ypnorm = self._norm(self.phi[1], True)
            if ypnorm > 0.5 / h:
                h = 0.5 / ypnorm
            h = math.copysign(h, tout - self.tn)
        rh = abs(h) * self.hmax_inv
        if rh > 1.0:
            h /= rh
        if self.tstop is not None and (self.tn + h - self.tstop) * h > 0.0:
            h = (self.tstop - self.tn) * (1.0 - 4.0 * UROUND)
        self.hh = h
        self.kk = 0
        self.kused = 0
        nv.scale(h, self.phi[1], self.phi[1])
        if self.roots is not None:
            self._root_start()

    # ---------------------------------------------------------- one step

    def _step(self):
        saved_t = self.tn
        ncf = nef = 0
        if self.nst == 0:
            self.kk = 1
            self.kused = 0
            self.hused = 0.0
            self.psi[0] = self.hh
            self.cj = 1.0 / self.hh
            self.phase = 0
            self.ns = 0
        while True:
            ck = self._set_coeffs()
            self._predict()
            self.tn = saved_t + self.hh
            if self.tstop is not None and (self.tn - self.tstop) * self.hh > 0.0:
                self.tn = self.tstop
            nflag = self._nls()
            err_k = err_km1 = 0.0
            if nflag == _SUCCESS:
                nflag, err_k, err_km1 = self._test_error(ck)
                if nflag == _SUCCESS:
                    break
            self._restore(saved_t)
            if nflag == _ERR_FAIL:
                nef = self._handle_error_fail(nef, err_k, err_km1)
            else:
                ncf = self._handle_conv_fail(ncf)
            if self.nst == 0:
                self.psi[0] = self.hh
                nv.scale(self.rr, self.phi[1], self.phi[1])
        self._complete_step(err_k, err_km1)

    def _set_coeffs(self):
        kk = self.kk
        psi, alpha, beta, sigma, gamma = self.psi, self.alpha, self.beta, self.sigma, self.gamma
        if self.hh != self.hused or kk != self.kused:
            self.ns = 0
        self.ns = min(self.ns + 1, self.kused + 2)
        if kk + 1 >= self.ns:
            beta[0] = alpha[0] = sigma[0] = 1.0
            gamma[0] = 0.0
            temp1 = self.hh
            for i in range(1, kk + 1):
                temp2 = psi[i - 1]
                psi[i - 1] = temp1
                beta[i] = beta[i - 1] * psi[i - 1] / temp2
                temp1 = temp2 + self.hh
                alpha[i] = self.hh / temp1
                sigma[i] = i * sigma[i - 1] * alpha[i]
                gamma[i] = gamma[i - 1] + alpha[i - 1] / self.hh
            psi[kk] = temp1
        alphas = alpha0 = 0.0
        for i in range(kk):
            alphas -= 1.0 / (i + 1)
            alpha0 -= alpha[i]
        self.cjlast = self.cj
        self.cj = -alphas / self.hh
        ck = abs(alpha[kk] + alphas - alpha0)
        ck = max(ck, alpha[kk])
        for i in range(self.ns, kk + 1):
            nv.scale(beta[i], self.phi[i], self.phi[i])
        return ck

    def _predict(self):
        nv.copy_into(self.phi[0], self.yypredict)
        nv.const_fill(0.0, self.yppredict)
        for j in range(1, self.kk + 1):
            nv.linear_sum(1.0, self.phi[j], 1.0, self.yypredict, self.yypredict)
            nv.linear_sum(self.gamma[j], self.phi[j], 1.0, self.yppredict, self.yppredict)

    def _restore(self, saved_t):
        self.tn = saved_t
        for j in range(1, self.kk + 1):
            self.psi[j - 1] = self.psi[j] - self.hh
        for j in range(self.ns, self.kk + 1):
            nv.scale(1.0 / self.beta[j], self.phi[j], self.phi[j])

    def _nls(self):
        call_setup = False
        if self.nst == 0:
            self.cjold = self.cj
            self.ss = 20.0
            call_setup = True
        self.cjratio = self.cj / self.cjold
        temp1 = (1.0 - XRATE) / (1.0 + XRATE)
        if self.cjratio < temp1 or self.cjratio > 1.0 / temp1:
            call_setup = True
        if self.cj != self.cjlast:
            self.ss = 100.0
        while True:
            nv.copy_into(self.yypredict, self.yy)
            nv.copy_into(self.yppredict, self.yp)
            nv.const_fill(0.0, self.ee)
            if self._call_res(self.tn, self.yy, self.yp, self.delta) != 0:
                return _NCONV_RECVR
            if call_setup:
                self.stats.num_lin_setups += 1
                try:
                    self.lin.setup(self.yy, self.yp, self.delta)
                except RecoverableFailure:
                    return _NCONV_RECVR
                self.cjold = self.cj
                self.cjratio = 1.0
                self.ss = 20.0
            flag = self._newton_iter()
            if flag != _SUCCESS and not call_setup:
                call_setup = True
                continue
            return flag

    def _newton_iter(self):
        mm = 0
        oldnrm = 0.0
        while True:
            self.stats.num_nonlin_iters += 1
            try:
                self.lin.solve(self.delta)
            except RecoverableFailure:
                return _NCONV_RECVR
            nv.linear_sum(1.0, self.yy, -1.0, self.delta, self.yy)
            nv.linear_sum(1.0, self.ee, -1.0, self.delta, self.ee)
            nv.linear_sum(1.0, self.yp, -self.cj, self.delta, self.yp)
            delnrm = self._norm(self.delta, False)
            if mm == 0:
                oldnrm = delnrm
                if delnrm <= 1e-4 * EPCON:
                    return _SUCCESS
            else:
                rate = (delnrm / oldnrm) ** (1.0 / mm)
                if rate > RATEMAX:
                    return _NCONV_RECVR
                self.ss = rate / (1.0 - rate)
            if self.ss * delnrm <= EPCON:
                return _SUCCESS
            mm += 1
            if mm >= MAXCOR:
                return _NCONV_RECVR
            if self._call_res(self.tn, self.yy, self.yp, self.delta) != 0:
                return _NCONV_RECVR

    def _test_error(self, ck):
        kk = self.kk
        enorm_k = self._norm(self.ee, True)
        err_k = self.sigma[kk] * enorm_k
        terr_k = (kk + 1) * err_k
        err_km1 = 0.0
        self.knew = kk
        if kk > 1:
            nv.linear_sum(1.0, self.phi[kk], 1.0, self.ee, self.delta)
            err_km1 = self.sigma[kk - 1] * self._norm(self.delta, True)
            terr_km1 = kk * err_km1
            if kk > 2:
                nv.linear_sum(1.0, self.phi[kk - 1], 1.0, self.delta, self.delta)
                err_km2 = self.sigma[kk - 2] * self._norm(self.delta, True)
                terr_km2 = (kk - 1) * err_km2
                if max(terr_km1, terr_km2) <= terr_k:
                    self.knew = kk - 1
            elif terr_km1 <= 0.5 * terr_k:
                self.knew = kk - 1
        if ck * enorm_k > 1.0:
            return _ERR_FAIL, err_k, err_km1
        return _SUCCESS, err_k, err_km1

    def _handle_conv_fail(self, ncf):
        self.phase = 1
        ncf += 1
        self.stats.num_nonlin_conv_fails += 1
        if ncf >= MXNCF:
            raise ConvergenceFailure(
                f"corrector failed to converge {ncf} times (|h| = {abs(self.hh):.3e})", self.tn)
        self.rr = 0.25
        self.hh *= self.rr
        return ncf

    def _handle_error_fail(self, nef, err_k, err_km1):
        self.phase = 1
        nef += 1
        self.stats.num_error_test_failures += 1
        if nef >= MXNEF:
            raise ErrorTestFailure(
                f"error test failed {nef} times (|h| = {abs(self.hh):.3e})", self.tn)
        if nef == 1:
            err_knew = err_k if self.knew == self.kk else err_km1
            self.kk = self.knew
            rr = 0.9 * (2.0 * err_knew + 0.0001) ** (-1.0 / (self.kk + 1))
            self.rr = max(0.25, min(0.9, rr))
        elif nef == 2:
            self.kk = self.knew
            self.rr = 0.25
        else:
            self.kk = 1
            self.rr = 0.25
        self.hh *= self.rr
        return nef

    def _complete_step(self, err_k, err_km1):
        self.nst += 1
        self.stats.num_steps += 1
        kdiff = self.kk - self.kused
        self.kused = self.kk
        self.hused = self.hh
        if self.knew == self.kk - 1 or self.kk == self.maxord:
            self.phase = 1
        if self.phase == 0:
            if self.nst > 1:
                self.kk += 1
                hnew = 2.0 * self.hh
                tmp = abs(hnew) * self.hmax_inv
                if tmp > 1.0:
                    hnew /= tmp
                self.hh = hnew
        else:
            kk = self.kk
            err_kp1 = 0.0
            if self.knew == kk - 1:
                action = _LOWER
            elif kk == self.maxord or kk + 1 >= self.ns or kdiff == 1:
                action = _MAINTAIN
            else:
                nv.linear_sum(1.0, self.ee, -1.0, self.phi[kk + 1], self.delta)
                err_kp1 = self._norm(self.delta, True) / (kk + 2)
                terr_k = (kk + 1) * err_k
                terr_kp1 = (kk + 2) * err_kp1
                if kk == 1:
                    action = _MAINTAIN if terr_kp1 >= 0.5 * terr_k else _RAISE
                else:
                    terr_km1 = kk * err_km1
                    if terr_km1 <= min(terr_k, terr_kp1):
                        action = _LOWER
                    elif terr_kp1 >= terr_k:
                        action = _MAINTAIN
                    else:
                        action = _RAISE
            if action == _RAISE:
                self.kk += 1
                err_knew = err_kp1
            elif action == _LOWER:
                self.kk -= 1
                err_knew = err_km1
            else:
                err_knew = err_k
            hnew = self.hh
            rr = (2.0 * err_knew + 0.0001) ** (-1.0 / (self.kk + 1))
            if rr >= 2.0:
                hnew = 2.0 * self.hh
                tmp = abs(hnew) * self.hmax_inv
                if tmp > 1.0:
                    hnew /= tmp
            elif rr <= 1.0:
                rr = max(0.5, min(0.9, rr))
                hnew = self.hh * rr
            self.hh = hnew
        if self.kused < self.maxord:
            nv.copy_into(self.ee, self.phi[self.kused + 1])
        nv.linear_sum(1.0, self.ee, 1.0, self.phi[self.kused], self.phi[self.kused])
        for j in range(self.kused - 1, -1, -1):
            nv.linear_sum(1.0, self.phi[j], 1.0, self.phi[j + 1], self.phi[j])


def init(linear: Dls, tolerances, residual, t0: float, y0: nv.Vector, yp0: nv.Vector,
         roots=None) -> DaeSession:
    """Create and initialize a DAE session in one call."""
    return DaeSession(linear, tolerances, residual, roots).init(t0, y0, yp0)
