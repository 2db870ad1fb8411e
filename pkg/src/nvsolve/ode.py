"""Variable-step, variable-order integrator for dy/dt = f(t, y).

Adams-Moulton (orders 1-12) with functional or Newton iteration, or BDF
(orders 1-5) with Newton iteration, both in fixed-leading-coefficient
Nordsieck form. All vector arithmetic goes through :mod:`nvsolve.vector`,
so any backend (including custom ones) can carry the state.

Typical use::

    s = ode.init(ode.ADAMS, ode.Functional(), ode.default_tolerances,
                 rhs, 0.0, y, roots=(1, g))
    s.set_stop_time(10.0)
    t, flag = s.solve_normal(1.0, y)
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

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
    IntegrationError,
    LifecycleError,
    RecoverableFailure,
    SingularMatrixError,
    KrylovConvergenceError,
    TooCloseError,
    TooMuchAccuracyError,
    TooMuchWorkError,
    WrongSolverError,
)
from .rootfind import BOTH, RootDirection, RootSpec, RootTracker

UROUND = sys.float_info.epsilon

ADAMS, BDF = "adams", "bdf"
ADAMS_Q_MAX, BDF_Q_MAX = 12, 5

# step and order control
ETAMX1, ETAMX2, ETAMX3 = 10000.0, 10.0, 10.0
ETAMXF, ETAMIN, ETACF = 0.2, 0.1, 0.25
ADDON = 1e-6
BIAS1, BIAS2, BIAS3 = 6.0, 6.0, 10.0
ONEPSM = 1.000001
THRESH = 1.5
SMALL_NST, SMALL_NEF, LONG_WAIT = 10, 2, 10
MXNCF, MXNEF, MXNEF1 = 10, 7, 3
# nonlinear iteration
NLS_MAXCOR = 3
CRDOWN, RDIV, DGMAX, MSBP = 0.3, 2.0, 0.3, 20
CORTES = 0.1
# direct-solver Jacobian reuse
MSBJ, DGMAX_J = 50, 0.2
MIN_INC_MULT = 1000.0
EPLIFAC = 0.05
FRACT = 0.1
# step-size start heuristics
FUZZ_FACTOR, HLB_FACTOR, HUB_FACTOR, H_BIAS, HIN_ITERS = 100.0, 100.0, 0.1, 0.5, 4
MXSTEP_DEFAULT = 500

# internal flags
_SUCCESS, _CONV_RECVR, _TRY_AGAIN, _DO_ERROR_TEST, _PREDICT_AGAIN = 0, 1, 2, 3, 4
_FIRST_CALL, _PREV_CONV_FAIL, _PREV_ERR_FAIL = 10, 11, 12
_NO_FAILURES, _FAIL_BAD_J, _FAIL_OTHER = 20, 21, 22


# ------------------------------------------------------------ configuration


@dataclass(frozen=True)
class SStolerances:
    rtol: float
    atol: float

    def __post_init__(self):
        if self.rtol < 0 or self.atol < 0 or (self.rtol == 0 and self.atol == 0):
            raise IllegalInputError("tolerances must be nonnegative and not both zero")


@dataclass(frozen=True)
class SVtolerances:
    rtol: float
    atol: nv.Vector

    def __post_init__(self):
        if self.rtol < 0:
            raise IllegalInputError("rtol must be nonnegative")


default_tolerances = SStolerances(1e-4, 1e-8)


@dataclass
class JacArgs:
    """Arguments handed to Jacobian and preconditioner callbacks (payloads)."""

    t: float
    y: object
    fy: object
    gamma: float = 0.0


@dataclass
class Dls:
    """Direct linear solver for Newton iteration.

    ``jac(args, J)`` fills the matrix J with df/dy (J is zeroed first).
    Without ``jac`` a difference quotient is used, which needs serial data.
    """

    solver: object
    jac: Optional[Callable] = None

    @staticmethod
    def get_num_jac_evals(s: "OdeSession") -> int:
        return s._lin_for(_DlsLin).nje

    @staticmethod
    def get_work_space(s: "OdeSession"):
        return s._lin_for(_DlsLin).solver.work_space()

    @staticmethod
    def get_num_rhs_evals(s: "OdeSession") -> int:
        return s._lin_for(_DlsLin).nfe_dq


@dataclass
class Spils:
    """Krylov (SPGMR) linear solver for Newton iteration.

    ``prec`` is a :class:`~nvsolve.linsolver.Preconditioner` whose
    ``setup(args, jok, gamma) -> jcur`` and
    ``solve(args, r, z, gamma, delta, left)`` act on payloads, or a
    :class:`~nvsolve.linsolver.BandedPrecSpec`. ``jac_times(v, jv, args)``
    replaces the difference-quotient Jacobian-vector product.
    """

    solver: object
    prec: object = None
    jac_times: Optional[Callable] = None

    @staticmethod
    def get_num_lin_iters(s: "OdeSession") -> int:
        return s._lin_for(_SpilsLin).nli

    @staticmethod
    def get_num_prec_evals(s: "OdeSession") -> int:
        return s._lin_for(_SpilsLin).npe

    @staticmethod
    def get_num_conv_fails(s: "OdeSession") -> int:
        return s._lin_for(_SpilsLin).ncfl


class Diag:
    """Diagonal difference-quotient approximation of the Newton matrix."""

    @staticmethod
    def get_work_space(s: "OdeSession"):
        lin = s._lin_for(_DiagLin)
        return 3 * lin.n, 0

    @staticmethod
    def get_num_rhs_evals(s: "OdeSession") -> int:
        return s._lin_for(_DiagLin).nfe_di


def diag_solver() -> Diag:
    return Diag()


class Functional:
    """Fixed-point corrector iteration; uses no linear solver."""


class Newton:
    """Newton corrector iteration; the linear solver is mandatory."""

    def __init__(self, linear: Union[Dls, Spils, Diag]):
        if not isinstance(linear, (Dls, Spils, Diag)):
            raise IllegalInputError("Newton iteration requires a Dls, Spils or Diag linear solver")
        self.linear = linear


class SolveFlag(enum.Enum):
    SUCCESS = "success"
    ROOTS_FOUND = "roots_found"
    STOP_TIME_REACHED = "stop_time_reached"


@dataclass
class SolveResult:
    t: float
    flag: SolveFlag
    roots: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.t, self.flag))


@dataclass
class Stats:
    num_steps: int = 0
    num_rhs_evals: int = 0
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

    def snapshot(self) -> "Stats":
        return Stats(**self.__dict__)


# ------------------------------------------------------------ linear solvers


class _DlsLin:
    def __init__(self, s, cfg: Dls):
        self.s = s
        self.solver = ls.claim(cfg.solver)
        self.jac = cfg.jac
        self.nje = 0
        self.nfe_dq = 0
        self.nstlj = 0
        self.M = self.solver.matrix
        self.saved = mx.clone(self.M)

    def check(self, y):
        if isinstance(self.solver, ls.CustomDirect):
            if len(y) != self.M.rows:
                raise CompatibilityError("matrix dimension differs from vector length")
        else:
            self.solver.check_vector(y)
        if self.jac is None and not y.backend.serial_representation:
            raise CompatibilityError("difference-quotient Jacobians need serial vectors")

    def setup(self, convfail, ypred, fpred):
        s = self.s
        dgamma = abs(s.gamma / s.gammap - 1.0)
        jbad = (s.nst == 0 or s.nst > self.nstlj + MSBJ
                or (convfail == _FAIL_BAD_J and dgamma < DGMAX_J)
                or convfail == _FAIL_OTHER)
        if not jbad:
            jcur = False
            mx.copy(self.saved, self.M)
        else:
            self.nje += 1
            self.nstlj = s.nst
            jcur = True
            mx.zero(self.M)
            if self.jac is not None:
                self.jac(JacArgs(s.tn, ypred.data, fpred.data, s.gamma), self.M)
            elif isinstance(self.M, mx.BandMatrix):
                self._band_dq(ypred, fpred)
            else:
                self._dense_dq(ypred, fpred)
            mx.copy(self.M, self.saved)
        mx.scale_add_identity(-s.gamma, self.M)
        try:
            self.solver.setup(self.M)
        except SingularMatrixError:
            raise RecoverableFailure("singular Newton matrix")
        return jcur

    def _min_inc(self, fy):
        s = self.s
        fnorm = nv.wrms_norm(fy, s.ewt)
        n = len(fy)
        return MIN_INC_MULT * abs(s.h) * UROUND * n * fnorm if fnorm != 0.0 else 1.0

    def _dense_dq(self, y, fy):
        s = self.s
        srur = math.sqrt(UROUND)
        min_inc = self._min_inc(fy)
        ytemp = nv.clone(y)
        ftemp = nv.clone(y)
        ya, ew, yt = y.data, s.ewt.data, ytemp.data
        cols = self.M.unwrap()
        for j in range(len(y)):
            inc = max(srur * abs(ya[j]), min_inc / ew[j])
            yt[j] = ya[j] + inc
            s._call_rhs(s.tn, ytemp, ftemp, count=False)
            self.nfe_dq += 1
            yt[j] = ya[j]
            cols[j, :] = (ftemp.data - fy.data) * (1.0 / inc)

    def _band_dq(self, y, fy):
        s = self.s
        M = self.M
        srur = math.sqrt(UROUND)
        min_inc = self._min_inc(fy)
        ytemp = nv.clone(y)
        ftemp = nv.clone(y)
        ya, ew, yt = y.data, s.ewt.data, ytemp.data
        n = len(y)
        width = M.ml + M.mu + 1
        for group in range(min(width, n)):
            incs = {}
            for j in range(group, n, width):
                incs[j] = max(srur * abs(ya[j]), min_inc / ew[j])
                yt[j] = ya[j] + incs[j]
            s._call_rhs(s.tn, ytemp, ftemp, count=False)
            self.nfe_dq += 1
            for j, inc in incs.items():
                yt[j] = ya[j]
                for i in range(max(0, j - M.mu), min(n - 1, j + M.ml) + 1):
                    M[i, j] = (ftemp.data[i] - fy.data[i]) / inc

    def solve(self, b, ycur, fcur):
        s = self.s
        self.solver.solve(b, b)
        if s.method == BDF and s.gamrat != 1.0:
            nv.scale(2.0 / (1.0 + s.gamrat), b, b)


class _BandPrec:
    """Banded difference-quotient preconditioner P = I - gamma*J."""

    def __init__(self, s, spec: ls.BandedPrecSpec, y):
        if not y.backend.serial_representation:
            raise CompatibilityError("banded preconditioner requires serial vectors")
        n = len(y)
        self.s = s
        self.savedJ = mx.BandMatrix(n, spec.mupper, spec.mlower)
        self.P = mx.BandMatrix(n, spec.mupper, spec.mlower)
        self.lu = ls.BandLU(self.P)
        self.nfe = 0
        self.side = spec.side

    def setup(self, args, jok, gamma):
        s = self.s
        if jok:
            jcur = False
        else:
            dq = _DlsLin.__new__(_DlsLin)
            dq.s, dq.M, dq.nfe_dq = s, self.savedJ, 0
            self.savedJ.zero()
            y = nv.serial(np.array(args.y))
            fy = nv.serial(np.array(args.fy))
            dq._band_dq(y, fy)
            self.nfe += dq.nfe_dq
            jcur = True
        mx.copy(self.savedJ, self.P)
        mx.scale_add_identity(-gamma, self.P)
        self.lu.setup(self.P)
        return jcur

    def solve(self, args, r, z, gamma, delta, left):
        z[:] = r
        zv = nv.serial(z)
        self.lu.solve(zv, zv)


class _SpilsLin:
    def __init__(self, s, cfg: Spils, y):
        self.s = s
        self.solver = ls.claim(cfg.solver)
        self.jtimes = cfg.jac_times
        prec = cfg.prec
        if isinstance(prec, ls.BandedPrecSpec):
            bp = _BandPrec(s, prec, y)
            prec = ls.Preconditioner(prec.side, bp.solve, bp.setup)
        self.prec = prec if prec is not None else ls.prec_none()
        self.has_setup = self.prec.setup is not None
        self.nli = self.npe = self.nps = self.ncfl = self.njtimes = 0
        self.nfe_dq = 0
        self.nstlpre = 0
        self.x = None
        self.ytemp = None

    def check(self, y):
        pass

    def _args(self, ycur, fcur):
        s = self.s
        return JacArgs(s.tn, ycur.data, fcur.data, s.gamma)

    def setup(self, convfail, ypred, fpred):
        s = self.s
        dgamma = abs(s.gamrat - 1.0)
        jbad = (s.nst == 0 or s.nst >= self.nstlpre + 50
                or (convfail == _FAIL_BAD_J and dgamma < DGMAX_J)
                or convfail == _FAIL_OTHER)
        jok = not jbad
        try:
            jcur = bool(self.prec.setup(self._args(ypred, fpred), jok, s.gamma))
        except SingularMatrixError:
            raise RecoverableFailure("singular preconditioner")
        if jcur:
            self.nstlpre = s.nst
        self.npe += 1
        return jcur

    def solve(self, b, ycur, fcur):
        s = self.s
        if self.x is None:
            self.x = nv.clone(b)
            self.ytemp = nv.clone(b)
            self.ftemp = nv.clone(b)
        args = self._args(ycur, fcur)
        deltar = EPLIFAC * s.tq[4]
        bnorm = nv.wrms_norm(b, s.ewt)
        if bnorm <= deltar:
            if s.mnewt > 0:
                nv.const_fill(0.0, b)
            return
        tol = deltar * math.sqrt(len(b)) / nv.max_norm(s.ewt)

        def atimes(v, z):
            if self.jtimes is not None:
                self.jtimes(v.data, z.data, args)
            else:
                sig = 1.0 / nv.wrms_norm(v, s.ewt)
                nv.linear_sum(sig, v, 1.0, ycur, self.ytemp)
                s._call_rhs(s.tn, self.ytemp, self.ftemp, count=False)
                self.nfe_dq += 1
                nv.linear_sum(1.0 / sig, self.ftemp, -1.0 / sig, fcur, z)
            self.njtimes += 1
            nv.linear_sum(1.0, v, -s.gamma, z, z)

        prec = self.prec
        if prec.side != ls.NONE:
            user = prec.solve

            def psolve(r, z, left):
                self.nps += 1
                user(args, r.data, z.data, s.gamma, deltar, left)

            prec = ls.Preconditioner(prec.side, psolve)
        try:
            stats = self.solver.solve(atimes, prec, self.x, b, tol)
            self.nli += stats.iterations
        except KrylovConvergenceError as exc:
            self.nli += exc.iterations
            self.ncfl += 1
            # a reduced residual is good enough for the first correction
            if not (exc.reduced and s.mnewt == 0):
                raise RecoverableFailure("Krylov iteration did not converge")
        nv.copy_into(self.x, b)


class _DiagLin:
    def __init__(self, s, y):
        self.s = s
        self.n = len(y)
        self.M = nv.clone(y)
        self.bit = nv.clone(y)
        self.bitcomp = nv.clone(y)
        self.ytmp = nv.clone(y)
        self.ftemp = nv.clone(y)
        self.gammasv = 0.0
        self.nfe_di = 0

    def check(self, y):
        pass

    def setup(self, convfail, ypred, fpred):
        s = self.s
        M, bit, bitcomp, y, ftemp = self.M, self.bit, self.bitcomp, self.ytmp, self.ftemp
        r = FRACT * s.rl1
        nv.linear_sum(s.h, fpred, -1.0, s.zn[1], ftemp)
        nv.linear_sum(r, ftemp, 1.0, ypred, y)
        s._call_rhs(s.tn, y, M, count=False)
        self.nfe_di += 1
        nv.linear_sum(1.0, M, -1.0, fpred, M)
        nv.linear_sum(FRACT, ftemp, -s.h, M, M)
        nv.product(ftemp, s.ewt, y)
        # keep perturbations that are above roundoff
        nv.compare_threshold(UROUND, y, bit)
        nv.add_constant(bit, -1.0, bitcomp)
        nv.product(ftemp, bit, y)
        nv.linear_sum(FRACT, y, -1.0, bitcomp, y)
        nv.quotient(M, y, M)
        nv.product(M, bit, M)
        nv.linear_sum(1.0, M, -1.0, bitcomp, M)
        if not nv.invert_with_test(M, M):
            raise RecoverableFailure("zero diagonal in Newton matrix")
        self.gammasv = s.gamma
        return True

    def solve(self, b, ycur, fcur):
        s = self.s
        M = self.M
        if self.gammasv != s.gamma:
            r = s.gamma / self.gammasv
            nv.invert(M, M)
            nv.add_constant(M, -1.0, M)
            nv.scale(r, M, M)
            nv.add_constant(M, 1.0, M)
            if not nv.invert_with_test(M, M):
                raise RecoverableFailure("zero diagonal in Newton matrix")
            self.gammasv = s.gamma
        nv.product(b, M, b)


# ------------------------------------------------------------ session

_CREATED, _INITIALIZED, _SOLVING = "created", "initialized", "solving"


def _as_rootspec(roots):
    if roots is None or isinstance(roots, RootSpec):
        return roots
    n, g = roots
    return RootSpec(n, g)


class OdeSession:
    """Integrator state for one initial-value problem.

    Construct with the method, iteration, tolerances, right-hand side and
    optional roots ``(nroots, g)``, then :meth:`init` with the initial
    state (or use the module-level :func:`init`). ``rhs(t, y, ydot)`` and
    ``g(t, y, gout)`` receive payloads and must fill their last argument.
    """

    def __init__(self, method, iteration, tolerances, rhs, roots=None):
        if method not in (ADAMS, BDF):
            raise IllegalInputError(f"unknown method {method!r}")
        if isinstance(iteration, type):
            iteration = iteration()
        if not isinstance(iteration, (Functional, Newton)):
            raise IllegalInputError("iteration must be Functional() or Newton(linear)")
        if method == BDF and isinstance(iteration, Functional):
            pass  # allowed, if unusual
        self.method = method
        self.iteration = iteration
        self.tol = tolerances
        self.rhs = rhs
        self.rootspec = _as_rootspec(roots)
        self.roots = RootTracker(self.rootspec) if self.rootspec else None
        self.state = _CREATED
        self.qmax = ADAMS_Q_MAX if method == ADAMS else BDF_Q_MAX
        self.mxstep = MXSTEP_DEFAULT
        self.hin = 0.0
        self.hmin = 0.0
        self.hmax_inv = 0.0
        self.tstop = None
        self.stats = Stats()
        self.lin = None
        self._linear_cfg = iteration.linear if isinstance(iteration, Newton) else None
        self._yout = None

    # ---------------------------------------------------------- lifecycle

    def init(self, t0: float, y0: nv.Vector) -> "OdeSession":
        if self.state != _CREATED:
            raise LifecycleError("session already initialized; use reinit")
        if isinstance(self.tol, SVtolerances) and not nv.compatible(self.tol.atol, y0):
            raise CompatibilityError("absolute tolerance vector incompatible with y0")
        cfg = self._linear_cfg
        if isinstance(cfg, Dls):
            # validate before claiming so a rejected solver stays usable
            probe = _DlsLin.__new__(_DlsLin)
            solver = cfg.solver.solver if isinstance(cfg.solver, ls.AttachmentToken) else cfg.solver
            probe.solver, probe.jac, probe.M = solver, cfg.jac, solver.matrix
            probe.check(y0)
            self.lin = _DlsLin(self, cfg)
        elif isinstance(cfg, Spils):
            if isinstance(cfg.prec, ls.BandedPrecSpec) and not y0.backend.serial_representation:
                raise CompatibilityError("banded preconditioner requires serial vectors")
            self.lin = _SpilsLin(self, cfg, y0)
        elif isinstance(cfg, Diag):
            self.lin = _DiagLin(self, y0)
        self._alloc(y0)
        self._reset(t0, y0)
        self.state = _INITIALIZED
        return self

    def _alloc(self, y0):
        self.zn = [nv.clone(y0) for _ in range(self.qmax + 1)]
        self.ewt = nv.clone(y0)
        self.acor = nv.clone(y0)
        self.tempv = nv.clone(y0)
        self.ftemp = nv.clone(y0)
        self.y = nv.clone(y0)
        self._yout = y0

    def _reset(self, t0, y0):
        if not nv.compatible(y0, self.zn[0]):
            raise CompatibilityError("state vector incompatible with the session")
        nv.copy_into(y0, self.zn[0])
        self.tn = float(t0)
        self.q = 1
        self.L = 2
        self.qwait = self.L
        self.etamax = ETAMX1
        self.qu = 0
        self.hu = 0.0
        self.h = 0.0
        self.hscale = 0.0
        self.hprime = 0.0
        self.next_h = 0.0
        self.next_q = 0
        self.eta = 1.0
        self.tolsf = 1.0
        self.nst = 0
        self.nscon = 0
        self.nstlp = 0
        self.gamma = self.gammap = self.gamrat = 0.0
        self.crate = 1.0
        self.acnrm = 0.0
        self.mnewt = 0
        self.tau = [0.0] * (self.qmax + 2)
        self.tq = [0.0] * 6
        self.l = [0.0] * (self.qmax + 1)
        self.saved_tq5 = 0.0
        self.indx_acor = self.qmax
        self.tretlast = self.tn
        self.irfnd = False
        self.jcur = False
        if self.lin is not None:
            for attr in ("nstlj", "nstlpre"):
                if hasattr(self.lin, attr):
                    setattr(self.lin, attr, 0)
        self.stats.current_time = self.tn

    def reinit(self, t0: float, y0: nv.Vector) -> None:
        """Restart from (t0, y0) keeping method, tolerances and solvers."""
        if self.state == _CREATED:
            raise LifecycleError("reinit on a session that was never initialized")
        self._reset(t0, y0)
        self._yout = y0
        self.state = _INITIALIZED

    # ---------------------------------------------------------- settings

    def _require_init(self):
        if self.state == _CREATED:
            raise LifecycleError("session not initialized")

    def set_stop_time(self, tstop: float) -> None:
        self._require_init()
        if self.nst > 0 and (tstop - self.tn) * self.h < 0:
            raise IllegalInputError(f"stop time {tstop} is behind the current time {self.tn}")
        self.tstop = float(tstop)

    def clear_stop_time(self):
        self.tstop = None

    def set_all_root_directions(self, d: RootDirection) -> None:
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
        if q < 1:
            raise IllegalInputError("maximum order must be positive")
        limit = ADAMS_Q_MAX if self.method == ADAMS else BDF_Q_MAX
        if self.state != _CREATED and q > self.qmax:
            raise IllegalInputError("maximum order cannot be raised after init")
        self.qmax = min(q, limit) if self.state == _CREATED else q
        self.indx_acor = self.qmax if self.state != _CREATED else 0

    def set_init_step(self, h: float):
        self.hin = float(h)

    def set_max_step(self, hmax: float):
        self.hmax_inv = 0.0 if hmax == 0 or math.isinf(hmax) else 1.0 / abs(hmax)

    def set_min_step(self, hmin: float):
        self.hmin = abs(hmin)

    # ---------------------------------------------------------- accessors

    def get_stats(self) -> Stats:
        st = self.stats.snapshot()
        st.last_order, st.last_step = self.qu, self.hu
        st.work_space = self.get_work_space()
        st.current_time = self.tn if self.state != _CREATED else 0.0
        return st

    def get_num_steps(self):
        return self.stats.num_steps

    def get_num_rhs_evals(self):
        return self.stats.num_rhs_evals

    def get_num_lin_setups(self):
        return self.stats.num_lin_setups

    def get_num_err_test_fails(self):
        return self.stats.num_error_test_failures

    def get_num_nonlin_solv_iters(self):
        return self.stats.num_nonlin_iters

    def get_num_g_evals(self):
        return self.stats.num_g_evals

    def get_current_time(self):
        return self.tn

    def get_last_step(self):
        return self.hu

    def get_last_order(self):
        return self.qu

    def get_work_space(self):
        n = len(self.zn[0]) if self.state != _CREATED else 0
        nvec = self.qmax + 1 + 5 + (1 if isinstance(self.tol, SVtolerances) else 0)
        return nvec * n + 40, 40

    def _lin_for(self, kind):
        if not isinstance(self.lin, kind):
            have = type(self.lin).__name__.strip("_").replace("Lin", "") if self.lin else "no"
            raise WrongSolverError(f"session uses {have} linear solver")
        return self.lin

    # ---------------------------------------------------------- callbacks

    def _call_rhs(self, t, y, ydot, count=True):
        if count:
            self.stats.num_rhs_evals += 1
        try:
            self.rhs(t, y.data, ydot.data)
        except RecoverableFailure:
            return 1
        except IntegrationError:
            raise
        except Exception as exc:
            raise CallbackError(f"right-hand side raised {exc!r}", t) from exc
        if not math.isfinite(nv.l1_norm(ydot)):
            return 1
        return 0

    def _call_g(self, t, y):
        gout = np.zeros(self.rootspec.nroots)
        self.stats.num_g_evals += 1
        self.rootspec.g(t, y.data, gout)
        return gout

    # ---------------------------------------------------------- weights

    def _ewt_set(self, ycur, w):
        nv.abs(ycur, self.tempv)
        if isinstance(self.tol, SStolerances):
            nv.scale(self.tol.rtol, self.tempv, self.tempv)
            nv.add_constant(self.tempv, self.tol.atol, self.tempv)
        else:
            nv.linear_sum(self.tol.rtol, self.tempv, 1.0, self.tol.atol, self.tempv)
        if nv.min_element(self.tempv) <= 0.0:
            return False
        nv.invert(self.tempv, w)
        return True

    # ---------------------------------------------------------- interpolation

    def get_dky(self, t: float, k: int, dky: nv.Vector) -> None:
        """k-th derivative of the interpolating polynomial at t."""
        if k < 0 or k > self.q:
            raise IllegalInputError(f"derivative order {k} not available")
        self._check_interp_time(t)
        self._dky(t, k, dky)

    def _check_interp_time(self, t):
        tfuzz = FUZZ_FACTOR * UROUND * (abs(self.tn) + abs(self.hu))
        if self.hu < 0:
            tfuzz = -tfuzz
        tp = self.tn - self.hu - tfuzz
        tn1 = self.tn + tfuzz
        if (t - tp) * (t - tn1) > 0.0:
            raise IllegalInputError(f"t = {t} outside the last step [{self.tn - self.hu}, {self.tn}]")

    def _dky(self, t, k, dky):
        s = (t - self.tn) / self.h
        for j in range(self.q, k - 1, -1):
            c = 1.0
            for i in range(j, j - k, -1):
                c *= i
            if j == self.q:
                nv.scale(c, self.zn[self.q], dky)
            else:
                nv.linear_sum(c, self.zn[j], s, dky, dky)
        if k:
            nv.scale(self.h ** (-k), dky, dky)

    # ---------------------------------------------------------- initial step

    def _hin(self, tout):
        tdiff = tout - self.tn
        if tdiff == 0.0:
            raise TooCloseError("tout too close to t0 to start integration", self.tn)
        sign = 1.0 if tdiff > 0 else -1.0
        tdist = abs(tdiff)
        tround = UROUND * max(abs(self.tn), abs(tout))
        if tdist < 2.0 * tround:
            raise TooCloseError("tout too close to t0 to start integration", self.tn)
        hlb = HLB_FACTOR * tround
        hub = self._upper_bound_h0(tdist)
        hg = math.sqrt(hlb * hub)
        if hub < hlb:
            return sign * hg
        hnew_ok = False
        hs = hg
        hnew = hg
        for count1 in range(1, HIN_ITERS + 1):
            hg_ok = False
            for _ in range(HIN_ITERS):
                ydd = self._ydd_norm(hg * sign)
                if ydd is not None:
                    hg_ok = True
                    break
                hg *= 0.2
            if not hg_ok:
                if count1 <= 2:
                    raise CallbackError("right-hand side failed repeatedly at start", self.tn)
                hnew = hs
                break
            hs = hg
            if hnew_ok or count1 == HIN_ITERS:
                hnew = hg
                break
            hnew = math.sqrt(2.0 / ydd) if ydd * hub * hub > 2.0 else math.sqrt(hg * hub)
            hrat = hnew / hg
            if 0.5 < hrat < 2.0:
                hnew_ok = True
            if count1 > 1 and hrat > 2.0:
                hnew = hg
                hnew_ok = True
            hg = hnew
        h0 = H_BIAS * hnew
        h0 = min(max(h0, hlb), hub)
        return sign * h0

    def _upper_bound_h0(self, tdist):
        temp1, temp2 = self.tempv, self.acor
        nv.abs(self.zn[0], temp1)
        nv.abs(self.zn[1], temp2)
        if isinstance(self.tol, SStolerances):
            nv.scale(HUB_FACTOR, temp1, temp1)
            nv.add_constant(temp1, self.tol.atol, temp1)
        else:
            nv.linear_sum(HUB_FACTOR, temp1, 1.0, self.tol.atol, temp1)
        nv.quotient(temp2, temp1, temp1)
        hub_inv = nv.max_norm(temp1)
        hub = HUB_FACTOR * tdist
        if hub * hub_inv > 1.0:
            hub = 1.0 / hub_inv
        return hub

    def _ydd_norm(self, hg):
        nv.linear_sum(hg, self.zn[1], 1.0, self.zn[0], self.y)
        if self._call_rhs(self.tn + hg, self.y, self.tempv) != 0:
            return None
        nv.linear_sum(1.0, self.tempv, -1.0, self.zn[1], self.tempv)
        nv.scale(1.0 / hg, self.tempv, self.tempv)
        return nv.wrms_norm(self.tempv, self.ewt)

    # ---------------------------------------------------------- roots

    def _root_guard_start(self):
        """Root values at the (re)start point and just after it."""
        y0 = self.zn[0]
        g0 = self._call_g(self.tn, y0)
        ttol = (abs(self.tn) + abs(self.h)) * UROUND * 100.0
        delta = math.copysign(10.0 * ttol, self.h)
        nv.linear_sum(1.0, y0, delta / self.h, self.zn[1], self.y)
        gplus = self._call_g(self.tn + delta, self.y)
        self.roots.start(self.tn, g0, gplus)

    def _rcheck3(self, tout, one_step):
        if one_step or (tout - self.tn) * self.h >= 0.0:
            thi = self.tn
            nv.copy_into(self.zn[0], self.y)
        else:
            thi = tout
            self.get_dky(thi, 0, self.y)
        ghi = self._call_g(thi, self.y)
        ttol = (abs(self.tn) + abs(self.h)) * UROUND * 100.0

        def g_at(t):
            # may reach slightly behind the last step when tlo was a tout
            self._dky(t, 0, self.y)
            return self._call_g(t, self.y)

        st = self.roots.check(thi, ghi, g_at, ttol)
        if st.found:
            self._dky(st.t, 0, self.y)
        return st

    # ---------------------------------------------------------- solve

    def solve_normal(self, tout: float, yout: nv.Vector | None = None) -> SolveResult:
        """Integrate to ``tout``; stop early at a root or at the stop time."""
        return self._solve(tout, yout, one_step=False)

    def solve_one_step(self, tout: float, yout: nv.Vector | None = None) -> SolveResult:
        """Take a single internal step in the direction of ``tout``."""
        return self._solve(tout, yout, one_step=True)

    def _finish(self, yout, t, flag, roots=None):
        nv.copy_into(self.y, yout)
        self.tretlast = t
        self.stats.current_time = self.tn
        return SolveResult(t, flag, roots or [])

    def _solve(self, tout, yout, one_step):
        if self.state == _CREATED:
            raise LifecycleError("solve called before init")
        yout = yout if yout is not None else self._yout
        if not nv.compatible(yout, self.zn[0]):
            raise CompatibilityError("output vector incompatible with the session")
        self.state = _SOLVING

        if self.nst == 0:
            self._first_call_setup(tout)
        else:
            troundoff = FUZZ_FACTOR * UROUND * (abs(self.tn) + abs(self.h))
            if self.roots is not None and abs(self.tn - self.tretlast) > troundoff:
                st = self._rcheck3(tout, one_step)
                if st.found:
                    self.irfnd = True
                    return self._finish(yout, st.t, SolveFlag.ROOTS_FOUND, st.flags)
            self.irfnd = False
            if not one_step and (self.tn - tout) * self.h >= 0.0:
                self.get_dky(tout, 0, self.y)
                return self._finish(yout, tout, SolveFlag.SUCCESS)
            if one_step and abs(self.tn - self.tretlast) > troundoff:
                nv.copy_into(self.zn[0], self.y)
                return self._finish(yout, self.tn, SolveFlag.SUCCESS)
            if self.tstop is not None:
                if abs(self.tn - self.tstop) <= troundoff:
                    self.get_dky(self.tstop, 0, self.y)
                    t = self.tstop
                    self.tstop = None
                    return self._finish(yout, t, SolveFlag.STOP_TIME_REACHED)
                if (self.tn + self.hprime - self.tstop) * self.h > 0.0:
                    self.hprime = (self.tstop - self.tn) * (1.0 - 4.0 * UROUND)
                    self.eta = self.hprime / self.h

        nstloc = 0
        while True:
            self.next_h = self.h
            self.next_q = self.q
            if self.nst > 0 and not self._ewt_set(self.zn[0], self.ewt):
                nv.copy_into(self.zn[0], self.y)
                self._finish(yout, self.tn, SolveFlag.SUCCESS)
                raise IllegalInputError("error weight became nonpositive")
            if nstloc >= self.mxstep:
                nv.copy_into(self.zn[0], self.y)
                self._finish(yout, self.tn, SolveFlag.SUCCESS)
                raise TooMuchWorkError(f"{self.mxstep} steps taken before reaching tout", self.tn)
            nrm = nv.wrms_norm(self.zn[0], self.ewt)
            self.tolsf = UROUND * nrm
            if self.tolsf > 1.0:
                self.tolsf *= 2.0
                nv.copy_into(self.zn[0], self.y)
                self._finish(yout, self.tn, SolveFlag.SUCCESS)
                raise TooMuchAccuracyError("tolerances too small for machine precision", self.tn)
            self._step()
            nstloc += 1

            if self.roots is not None:
                st = self._rcheck3(tout, one_step)
                if st.found:
                    self.irfnd = True
                    return self._finish(yout, st.t, SolveFlag.ROOTS_FOUND, st.flags)

            if not one_step and (self.tn - tout) * self.h >= 0.0:
                self.get_dky(tout, 0, self.y)
                self.next_q, self.next_h = self.q, self.hprime
                return self._finish(yout, tout, SolveFlag.SUCCESS)

            if self.tstop is not None:
                troundoff = FUZZ_FACTOR * UROUND * (abs(self.tn) + abs(self.h))
                if abs(self.tn - self.tstop) <= troundoff:
                    self.get_dky(self.tstop, 0, self.y)
                    t = self.tstop
                    self.tstop = None
                    return self._finish(yout, t, SolveFlag.STOP_TIME_REACHED)
                if (self.tn + self.hprime - self.tstop) * self.h > 0.0:
                    self.hprime = (self.tstop - self.tn) * (1.0 - 4.0 * UROUND)
                    self.eta = self.hprime / self.h

            if one_step:
                nv.copy_into(self.zn[0], self.y)
                return self._finish(yout, self.tn, SolveFlag.SUCCESS)

    def _first_call_setup(self, tout):
        if self.tstop is not None and (tout - self.tn) * (self.tstop - self.tn) > 0 \
                and abs(self.tstop - self.tn) < abs(tout - self.tn) and self.tstop == self.tn:
            raise IllegalInputError("stop time equals the initial time")
        if self._call_rhs(self.tn, self.zn[0], self.zn[1]) != 0:
            raise CallbackError("right-hand side failed at the initial point", self.tn)
        if not self._ewt_set(self.zn[0], self.ewt):
            raise IllegalInputError("initial error weight is nonpositive")
        h = self.hin
        if h != 0.0 and (tout - self.tn) * h < 0.0:
            raise IllegalInputError("initial step has the wrong sign")
        if h == 0.0:
            tout_hin = tout
            if self.tstop is not None and (tout - self.tn) * (tout - self.tstop) > 0:
                tout_hin = self.tstop
            h = self._hin(tout_hin)
        rh = abs(h) * self.hmax_inv
        if rh > 1.0:
            h /= rh
        if abs(h) < self.hmin:
            h *= self.hmin / abs(h)
        if self.tstop is not None:
            if (self.tstop - self.tn) * h <= 0.0:
                raise IllegalInputError("stop time is behind the initial time")
            if (self.tn + h - self.tstop) * h > 0.0:
                h = (self.tstop - self.tn) * (1.0 - 4.0 * UROUND)
        self.h = self.hscale = self.hprime = h
        self.next_h = h
        nv.scale(h, self.zn[1], self.zn[1])
        if self.roots is not None:
            self._root_guard_start()

    # ---------------------------------------------------------- one step

    def _step(self):
        saved_t = self.tn
        ncf = nef = 0
        nflag = _FIRST_CALL
        if self.nst > 0 and self.hprime != self.h:
            self._adjust_params()
        while True:
            self._predict()
            self._set_coeffs()
            nflag = self._nls(nflag)
            kflag, nflag, ncf = self._handle_nflag(nflag, saved_t, ncf)
            if kflag == _PREDICT_AGAIN:
                continue
            ok, nflag, nef, dsm = self._error_test(nflag, saved_t, nef)
            if not ok:
                continue
            break
        self._complete_step()
        self._prepare_next_step(dsm)
        self.etamax = ETAMX2 if self.nst <= SMALL_NST else ETAMX3
        nv.scale(self.tq[2], self.acor, self.acor)

    def _adjust_params(self):
        if self.qprime != self.q:
            self._adjust_order(self.qprime - self.q)
            self.q = self.qprime
            self.L = self.q + 1
            self.qwait = self.L
        self._rescale()

    def _adjust_order(self, deltaq):
        if self.q == 2 and deltaq != 1:
            return
        if self.method == ADAMS:
            self._adjust_adams(deltaq)
        elif deltaq == 1:
            self._increase_bdf()
        else:
            self._decrease_bdf()

    def _adjust_adams(self, deltaq):
        q, l, zn = self.q, self.l, self.zn
        if deltaq == 1:
            nv.const_fill(0.0, zn[self.L])
            return
        for i in range(self.qmax + 1):
            l[i] = 0.0
        l[1] = 1.0
        hsum = 0.0
        for j in range(1, q - 1):
            hsum += self.tau[j]
            xi = hsum / self.hscale
            for i in range(j + 1, 0, -1):
                l[i] = l[i] * xi + l[i - 1]
        for j in range(1, q - 1):
            l[j + 1] = q * (l[j] / (j + 1))
        for j in range(2, q):
            nv.linear_sum(-l[j], zn[q], 1.0, zn[j], zn[j])

    def _increase_bdf(self):
        q, l, zn = self.q, self.l, self.zn
        for i in range(self.qmax + 1):
            l[i] = 0.0
        l[2] = alpha1 = prod = xiold = 1.0
        alpha0 = -1.0
        hsum = self.hscale
        if q > 1:
            for j in range(1, q):
                hsum += self.tau[j + 1]
                xi = hsum / self.hscale
                prod *= xi
                alpha0 -= 1.0 / (j + 1)
                alpha1 += 1.0 / xi
                for i in range(j + 2, 1, -1):
                    l[i] = l[i] * xiold + l[i - 1]
                xiold = xi
        A1 = (-alpha0 - alpha1) / prod
        nv.scale(A1, zn[self.indx_acor], zn[self.L])
        for j in range(2, q + 1):
            nv.linear_sum(l[j], zn[self.L], 1.0, zn[j], zn[j])

    def _decrease_bdf(self):
        q, l, zn = self.q, self.l, self.zn
        for i in range(self.qmax + 1):
            l[i] = 0.0
        l[2] = 1.0
        hsum = 0.0
        for j in range(1, q - 1):
            hsum += self.tau[j]
            xi = hsum / self.hscale
            for i in range(j + 2, 1, -1):
                l[i] = l[i] * xi + l[i - 1]
        for j in range(2, q):
            nv.linear_sum(-l[j], zn[q], 1.0, zn[j], zn[j])

    def _rescale(self):
        factor = self.eta
        for j in range(1, self.q + 1):
            nv.scale(factor, self.zn[j], self.zn[j])
            factor *= self.eta
        self.h = self.hscale * self.eta
        self.next_h = self.h
        self.hscale = self.h
        self.nscon = 0

    def _predict(self):
        self.tn += self.h
        if self.tstop is not None and (self.tn - self.tstop) * self.h > 0.0:
            self.tn = self.tstop
        zn = self.zn
        for k in range(1, self.q + 1):
            for j in range(self.q, k - 1, -1):
                nv.linear_sum(1.0, zn[j - 1], 1.0, zn[j], zn[j - 1])

    def _restore(self, saved_t):
        self.tn = saved_t
        zn = self.zn
        for k in range(1, self.q + 1):
            for j in range(self.q, k - 1, -1):
                nv.linear_sum(1.0, zn[j - 1], -1.0, zn[j], zn[j - 1])

    # coefficient computation -------------------------------------------

    def _set_coeffs(self):
        if self.method == ADAMS:
            self._set_adams()
        else:
            self._set_bdf()
        self.rl1 = 1.0 / self.l[1]
        self.gamma = self.h * self.rl1
        if self.nst == 0:
            self.gammap = self.gamma
        self.gamrat = self.gamma / self.gammap if self.nst > 0 else 1.0

    @staticmethod
    def _alt_sum(iend, a, k):
        if iend < 0:
            return 0.0
        s, sign = 0.0, 1
        for i in range(iend + 1):
            s += sign * (a[i] / (i + k))
            sign = -sign
        return s

    def _set_adams(self):
        q, l, tq = self.q, self.l, self.tq
        if q == 1:
            l[0] = l[1] = tq[1] = tq[5] = 1.0
            tq[2] = 0.5
            tq[3] = 1.0 / 12.0
            tq[4] = CORTES / tq[2]
            return
        m = [0.0] * (self.qmax + 2)
        hsum = self._adams_start(m)
        M0 = self._alt_sum(q - 1, m, 1)
        M1 = self._alt_sum(q - 1, m, 2)
        self._adams_finish(m, M0, M1, hsum)

    def _adams_start(self, m):
        q = self.q
        hsum = self.h
        m[0] = 1.0
        for i in range(1, q + 1):
            m[i] = 0.0
        for j in range(1, q):
            if j == q - 1 and self.qwait == 1:
                s = self._alt_sum(q - 2, m, 2)
                self.tq[1] = q * s / m[q - 2]
            xi_inv = self.h / hsum
            for i in range(j, 0, -1):
                m[i] += m[i - 1] * xi_inv
            hsum += self.tau[j]
        return hsum

    def _adams_finish(self, m, M0, M1, hsum):
        q, l, tq = self.q, self.l, self.tq
        M0_inv = 1.0 / M0
        l[0] = 1.0
        for i in range(1, q + 1):
            l[i] = M0_inv * (m[i - 1] / i)
        xi = hsum / self.h
        xi_inv = 1.0 / xi
        tq[2] = M1 * M0_inv / xi
        tq[5] = xi / l[q]
        if self.qwait == 1:
            for i in range(q, 0, -1):
                m[i] += m[i - 1] * xi_inv
            M2 = self._alt_sum(q, m, 2)
            tq[3] = M2 * M0_inv / self.L
        tq[4] = CORTES / tq[2]

    def _set_bdf(self):
        q, l = self.q, self.l
        l[0] = l[1] = xi_inv = xistar_inv = 1.0
        for i in range(2, q + 1):
            l[i] = 0.0
        alpha0 = alpha0_hat = -1.0
        hsum = self.h
        if q > 1:
            for j in range(2, q):
                hsum += self.tau[j - 1]
                xi_inv = self.h / hsum
                alpha0 -= 1.0 / j
                for i in range(j, 0, -1):
                    l[i] += l[i - 1] * xi_inv
            alpha0 -= 1.0 / q
            xistar_inv = -l[1] - alpha0
            hsum += self.tau[q - 1]
            xi_inv = self.h / hsum
            alpha0_hat = -l[1] - xi_inv
            for i in range(q, 0, -1):
                l[i] += l[i - 1] * xistar_inv
        self._set_tq_bdf(hsum, alpha0, alpha0_hat, xi_inv, xistar_inv)

    def _set_tq_bdf(self, hsum, alpha0, alpha0_hat, xi_inv, xistar_inv):
        q, l, tq = self.q, self.l, self.tq
        A1 = 1.0 - alpha0_hat + alpha0
        A2 = 1.0 + q * A1
        tq[2] = abs(A1 / (alpha0 * A2))
        tq[5] = abs(A2 * xistar_inv / (l[q] * xi_inv))
        if self.qwait == 1:
            if q > 1:
                C = xistar_inv / l[q]
                A3 = alpha0 + 1.0 / q
                A4 = alpha0_hat + xi_inv
                Cpinv = (1.0 - A4 + A3) / A3
                tq[1] = abs(C * Cpinv)
            else:
                tq[1] = 1.0
            hsum += self.tau[q]
            xi_inv = self.h / hsum
            A5 = alpha0 - 1.0 / (q + 1)
            A6 = alpha0_hat - xi_inv
            Cppinv = (1.0 - A6 + A5) / A2
            tq[3] = abs(Cppinv / (xi_inv * (q + 2) * A5))
        tq[4] = CORTES / tq[2]

    # nonlinear iteration -------------------------------------------------

    def _nls(self, nflag):
        if isinstance(self.iteration, Functional):
            return self._nls_functional()
        return self._nls_newton(nflag)

    def _nls_functional(self):
        self.crate = 1.0
        m = 0
        if self._call_rhs(self.tn, self.zn[0], self.tempv) != 0:
            return _CONV_RECVR
        nv.const_fill(0.0, self.acor)
        delp = 0.0
        while True:
            self.stats.num_nonlin_iters += 1
            nv.linear_sum(self.h, self.tempv, -1.0, self.zn[1], self.tempv)
            nv.scale(self.rl1, self.tempv, self.tempv)
            nv.linear_sum(1.0, self.zn[0], 1.0, self.tempv, self.y)
            nv.linear_sum(1.0, self.tempv, -1.0, self.acor, self.acor)
            dl = nv.wrms_norm(self.acor, self.ewt)
            nv.scale(1.0, self.tempv, self.acor)
            if m > 0:
                self.crate = max(CRDOWN * self.crate, dl / delp)
            dcon = dl * min(1.0, self.crate) / self.tq[4]
            if dcon <= 1.0:
                self.acnrm = dl if m == 0 else nv.wrms_norm(self.acor, self.ewt)
                return _SUCCESS
            m += 1
            if m == NLS_MAXCOR or (m >= 2 and dl > RDIV * delp):
                return _CONV_RECVR
            delp = dl
            if self._call_rhs(self.tn, self.y, self.tempv) != 0:
                return _CONV_RECVR

    def _nls_newton(self, nflag):
        lin = self.lin
        has_setup = not isinstance(lin, _SpilsLin) or lin.has_setup
        if has_setup:
            convfail = _NO_FAILURES if nflag in (_FIRST_CALL, _PREV_ERR_FAIL) else _FAIL_OTHER
            call_setup = (nflag in (_PREV_CONV_FAIL, _PREV_ERR_FAIL) or self.nst == 0
                          or self.nst >= self.nstlp + MSBP or abs(self.gamrat - 1.0) > DGMAX)
        else:
            self.crate = 1.0
            convfail = _NO_FAILURES
            call_setup = False
        while True:
            if self._call_rhs(self.tn, self.zn[0], self.ftemp) != 0:
                return _CONV_RECVR
            if call_setup:
                self.stats.num_lin_setups += 1
                try:
                    self.jcur = lin.setup(convfail, self.zn[0], self.ftemp)
                except RecoverableFailure:
                    return _CONV_RECVR
                call_setup = False
                self.gamrat = self.crate = 1.0
                self.gammap = self.gamma
                self.nstlp = self.nst
            nv.const_fill(0.0, self.acor)
            nv.copy_into(self.zn[0], self.y)
            ier = self._newton_iteration(has_setup)
            if ier != _TRY_AGAIN:
                return ier
            call_setup = True
            convfail = _FAIL_BAD_J

    def _newton_iteration(self, has_setup):
        self.mnewt = m = 0
        delp = 0.0
        b = self.tempv
        while True:
            nv.linear_sum(self.rl1, self.zn[1], 1.0, self.acor, b)
            nv.linear_sum(self.gamma, self.ftemp, -1.0, b, b)
            self.stats.num_nonlin_iters += 1
            try:
                self.lin.solve(b, self.y, self.ftemp)
            except RecoverableFailure:
                if not self.jcur and has_setup:
                    return _TRY_AGAIN
                return _CONV_RECVR
            dl = nv.wrms_norm(b, self.ewt)
            nv.linear_sum(1.0, self.acor, 1.0, b, self.acor)
            nv.linear_sum(1.0, self.zn[0], 1.0, self.acor, self.y)
            if m > 0:
                self.crate = max(CRDOWN * self.crate, dl / delp)
            dcon = dl * min(1.0, self.crate) / self.tq[4]
            if dcon <= 1.0:
                self.acnrm = dl if m == 0 else nv.wrms_norm(self.acor, self.ewt)
                self.jcur = False
                return _SUCCESS
            m += 1
            self.mnewt = m
            if m == NLS_MAXCOR or (m >= 2 and dl > RDIV * delp):
                if not self.jcur and has_setup:
                    return _TRY_AGAIN
                return _CONV_RECVR
            delp = dl
            if self._call_rhs(self.tn, self.y, self.ftemp) != 0:
                if not self.jcur and has_setup:
                    return _TRY_AGAIN
                return _CONV_RECVR

    def _handle_nflag(self, nflag, saved_t, ncf):
        if nflag == _SUCCESS:
            return _DO_ERROR_TEST, nflag, ncf
        self.stats.num_nonlin_conv_fails += 1
        self._restore(saved_t)
        ncf += 1
        self.etamax = 1.0
        if abs(self.h) <= self.hmin * ONEPSM or ncf == MXNCF:
            raise ConvergenceFailure(
                f"corrector failed to converge {ncf} times (|h| = {abs(self.h):.3e})", self.tn)
        self.eta = max(ETACF, self.hmin / abs(self.h))
        self._rescale()
        return _PREDICT_AGAIN, _PREV_CONV_FAIL, ncf

    def _error_test(self, nflag, saved_t, nef):
        dsm = self.acnrm * self.tq[2]
        if dsm <= 1.0:
            return True, nflag, nef, dsm
        nef += 1
        self.stats.num_error_test_failures += 1
        nflag = _PREV_ERR_FAIL
        self._restore(saved_t)
        if abs(self.h) <= self.hmin * ONEPSM or nef == MXNEF:
            raise ErrorTestFailure(
                f"error test failed {nef} times (|h| = {abs(self.h):.3e})", self.tn)
        self.etamax = 1.0
        if nef <= MXNEF1:
            self.eta = 1.0 / ((BIAS2 * dsm) ** (1.0 / self.L) + ADDON)
            self.eta = max(ETAMIN, max(self.eta, self.hmin / abs(self.h)))
            if nef >= SMALL_NEF:
                self.eta = min(self.eta, ETAMXF)
            self._rescale()
            return False, nflag, nef, dsm
        if self.q > 1:
            self.eta = max(ETAMIN, self.hmin / abs(self.h))
            self._adjust_order(-1)
            self.L = self.q
            self.q -= 1
            self.qwait = self.L
            self._rescale()
            return False, nflag, nef, dsm
        self.eta = max(ETAMIN, self.hmin / abs(self.h))
        self.h *= self.eta
        self.next_h = self.h
        self.hscale = self.h
        self.qwait = LONG_WAIT
        self.nscon = 0
        if self._call_rhs(self.tn, self.zn[0], self.tempv) != 0:
            raise CallbackError("right-hand side failed after repeated error test failures", self.tn)
        nv.scale(self.h, self.tempv, self.zn[1])
        return False, nflag, nef, dsm

    def _complete_step(self):
        self.nst += 1
        self.stats.num_steps += 1
        self.nscon += 1
        self.hu = self.h
        self.qu = self.q
        for i in range(self.q, 1, -1):
            self.tau[i] = self.tau[i - 1]
        if self.q == 1 and self.nst > 1:
            self.tau[2] = self.tau[1]
        self.tau[1] = self.h
        for j in range(self.q + 1):
            nv.linear_sum(self.l[j], self.acor, 1.0, self.zn[j], self.zn[j])
        self.qwait -= 1
        if self.qwait == 1 and self.q != self.qmax:
            nv.copy_into(self.acor, self.zn[self.qmax])
            self.saved_tq5 = self.tq[5]
            self.indx_acor = self.qmax

    def _prepare_next_step(self, dsm):
        if self.etamax == 1.0:
            self.qwait = max(self.qwait, 2)
            self.qprime = self.q
            self.hprime = self.h
            self.eta = 1.0
            return
        self.etaq = 1.0 / ((BIAS2 * dsm) ** (1.0 / self.L) + ADDON)
        if self.qwait != 0:
            self.eta = self.etaq
            self.qprime = self.q
            self._set_eta()
            return
        self.qwait = 2
        etaqm1 = self._eta_qm1()
        etaqp1 = self._eta_qp1()
        self._choose_eta(etaqm1, etaqp1)
        self._set_eta()

    def _set_eta(self):
        if self.eta < THRESH:
            self.eta = 1.0
            self.hprime = self.h
        else:
            self.eta = min(self.eta, self.etamax)
            self.eta /= max(1.0, abs(self.h) * self.hmax_inv * self.eta)
            self.hprime = self.h * self.eta
            if self.qprime < self.q:
                self.nscon = 0

    def _eta_qm1(self):
        if self.q > 1:
            ddn = nv.wrms_norm(self.zn[self.q], self.ewt) * self.tq[1]
            return 1.0 / ((BIAS1 * ddn) ** (1.0 / self.q) + ADDON)
        return 0.0

    def _eta_qp1(self):
        if self.q != self.qmax:
            if self.saved_tq5 == 0.0:
                return 0.0
            cquot = (self.tq[5] / self.saved_tq5) * (self.h / self.tau[2]) ** self.L
            nv.linear_sum(-cquot, self.zn[self.qmax], 1.0, self.acor, self.tempv)
            dup = nv.wrms_norm(self.tempv, self.ewt) * self.tq[3]
            return 1.0 / ((BIAS3 * dup) ** (1.0 / (self.L + 1)) + ADDON)
        return 0.0

    def _choose_eta(self, etaqm1, etaqp1):
        etam = max(etaqm1, self.etaq, etaqp1)
        if etam < THRESH:
            self.eta = 1.0
            self.qprime = self.q
            return
        if etam == self.etaq:
            self.eta, self.qprime = self.etaq, self.q
        elif etam == etaqm1:
            self.eta, self.qprime = etaqm1, self.q - 1
        else:
            self.eta, self.qprime = etaqp1, self.q + 1
            if self.method == BDF:
                nv.copy_into(self.acor, self.zn[self.qmax])


def init(method, iteration, tolerances, rhs, t0: float, y0: nv.Vector, roots=None) -> OdeSession:
    """Create and initialize a session in one call."""
    return OdeSession(method, iteration, tolerances, rhs, roots).init(t0, y0)
