"""The bouncing-pendulum example in polar (ODE) and Cartesian (DAE) form.

A unit mass on a rigid rod of length r swings under gravity from the
horizontal and hits an inclined wall at angle -pi/6, where its velocity is
multiplied by k. Each program writes one tab-separated row per output time:
``t, x, y`` plus optional debug columns (energy for polar, rod pull p for
Cartesian). Reals use 17 significant digits so that runs can be compared
byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from . import dae, ode
from . import linsolver as ls
from . import matrix as mx
from . import vector as nv
from .errors import IllegalInputError
from .rootfind import INCREASING

R, G, K = 1.0, 9.8, -0.5
PI = 4.0 * math.atan(1.0)

THETA, THETA_P = 0, 1
X, Y, VX, VY, P = 0, 1, 2, 3, 4
VX_X, VY_Y, ACC_X, ACC_Y, CONSTR = 0, 1, 2, 3, 4

POLAR_SOLVERS = ("functional", "dense", "custom-dense", "diag", "spgmr", "band")
CARTESIAN_SOLVERS = ("dense", "custom-dense", "band")
VECTOR_KINDS = ("serial", "custom", "threaded")


@dataclass
class PendulumConfig:
    r: float = R
    g: float = G
    k: float = K
    t_end: float = 10.0
    dt: float = 0.01
    rtol: Optional[float] = None
    atol: Optional[float] = None
    vector: str = "serial"
    linsolver: Optional[str] = None
    debug_cols: bool = False

    def __post_init__(self):
        if not self.r > 0:
            raise IllegalInputError("rod length must be positive")
        if not abs(self.k) < 1:
            raise IllegalInputError("|k| must be below 1")
        if not self.dt > 0:
            raise IllegalInputError("dt must be positive")
        for name in ("rtol", "atol"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise IllegalInputError(f"{name} must be nonnegative")
        if self.vector not in VECTOR_KINDS:
            raise IllegalInputError(f"unknown vector kind {self.vector!r}")

    def tolerances(self, default):
        if self.rtol is None and self.atol is None:
            return default
        rtol = self.rtol if self.rtol is not None else default.rtol
        atol = self.atol if self.atol is not None else default.atol
        return ode.SStolerances(rtol, atol)


@dataclass
class Bounce:
    t: float
    speed_before: float
    speed_after: float


@dataclass
class RunSummary:
    rows: int = 0
    bounces: list = field(default_factory=list)
    stats: object = None


def format_row(values) -> str:
    return "\t".join(f"{float(v):.16e}" for v in values) + "\n"


def make_vector(kind: str, values) -> nv.Vector:
    arr = np.array(values, dtype=np.float64)
    if kind == "serial":
        return nv.serial(arr)
    if kind == "threaded":
        return nv.threaded(arr, nchunks=2)
    return nv.pylist(arr)


# A direct solver written against the user-level interface. It factors the
# same dense matrix with the same kernels as the built-in one, so both give
# identical results.

def _cdls_init(state):
    state["lu"] = None
    state["piv"] = None


def _cdls_setup(state, a):
    lu = np.array(a.as_array(), dtype=np.float64)
    state["piv"] = ls.dense_getrf(lu)
    state["lu"] = lu


def _cdls_solve(state, matrix, x, b):
    work = np.array(b, dtype=np.float64)
    ls.dense_getrs(state["lu"], state["piv"], work)
    for i, v in enumerate(work):
        x[i] = float(v)


def _cdls_space(state):
    n = 0 if state["lu"] is None else state["lu"].shape[0]
    return n * n, n


CUSTOM_DENSE_OPS = ls.DlsOps(setup=_cdls_setup, solve=_cdls_solve, init=_cdls_init,
                             work_space=_cdls_space)


def custom_dense(n: int) -> ls.CustomDirect:
    return ls.make_custom_dls(CUSTOM_DENSE_OPS, {}, mx.DenseMatrix(n))


# ------------------------------------------------------------------ polar


def polar_problem(cfg: PendulumConfig):
    g, pi = cfg.g, PI

    def rhs(t, y, yd):
        yd[THETA] = y[THETA_P]
        yd[THETA_P] = -g * math.sin(y[THETA])

    def roots(t, y, r):
        r[0] = -pi / 6.0 - y[THETA]

    def jac(args, J):
        a = J.unwrap() if isinstance(J, mx.DenseMatrix) else None
        if a is not None:
            a[THETA_P, THETA] = 1.0
            a[THETA, THETA_P] = -g * math.cos(args.y[THETA])
        else:
            J[THETA, THETA_P] = 1.0
            J[THETA_P, THETA] = -g * math.cos(args.y[THETA])

    return rhs, roots, jac


def polar_energy(theta: float, theta_p: float, g: float = G) -> float:
    return 0.5 * theta_p * theta_p - g * math.cos(theta)


def _polar_session(cfg, y, rhs, roots, jac):
    kind = cfg.linsolver or "functional"
    if kind not in POLAR_SOLVERS:
        raise IllegalInputError(f"unknown polar linear solver {kind!r}")
    tols = cfg.tolerances(ode.default_tolerances)
    if kind == "functional":
        return ode.init(ode.ADAMS, ode.Functional(), tols, rhs, 0.0, y, roots=(1, roots))
    if kind == "dense":
        lin = ode.Dls(ls.dense(y, mx.DenseMatrix(2)), jac)
    elif kind == "custom-dense":
        lin = ode.Dls(custom_dense(2), jac)
    elif kind == "band":
        lin = ode.Dls(ls.band(y, mx.BandMatrix(2, 1, 1)), jac)
    elif kind == "diag":
        lin = ode.diag_solver()
    else:
        lin = ode.Spils(ls.spgmr(maxl=2))
    return ode.init(ode.BDF, ode.Newton(lin), tols, rhs, 0.0, y, roots=(1, roots))


def run_polar(cfg: PendulumConfig, out: TextIO) -> RunSummary:
    """Simulate the polar model, writing one row every ``cfg.dt``."""
    rhs, roots, jac = polar_problem(cfg)
    y = make_vector(cfg.vector, [PI / 2.0, 0.0])
    s = _polar_session(cfg, y, rhs, roots, jac)
    s.set_stop_time(cfg.t_end)
    s.set_all_root_directions(INCREASING)
    summary = RunSummary()

    def stepto(tnext, t):
        while t < tnext:
            res = s.solve_normal(tnext, y)
            if res.flag is not ode.SolveFlag.ROOTS_FOUND:
                return res.t
            before = y.data[THETA_P]
            y.data[THETA_P] = cfg.k * y.data[THETA_P]
            summary.bounces.append(Bounce(res.t, before, y.data[THETA_P]))
            s.reinit(res.t, y)
            t = res.t
        return t

    t = 0.0
    while t < cfg.t_end:
        th, thp = y.data[THETA], y.data[THETA_P]
        row = [t, cfg.r * math.sin(th), -cfg.r * math.cos(th)]
        if cfg.debug_cols:
            row.append(polar_energy(th, thp, cfg.g))
        out.write(format_row(row))
        summary.rows += 1
        t = stepto(t + cfg.dt, t)
    summary.stats = s.get_stats()
    return summary


# -------------------------------------------------------------- cartesian


def cartesian_problem(cfg: PendulumConfig):
    g, pi = cfg.g, PI

    def residual(t, v, vp, res):
        res[VX_X] = v[VX] - vp[X]
        res[VY_Y] = v[VY] - vp[Y]
        res[ACC_X] = vp[VX] - v[P] * v[X]
        res[ACC_Y] = vp[VY] - v[P] * v[Y] + g
        res[CONSTR] = v[X] * vp[VX] + v[Y] * vp[VY] + v[VX] * vp[X] + v[VY] * vp[Y]

    def jac(args, out):
        v, vp, c = args.jac_y, args.jac_y_prime, args.jac_coef
        if isinstance(out, mx.DenseMatrix):
            o = out.unwrap()

            def put(col, row, val):
                o[col, row] = val
        else:
            def put(col, row, val):
                out[row, col] = val
        put(X, VX_X, -c)
        put(Y, VY_Y, -c)
        put(VX, VX_X, 1.0)
        put(VY, VY_Y, 1.0)
        put(X, ACC_X, -v[P])
        put(Y, ACC_Y, -v[P])
        put(VX, ACC_X, c)
        put(VY, ACC_Y, c)
        put(P, ACC_X, -v[X])
        put(P, ACC_Y, -v[Y])
        put(X, CONSTR, c * v[VX] + vp[VX])
        put(Y, CONSTR, c * v[VY] + vp[VY])
        put(VX, CONSTR, c * v[X] + vp[X])
        put(VY, CONSTR, c * v[Y] + vp[Y])

    def roots(t, v, vp, r):
        r[0] = v[X] - v[Y] * (math.sin(-pi / 6.0) / -math.cos(-pi / 6.0))

    return residual, roots, jac


def run_cartesian(cfg: PendulumConfig, out: TextIO) -> RunSummary:
    """Simulate the Cartesian DAE model, writing one row every ``cfg.dt``."""
    residual, roots, jac = cartesian_problem(cfg)
    kind = cfg.linsolver or "dense"
    if kind not in CARTESIAN_SOLVERS:
        raise IllegalInputError(f"unknown Cartesian linear solver {kind!r}")
    x0, y0 = cfg.r, 0.0
    v = make_vector(cfg.vector, [x0, y0, 0.0, 0.0, 0.0])
    vp = make_vector(cfg.vector, [0.0] * 5)
    if kind == "dense":
        solver = ls.dense(v, mx.DenseMatrix(5))
    elif kind == "band":
        solver = ls.band(v, mx.BandMatrix(5, 4, 4))
    else:
        solver = custom_dense(5)
    tols = cfg.tolerances(dae.SStolerances(1e-9, 1e-9))
    s = dae.init(dae.Dls(solver, jac), tols, residual, 0.0, v, vp, roots=(1, roots))
    d, a = dae.VarId.differential, dae.VarId.algebraic
    var_types = make_vector(cfg.vector, [d, d, d, d, a])
    s.set_id(var_types)
    s.set_suppress_alg(True)
    s.set_stop_time(cfg.t_end)
    s.calc_ic_ya_yd_prime(v, vp, var_types, cfg.dt)
    summary = RunSummary()

    def stepto(tnext, t, t_show):
        while t < tnext:
            res = s.solve_normal(tnext, v, vp)
            if res.flag is not dae.SolveFlag.ROOTS_FOUND:
                return res.t
            before = math.hypot(v.data[VX], v.data[VY])
            v.data[VX] = cfg.k * v.data[VX]
            v.data[VY] = cfg.k * v.data[VY]
            summary.bounces.append(Bounce(res.t, before, math.hypot(v.data[VX], v.data[VY])))
            s.reinit(res.t, v, vp)
            s.calc_ic_ya_yd_prime(v, vp, var_types, t_show + cfg.dt)
            t = res.t
        return t

    t = 0.0
    while t < cfg.t_end:
        row = [t, v.data[X], v.data[Y]]
        if cfg.debug_cols:
            row.append(v.data[P])
        out.write(format_row(row))
        summary.rows += 1
        t = stepto(t + cfg.dt, t, t)
    summary.stats = s.get_stats()
    return summary


def diff_outputs(path_a: str, path_b: str) -> Optional[int]:
    """Return None if the files are byte-identical, else the first differing offset."""
    with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
        a, b = fa.read(), fb.read()
    if a == b:
        return None
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n
