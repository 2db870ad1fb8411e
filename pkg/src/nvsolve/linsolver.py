"""Direct (dense/band LU, custom) and iterative (SPGMR) linear solvers.

A solver instance may be attached to at most one session over its whole
lifetime; :meth:`attach` enforces this dynamically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import matrix as mx
from . import vector as nv
from .errors import (
    AlreadyAttachedError,
    CompatibilityError,
    IllegalInputError,
    KrylovConvergenceError,
    SingularMatrixError,
)

# ---------------------------------------------------------------- kernels


def dense_getrf(a: np.ndarray) -> np.ndarray:
    """LU-factor the square array ``a`` in place with partial pivoting.

    Returns the pivot rows. Unit lower factor is stored below the diagonal.
    Raises :class:`SingularMatrixError` on an exactly zero pivot.
    """
    n = a.shape[0]
    piv = np.empty(n, dtype=np.int64)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        piv[k] = p
        if a[p, k] == 0.0:
            raise SingularMatrixError(k)
        if p != k:
            a[[k, p], :] = a[[p, k], :]
        a[k + 1:, k] *= 1.0 / a[k, k]
        if k + 1 < n:
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:])
    return piv


def dense_getrs(a: np.ndarray, piv: np.ndarray, b: np.ndarray) -> None:
    """Solve in place using factors from :func:`dense_getrf`."""
    n = a.shape[0]
    for k in range(n):
        p = piv[k]
        if p != k:
            b[k], b[p] = b[p], b[k]
    for k in range(n - 1):
        b[k + 1:] -= a[k + 1:, k] * b[k]
    for k in range(n - 1, -1, -1):
        b[k] /= a[k, k]
        b[:k] -= a[:k, k] * b[k]


def band_gbtrf(c: np.ndarray, n: int, ml: int, smu: int) -> np.ndarray:
    """Band LU with partial pivoting on column storage ``c[j, smu + i - j]``.

    Fill-in from row interchanges is confined to the ``smu`` upper diagonals.
    """
    piv = np.empty(n, dtype=np.int64)
    for k in range(n):
        last = min(n - 1, k + ml)
        colk = c[k, smu: smu + last - k + 1]
        p = k + int(np.argmax(np.abs(colk)))
        piv[k] = p
        if c[k, smu + p - k] == 0.0:
            raise SingularMatrixError(k)
        jmax = min(n - 1, k + smu)
        if p != k:
            for j in range(k, jmax + 1):
                rk, rp = smu + k - j, smu + p - j
                c[j, rk], c[j, rp] = c[j, rp], c[j, rk]
        if last > k:
            mult = c[k, smu + 1: smu + 1 + last - k]
            mult *= 1.0 / c[k, smu]
            for j in range(k + 1, jmax + 1):
                akj = c[j, smu + k - j]
                if akj != 0.0:
                    c[j, smu + k + 1 - j: smu + last + 1 - j] -= mult * akj
    return piv


def band_gbtrs(c: np.ndarray, n: int, ml: int, smu: int, piv: np.ndarray, b: np.ndarray) -> None:
    for k in range(n):
        p = piv[k]
        if p != k:
            b[k], b[p] = b[p], b[k]
        last = min(n - 1, k + ml)
        if last > k:
            b[k + 1: last + 1] -= c[k, smu + 1: smu + 1 + last - k] * b[k]
    for k in range(n - 1, -1, -1):
        b[k] /= c[k, smu]
        first = max(0, k - smu)
        if first < k:
            b[first:k] -= c[k, smu - (k - first): smu] * b[k]


# ------------------------------------------------------------ attachment


@dataclass
class AttachmentToken:
    solver: Any
    consumed: bool = False

    def consume(self):
        if self.consumed:
            raise AlreadyAttachedError("attachment token already used by a session")
        self.consumed = True
        return self.solver


class _Attachable:
    attached = False

    def attach(self) -> AttachmentToken:
        if self.attached:
            raise AlreadyAttachedError(
                f"{type(self).__name__} instance is already associated with a session"
            )
        self.attached = True
        return AttachmentToken(self)


def claim(solver_or_token):
    """Resolve what a session receives into an attached solver."""
    if isinstance(solver_or_token, AttachmentToken):
        return solver_or_token.consume()
    solver_or_token.attach().consume()
    return solver_or_token


# -------------------------------------------------------------- direct


class DirectSolver(_Attachable):
    """Common surface of the direct solvers.

    ``matrix`` is the storage template the owning session fills with the
    Newton matrix before calling :meth:`setup`.
    """

    needs_serial = True

    def __init__(self, matrix):
        self.matrix = matrix
        self.num_setups = 0
        self.num_solves = 0

    def check_vector(self, y: nv.Vector):
        if self.needs_serial and not y.backend.serial_representation:
            raise CompatibilityError(
                f"{type(self).__name__} requires serial-representation vectors, got {y.backend}"
            )
        if len(y) != self.matrix.rows:
            raise CompatibilityError(
                f"matrix dimension {self.matrix.rows} differs from vector length {len(y)}"
            )

    def work_space(self):
        return mx.space(self.matrix)


class DenseLU(DirectSolver):
    def __init__(self, matrix: mx.DenseMatrix):
        if not isinstance(matrix, mx.DenseMatrix):
            raise CompatibilityError("DenseLU needs a dense matrix")
        if matrix.rows != matrix.cols:
            raise CompatibilityError("DenseLU needs a square matrix")
        super().__init__(matrix)
        n = matrix.rows
        self._lu = np.zeros((n, n))
        self._piv = np.arange(n)
        self._factored = False

    def setup(self, a: mx.DenseMatrix):
        self._lu[:, :] = a.as_array()
        self._factored = False
        self.num_setups += 1
        self._piv = dense_getrf(self._lu)
        self._factored = True

    def solve(self, x: nv.Vector, b: nv.Vector):
        if not self._factored:
            raise IllegalInputError("solve called before a successful setup")
        xa = nv.serial_data(x)
        if x is not b:
            xa[:] = nv.serial_data(b)
        dense_getrs(self._lu, self._piv, xa)
        self.num_solves += 1

    def work_space(self):
        n = self.matrix.rows
        return 2 * n * n, n


class BandLU(DirectSolver):
    def __init__(self, matrix: mx.BandMatrix):
        if not isinstance(matrix, mx.BandMatrix):
            raise CompatibilityError("BandLU needs a band matrix")
        super().__init__(matrix)
        n = matrix.n
        self._work = mx.BandMatrix(n, matrix.mu, matrix.ml, min(n - 1, matrix.mu + matrix.ml))
        self._piv = np.arange(n)
        self._factored = False

    def setup(self, a: mx.BandMatrix):
        a.copy_to(self._work)
        self._factored = False
        self.num_setups += 1
        w = self._work
        self._piv = band_gbtrf(w.columns(), w.n, w.ml, w.smu)
        self._factored = True

    def solve(self, x, b):
        if not self._factored:
            raise IllegalInputError("solve called before a successful setup")
        xa = nv.serial_data(x)
        if x is not b:
            xa[:] = nv.serial_data(b)
        w = self._work
        band_gbtrs(w.columns(), w.n, w.ml, w.smu, self._piv, xa)
        self.num_solves += 1

    def work_space(self):
        return 2 * self._work.data.size, self._work.n


@dataclass(frozen=True)
class DlsOps:
    """User implementation of a direct solver.

    ``setup(state, matrix)`` factors; ``solve(state, matrix, x, b)`` writes
    the solution payload ``x`` from payload ``b``.
    """

    setup: Callable[[Any, Any], None]
    solve: Callable[[Any, Any, Any, Any], None]
    init: Optional[Callable[[Any], None]] = None
    work_space: Optional[Callable[[Any], tuple]] = None


class CustomDirect(DirectSolver):
    needs_serial = False

    def __init__(self, ops: DlsOps, state, matrix):
        super().__init__(matrix)
        self.ops, self.state = ops, state

    def attach(self):
        token = super().attach()
        if self.ops.init is not None:
            self.ops.init(self.state)
        return token

    def setup(self, a):
        self.num_setups += 1
        self.ops.setup(self.state, a)

    def solve(self, x, b):
        self.num_solves += 1
        self.ops.solve(self.state, self.matrix, x.data, b.data)

    def work_space(self):
        if self.ops.work_space is None:
            return 0, 0
        return self.ops.work_space(self.state)


def dense(y: nv.Vector, matrix: mx.DenseMatrix) -> DenseLU:
    """Dense LU solver for vectors like ``y`` (used only for checking)."""
    s = DenseLU(matrix)
    s.check_vector(y)
    return s


def band(y: nv.Vector, matrix: mx.BandMatrix) -> BandLU:
    s = BandLU(matrix)
    s.check_vector(y)
    return s


def make_custom_dls(ops: DlsOps, state, matrix) -> CustomDirect:
    return CustomDirect(ops, state, matrix)


def unwrap_custom(s) -> Any:
    if not isinstance(s, CustomDirect):
        raise TypeError(f"{type(s).__name__} is not a custom direct solver")
    return s.state


# ------------------------------------------------------------ iterative

NONE, LEFT, RIGHT, BOTH = "none", "left", "right", "both"
MODIFIED_GS, CLASSICAL_GS = "modified", "classical"


@dataclass(frozen=True)
class Preconditioner:
    """Preconditioner side plus callbacks.

    ``solve(r, z, left)`` writes z = P^{-1} r for the left (``left=True``)
    or right factor. ``setup`` is optional and its signature depends on the
    consumer (integrators pass their own arguments).
    """

    side: str = NONE
    solve: Optional[Callable] = None
    setup: Optional[Callable] = None

    def __post_init__(self):
        if self.side not in (NONE, LEFT, RIGHT, BOTH):
            raise IllegalInputError(f"unknown preconditioner side {self.side!r}")
        if self.side != NONE and self.solve is None:
            raise IllegalInputError("a preconditioned solver needs a solve function")


def prec_none() -> Preconditioner:
    return Preconditioner()


def prec_left(solve, setup=None) -> Preconditioner:
    return Preconditioner(LEFT, solve, setup)


def prec_right(solve, setup=None) -> Preconditioner:
    return Preconditioner(RIGHT, solve, setup)


def prec_both(solve, setup=None) -> Preconditioner:
    return Preconditioner(BOTH, solve, setup)


@dataclass(frozen=True)
class BandedPrecSpec:
    """Banded difference-quotient preconditioner for serial vectors."""

    mupper: int
    mlower: int
    side: str = LEFT

    def __post_init__(self):
        if self.side not in (LEFT, RIGHT):
            raise IllegalInputError("banded preconditioner is left or right")


def banded_prec(mupper: int, mlower: int, side: str = LEFT) -> BandedPrecSpec:
    return BandedPrecSpec(mupper, mlower, side)


@dataclass
class SpgmrStats:
    iterations: int = 0
    restarts: int = 0
    res_norm: float = 0.0
    num_atimes: int = 0
    num_psolves: int = 0


def _norm2(v):
    return math.sqrt(nv.dot_product(v, v))


class Spgmr(_Attachable):
    """Restarted GMRES with optional left/right preconditioning.

    Scaling vectors are fixed to ones, so ``tol`` bounds the 2-norm of the
    preconditioned residual.
    """

    def __init__(self, maxl: int = 5, max_restarts: int = 0, gs_type: str = MODIFIED_GS):
        if maxl < 1:
            raise IllegalInputError("maxl must be at least 1")
        if max_restarts < 0:
            raise IllegalInputError("max_restarts must be nonnegative")
        if gs_type not in (MODIFIED_GS, CLASSICAL_GS):
            raise IllegalInputError(f"unknown Gram-Schmidt variant {gs_type!r}")
        self.maxl, self.max_restarts, self.gs_type = maxl, max_restarts, gs_type
        self.total_iters = 0
        self._work = None

    def _workspace(self, b):
        if self._work is None or not nv.compatible(self._work[0], b):
            self._work = [nv.clone(b) for _ in range(self.maxl + 3)]
        return self._work

    def _orthogonalize(self, V, l, H):
        w = V[l + 1]
        if self.gs_type == MODIFIED_GS:
            for i in range(l + 1):
                H[i, l] = nv.dot_product(w, V[i])
                nv.linear_sum(1.0, w, -H[i, l], V[i], w)
        else:
            for _ in range(2):
                h = [nv.dot_product(w, V[i]) for i in range(l + 1)]
                for i in range(l + 1):
                    nv.linear_sum(1.0, w, -h[i], V[i], w)
                    H[i, l] += h[i]
        return _norm2(w)

    def solve(self, atimes, prec: Preconditioner, x: nv.Vector, b: nv.Vector, tol: float) -> SpgmrStats:
        """Solve A x = b; ``atimes(v, z)`` must write z = A v.

        Raises :class:`KrylovConvergenceError` when the residual is still
        above ``tol`` after all restarts.
        """
        if tol <= 0:
            raise IllegalInputError("tol must be positive")
        prec = prec or prec_none()
        left = prec.side in (LEFT, BOTH)
        right = prec.side in (RIGHT, BOTH)
        stats = SpgmrStats()
        work = self._workspace(b)
        V = work[: self.maxl + 1]
        vtemp, xcor = work[self.maxl + 1], work[self.maxl + 2]

        def psolve(r, z, is_left):
            stats.num_psolves += 1
            prec.solve(r, z, is_left)

        nv.const_fill(0.0, x)
        if left:
            psolve(b, V[0], True)
        else:
            nv.copy_into(b, V[0])
        rho = rho0 = _norm2(V[0])
        stats.res_norm = rho
        if rho <= tol:
            return stats

        for restart in range(self.max_restarts + 1):
            stats.restarts = restart
            nv.scale(1.0 / rho, V[0], V[0])
            m = self.maxl
            H = np.zeros((m + 1, m))
            cs, sn = np.zeros(m), np.zeros(m)
            g = np.zeros(m + 1)
            g[0] = rho
            converged = False
            used = 0
            for l in range(m):
                stats.iterations += 1
                used = l + 1
                if right:
                    psolve(V[l], vtemp, False)
                    atimes(vtemp, V[l + 1])
                else:
                    atimes(V[l], V[l + 1])
                stats.num_atimes += 1
                if left:
                    psolve(V[l + 1], vtemp, True)
                    nv.copy_into(vtemp, V[l + 1])
                hnext = self._orthogonalize(V, l, H)
                H[l + 1, l] = hnext
                for i in range(l):
                    t1, t2 = H[i, l], H[i + 1, l]
                    H[i, l] = cs[i] * t1 + sn[i] * t2
                    H[i + 1, l] = -sn[i] * t1 + cs[i] * t2
                r = math.hypot(H[l, l], H[l + 1, l])
                if r == 0.0:
                    raise KrylovConvergenceError(stats.res_norm, stats.iterations)
                cs[l], sn[l] = H[l, l] / r, H[l + 1, l] / r
                H[l, l], H[l + 1, l] = r, 0.0
                g[l + 1] = -sn[l] * g[l]
                g[l] = cs[l] * g[l]
                stats.res_norm = abs(g[l + 1])
                if stats.res_norm <= tol or hnext == 0.0:
                    converged = True
                    break
                nv.scale(1.0 / hnext, V[l + 1], V[l + 1])

            y = np.zeros(used)
            for i in range(used - 1, -1, -1):
                y[i] = (g[i] - H[i, i + 1: used] @ y[i + 1:]) / H[i, i]
            nv.const_fill(0.0, xcor)
            for i in range(used):
                nv.linear_sum(1.0, xcor, y[i], V[i], xcor)
            if right:
                psolve(xcor, vtemp, False)
                nv.copy_into(vtemp, xcor)
            nv.linear_sum(1.0, x, 1.0, xcor, x)
            if converged:
                self.total_iters += stats.iterations
                return stats
            if restart == self.max_restarts:
                break
            atimes(x, vtemp)
            stats.num_atimes += 1
            nv.linear_sum(1.0, b, -1.0, vtemp, vtemp)
            if left:
                psolve(vtemp, V[0], True)
            else:
                nv.copy_into(vtemp, V[0])
            rho = _norm2(V[0])
            stats.res_norm = rho
            if rho <= tol:
                self.total_iters += stats.iterations
                return stats
        self.total_iters += stats.iterations
        raise KrylovConvergenceError(stats.res_norm, stats.iterations, stats.res_norm < rho0)


def spgmr(maxl: int = 5, max_restarts: int = 0, gs_type: str = MODIFIED_GS) -> Spgmr:
    return Spgmr(maxl, max_restarts, gs_type)


def spgmr_solve(s: Spgmr, atimes, prec, x, b, tol) -> SpgmrStats:
    return s.solve(atimes, prec, x, b, tol)
