"""Newton and fixed-point iteration for F(u) = 0 and u = G(u).

Both report a :class:`NonlinearOutcome` rather than raising on divergence,
so that callers can distinguish a recoverable failure from a fatal one.
The final iterate always overwrites the buffer of ``u0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

from . import matrix as mx
from . import vector as nv
from .errors import IllegalInputError, KrylovConvergenceError, RecoverableFailure, SolverError
from .linsolver import DirectSolver, Preconditioner, Spgmr, claim


class Status(enum.Enum):
    CONVERGED = "converged"
    RECOVERABLE_DIVERGENCE = "recoverable_divergence"
    FATAL_ERROR = "fatal_error"


@dataclass
class NonlinearOutcome:
    status: Status
    iterations: int
    final_norm: float
    error: Optional[BaseException] = None

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class NewtonConfig:
    """Newton settings; a linear solver is mandatory.

    ``linear`` is a direct or iterative solver (or its attachment token).
    It is attached when the configuration is built.
    """

    def __init__(self, linear, max_iters: int = 200, tol: float = 1e-8,
                 prec: Preconditioner | None = None):
        if linear is None:
            raise IllegalInputError("Newton iteration requires a linear solver")
        if max_iters < 1 or tol <= 0:
            raise IllegalInputError("max_iters and tol must be positive")
        self.linear = claim(linear)
        self.max_iters, self.tol, self.prec = max_iters, tol, prec


@dataclass
class FixedPointConfig:
    max_iters: int = 200
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1 or self.tol <= 0:
            raise IllegalInputError("max_iters and tol must be positive")


def _unit_weights(u):
    w = nv.clone(u)
    nv.const_fill(1.0, w)
    return w


def newton_solve(F: Callable, J: Callable, u0: nv.Vector, cfg: NewtonConfig,
                 weights: nv.Vector | None = None) -> NonlinearOutcome:
    """Solve F(u) = 0 from the guess ``u0``.

    ``F(u, fval)`` fills the residual payload. With a direct solver
    ``J(u, fu, jmat)`` fills the Jacobian matrix; with SPGMR
    ``J(v, jv, u)`` writes the Jacobian-vector product into payload ``jv``.
    Convergence means the WRMS norm of the next Newton correction is at
    most ``cfg.tol``; ``iterations`` counts applied corrections.
    """
    weights = weights if weights is not None else _unit_weights(u0)
    if nv.min_element(weights) <= 0.0:
        raise IllegalInputError("weights must be positive")
    ls = cfg.linear
    fval = nv.clone(u0)
    delta = nv.clone(u0)
    iters = 0
    dnorm = float("inf")
    try:
        while True:
            F(u0.data, fval.data)
            nv.scale(-1.0, fval, fval)
            if isinstance(ls, DirectSolver):
                jm = ls.matrix
                mx.zero(jm)
                J(u0.data, fval.data, jm)
                ls.setup(jm)
                ls.solve(delta, fval)
            else:
                def atimes(v, z):
                    J(v.data, z.data, u0.data)
                tol = cfg.tol * (len(u0) ** 0.5) / nv.max_norm(weights) * 0.1
                ls.solve(atimes, cfg.prec, delta, fval, tol)
            dnorm = nv.wrms_norm(delta, weights)
            if dnorm <= cfg.tol:
                return NonlinearOutcome(Status.CONVERGED, iters, dnorm)
            if iters >= cfg.max_iters:
                return NonlinearOutcome(Status.RECOVERABLE_DIVERGENCE, iters, dnorm)
            nv.linear_sum(1.0, u0, 1.0, delta, u0)
            iters += 1
    except (RecoverableFailure, KrylovConvergenceError) as exc:
        return NonlinearOutcome(Status.RECOVERABLE_DIVERGENCE, iters, dnorm, exc)
    except SolverError as exc:
        return NonlinearOutcome(Status.FATAL_ERROR, iters, dnorm, exc)


def fixed_point_solve(G: Callable, u0: nv.Vector, cfg: FixedPointConfig,
                      weights: nv.Vector | None = None) -> NonlinearOutcome:
    """Iterate u <- G(u) until successive iterates are within ``cfg.tol``.

    ``G(u, out)`` writes the next iterate into payload ``out``.
    """
    weights = weights if weights is not None else _unit_weights(u0)
    nxt = nv.clone(u0)
    diff = nv.clone(u0)
    dnorm = float("inf")
    try:
        for k in range(1, cfg.max_iters + 1):
            G(u0.data, nxt.data)
            nv.linear_sum(1.0, nxt, -1.0, u0, diff)
            dnorm = nv.wrms_norm(diff, weights)
            nv.copy_into(nxt, u0)
            if dnorm <= cfg.tol:
                return NonlinearOutcome(Status.CONVERGED, k, dnorm)
    except RecoverableFailure as exc:
        return NonlinearOutcome(Status.RECOVERABLE_DIVERGENCE, k, dnorm, exc)
    except SolverError as exc:
        return NonlinearOutcome(Status.FATAL_ERROR, k, dnorm, exc)
    return NonlinearOutcome(Status.RECOVERABLE_DIVERGENCE, cfg.max_iters, dnorm)
