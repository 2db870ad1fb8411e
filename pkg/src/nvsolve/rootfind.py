"""Zero-crossing detection and Illinois-secant refinement within one step."""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CallbackError, IllegalInputError

UROUND = sys.float_info.epsilon


class RootDirection(enum.IntEnum):
    """Which sign changes count: values mirror the sign of g' at the root."""

    INCREASING = 1
    DECREASING = -1
    BOTH = 0


INCREASING, DECREASING, BOTH = RootDirection.INCREASING, RootDirection.DECREASING, RootDirection.BOTH

# flags reported per root function
NO_ROOT, RISING, FALLING = 0, 1, -1


@dataclass
class RootSpec:
    """``nroots`` functions evaluated together by ``g(t, ..., gout)``.

    ``g`` must not have side effects: it is called at trial points.
    """

    nroots: int
    g: Callable

    def __post_init__(self):
        if self.nroots < 1:
            raise IllegalInputError("nroots must be positive")


@dataclass
class RootStatus:
    found: bool
    t: float
    g: np.ndarray
    flags: list = field(default_factory=list)
    bracket: tuple = (0.0, 0.0)


def refinement_width(t_lo: float, t_hi: float) -> float:
    return 100.0 * UROUND * max(abs(t_lo), abs(t_hi), abs(t_hi - t_lo))


def _check_finite(g):
    if not np.all(np.isfinite(g)):
        raise CallbackError("root function returned non-finite values")


def _scan(glo, gnew, dirs, active):
    """Return (index of strongest sign change or -1, zero seen)."""
    imax, maxfrac, zroot = -1, 0.0, False
    for i in range(len(glo)):
        if not active[i]:
            continue
        if gnew[i] == 0.0:
            if dirs[i] * glo[i] <= 0.0:
                zroot = True
        elif glo[i] * gnew[i] < 0.0 and dirs[i] * glo[i] <= 0.0:
            gfrac = abs(gnew[i] / (gnew[i] - glo[i]))
            if gfrac > maxfrac:
                maxfrac, imax = gfrac, i
    return imax, zroot


def scan_step(t_lo: float, t_hi: float, g_lo: Sequence[float], g_hi: Sequence[float],
              g_eval: Callable[[float], np.ndarray], directions: Sequence[int],
              active: Sequence[bool] | None = None, ttol: float | None = None) -> RootStatus:
    """Locate the earliest permitted sign change of ``g`` on ``[t_lo, t_hi]``.

    ``g_eval(t)`` returns the root function values at ``t`` (typically via
    the integrator's interpolant). ``directions[i]`` is +1 to keep only
    rising crossings, -1 for falling ones, 0 for both. Refinement uses the
    Illinois-modified secant method until the bracket is narrower than
    ``ttol`` (default :func:`refinement_width`). The returned time is the
    upper end of the final bracket; all functions crossing there are flagged.
    """
    glo = np.array(g_lo, dtype=float)
    ghi = np.array(g_hi, dtype=float)
    _check_finite(glo)
    _check_finite(ghi)
    n = glo.size
    dirs = np.array([int(d) for d in directions], dtype=float)
    if dirs.size != n:
        raise IllegalInputError("one direction per root function is required")
    active = np.ones(n, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    if ttol is None:
        ttol = refinement_width(t_lo, t_hi)
    tlo, thi = t_lo, t_hi

    imax, zroot = _scan(glo, ghi, dirs, active)
    if imax < 0:
        if not zroot:
            return RootStatus(False, t_hi, ghi, [NO_ROOT] * n, (t_lo, t_hi))
        return RootStatus(True, t_hi, ghi, _flags(glo, ghi, dirs, active), (t_lo, t_hi))

    alph = 1.0
    side, sideprev = 0, -1
    exact = False
    while abs(thi - tlo) > ttol:
        if sideprev == side:
            alph = alph * 2.0 if side == 2 else alph * 0.5
        else:
            alph = 1.0
        tmid = thi - (thi - tlo) * ghi[imax] / (ghi[imax] - alph * glo[imax])
        if abs(tmid - tlo) < 0.5 * ttol:
            fracint = abs(thi - tlo) / ttol
            fracsub = 0.1 if fracint > 5.0 else 0.5 / fracint
            tmid = tlo + fracsub * (thi - tlo)
        if abs(thi - tmid) < 0.5 * ttol:
            fracint = abs(thi - tlo) / ttol
            fracsub = 0.1 if fracint > 5.0 else 0.5 / fracint
            tmid = thi - fracsub * (thi - tlo)
        gmid = np.array(g_eval(tmid), dtype=float)
        _check_finite(gmid)
        sideprev = side
        imid, zmid = _scan(glo, gmid, dirs, active)
        if imid >= 0:
            thi, ghi, side, imax = tmid, gmid, 1, imid
            continue
        if zmid:
            thi, ghi, exact = tmid, gmid, True
            break
        tlo, glo, side = tmid, gmid, 2

    # an exact zero needs no bracket; flags still come from the lower end
    bracket = (thi, thi) if exact else (tlo, thi)
    return RootStatus(True, thi, ghi, _flags(glo, ghi, dirs, active), bracket)


def _flags(glo, ghi, dirs, active):
    flags = []
    for i in range(len(glo)):
        f = NO_ROOT
        if active[i] and dirs[i] * glo[i] <= 0.0:
            if ghi[i] == 0.0 or glo[i] * ghi[i] < 0.0:
                f = FALLING if glo[i] > 0.0 else RISING
        flags.append(f)
    return flags


class RootTracker:
    """Per-session root bookkeeping: last bracket end, values, active mask.

    The integrators call :meth:`start` at (re)initialization with the root
    values at the start point and at a point one guard width later. A
    function that is zero at the start, or changes sign within the guard
    width, is measured from the guard point instead, so a root located at
    the end of the previous segment is not reported again.
    """

    def __init__(self, spec: RootSpec):
        self.spec = spec
        self.directions = [BOTH] * spec.nroots
        self.active = np.ones(spec.nroots, dtype=bool)
        self.tlo = 0.0
        self.glo = np.zeros(spec.nroots)
        self.last_found = False

    def start(self, t0, g0, g_guard):
        _check_finite(g0)
        self.tlo = t0
        self.glo = np.array(g0, dtype=float)
        self.active[:] = True
        for i in range(self.spec.nroots):
            near = self.glo[i] == 0.0 or (g_guard is not None and self.glo[i] * g_guard[i] < 0.0)
            if near:
                if g_guard is not None and g_guard[i] != 0.0:
                    self.glo[i] = g_guard[i]
                else:
                    self.active[i] = False
        self.last_found = False

    def check(self, thi, ghi, g_eval, ttol) -> RootStatus:
        st = scan_step(self.tlo, thi, self.glo, ghi, g_eval, self.directions, self.active, ttol)
        # functions parked at zero become active once they leave it
        for i in range(self.spec.nroots):
            if not self.active[i] and st.g[i] != 0.0:
                self.active[i] = True
        self.tlo = st.t
        self.glo = np.array(st.g, dtype=float)
        self.last_found = st.found
        return st
