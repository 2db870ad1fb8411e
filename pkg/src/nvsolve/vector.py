"""Backend-abstracted real vectors.

A :class:`Vector` pairs a payload with the operation table of its backend.
Two built-in backends hold their payload in a contiguous ``float64`` numpy
array (``serial`` and ``threaded``); a custom backend wraps any payload
together with a user supplied :class:`VectorOpsTable`.

Reductions accumulate from low to high index in a single accumulator so
that any backend implementing the textbook loop reproduces the serial
results bit for bit.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import CompatibilityError, IllegalInputError, RepresentationError

BIG_REAL = sys.float_info.max

OPERATIONS = (
    "linear_sum",
    "const_fill",
    "product",
    "quotient",
    "scale",
    "abs",
    "invert",
    "add_constant",
    "dot_product",
    "max_norm",
    "wrms_norm",
    "weighted_l2_norm",
    "l1_norm",
    "min_element",
    "compare_threshold",
    "invert_with_test",
    "constraint_mask",
    "min_quotient",
    "clone",
)


@dataclass(frozen=True)
class BackendId:
    kind: str
    family: str | None = None

    @property
    def serial_representation(self) -> bool:
        """True when the payload is a plain float64 array (serial or threaded)."""
        return self.kind in ("serial", "threaded")

    def __str__(self):
        return self.kind if self.family is None else f"{self.kind}({self.family})"


SERIAL = BackendId("serial")
THREADED = BackendId("threaded")


def _seqsum(a: np.ndarray) -> float:
    # add.accumulate is strictly sequential, unlike add.reduce (pairwise)
    if a.size == 0:
        return 0.0
    return float(np.add.accumulate(a)[-1])


class _ArrayOps:
    """Serial operation set over float64 arrays."""

    def linear_sum(self, a, x, b, y, z):
        np.add(np.multiply(a, x), np.multiply(b, y), out=z)

    def const_fill(self, c, z):
        z.fill(c)

    def product(self, x, y, z):
        np.multiply(x, y, out=z)

    def quotient(self, x, y, z):
        np.divide(x, y, out=z)

    def scale(self, c, x, z):
        np.multiply(c, x, out=z)

    def abs(self, x, z):
        np.abs(x, out=z)

    def invert(self, x, z):
        np.divide(1.0, x, out=z)

    def add_constant(self, x, b, z):
        np.add(x, b, out=z)

    def dot_product(self, x, y):
        return _seqsum(np.multiply(x, y))

    def max_norm(self, x):
        return float(np.max(np.abs(x)))

    def wrms_norm(self, x, w):
        p = np.multiply(x, w)
        return math.sqrt(_seqsum(np.multiply(p, p)) / x.size)

    def weighted_l2_norm(self, x, w):
        p = np.multiply(x, w)
        return math.sqrt(_seqsum(np.multiply(p, p)))

    def l1_norm(self, x):
        return _seqsum(np.abs(x))

    def min_element(self, x):
        return float(np.min(x))

    def compare_threshold(self, c, x, z):
        z[:] = np.where(np.abs(x) >= c, 1.0, 0.0)

    def invert_with_test(self, x, z):
        nz = x != 0.0
        z[nz] = 1.0 / x[nz]
        return bool(nz.all())

    def constraint_mask(self, c, x, m):
        viol = (
            ((c == 2.0) & (x <= 0.0))
            | ((c == 1.0) & (x < 0.0))
            | ((c == -1.0) & (x > 0.0))
            | ((c == -2.0) & (x >= 0.0))
        )
        m[:] = np.where(viol, 1.0, 0.0)
        return not bool(viol.any())

    def min_quotient(self, num, denom):
        nz = denom != 0.0
        if not nz.any():
            return BIG_REAL
        return float(np.min(num[nz] / denom[nz]))

    def clone(self, x):
        return np.array(x, dtype=np.float64, copy=True)


class _ThreadedOps(_ArrayOps):
    """Operation set splitting index ranges over a fixed worker pool.

    Elementwise results are identical to the serial ones. Reductions compute
    one sequential partial per chunk and combine the partials in chunk order.
    Vectors shorter than ``grain`` run the same chunks on the calling thread,
    which gives the same results without the dispatch cost.
    """

    _pools: dict[int, ThreadPoolExecutor] = {}

    def __init__(self, nchunks: int, grain: int = 2048):
        if nchunks < 1:
            raise IllegalInputError("nchunks must be positive")
        self.nchunks = nchunks
        self.grain = grain
        pool = self._pools.get(nchunks)
        if pool is None:
            pool = ThreadPoolExecutor(max_workers=nchunks, thread_name_prefix="nvec")
            self._pools[nchunks] = pool
        self.pool = pool

    def _bounds(self, n):
        edges = np.linspace(0, n, self.nchunks + 1).astype(int)
        return [(int(edges[i]), int(edges[i + 1])) for i in range(self.nchunks)]

    def _each(self, n, fn):
        if n < self.grain:
            return [fn(lo, hi) for lo, hi in self._bounds(n)]
        return list(self.pool.map(lambda lh: fn(*lh), self._bounds(n)))

    def linear_sum(self, a, x, b, y, z):
        def part(lo, hi):
            np.add(np.multiply(a, x[lo:hi]), np.multiply(b, y[lo:hi]), out=z[lo:hi])

        self._each(z.size, part)

    def scale(self, c, x, z):
        def part(lo, hi):
            np.multiply(c, x[lo:hi], out=z[lo:hi])

        self._each(z.size, part)

    def product(self, x, y, z):
        def part(lo, hi):
            np.multiply(x[lo:hi], y[lo:hi], out=z[lo:hi])

        self._each(z.size, part)

    def _reduce(self, n, fn):
        parts = self._each(n, fn)
        total = 0.0
        for p in parts:
            total += p
        return total

    def dot_product(self, x, y):
        return self._reduce(x.size, lambda lo, hi: _seqsum(np.multiply(x[lo:hi], y[lo:hi])))

    def wrms_norm(self, x, w):
        def part(lo, hi):
            p = np.multiply(x[lo:hi], w[lo:hi])
            return _seqsum(np.multiply(p, p))

        return math.sqrt(self._reduce(x.size, part) / x.size)

    def weighted_l2_norm(self, x, w):
        def part(lo, hi):
            p = np.multiply(x[lo:hi], w[lo:hi])
            return _seqsum(np.multiply(p, p))

        return math.sqrt(self._reduce(x.size, part))

    def l1_norm(self, x):
        return self._reduce(x.size, lambda lo, hi: _seqsum(np.abs(x[lo:hi])))


_SERIAL_OPS = _ArrayOps()


@dataclass(frozen=True)
class VectorOpsTable:
    """Callbacks implementing every vector operation over a custom payload.

    Output arguments come last and are written in place, e.g.
    ``linear_sum(a, x, b, y, z)`` stores ``a*x + b*y`` into ``z``.
    ``check(x, y)`` decides whether two payloads may be combined.
    """

    linear_sum: Callable[..., None]
    const_fill: Callable[..., None]
    product: Callable[..., None]
    quotient: Callable[..., None]
    scale: Callable[..., None]
    abs: Callable[..., None]
    invert: Callable[..., None]
    add_constant: Callable[..., None]
    dot_product: Callable[..., float]
    max_norm: Callable[..., float]
    wrms_norm: Callable[..., float]
    weighted_l2_norm: Callable[..., float]
    l1_norm: Callable[..., float]
    min_element: Callable[..., float]
    compare_threshold: Callable[..., None]
    invert_with_test: Callable[..., bool]
    constraint_mask: Callable[..., bool]
    min_quotient: Callable[..., float]
    clone: Callable[[Any], Any]
    check: Callable[[Any, Any], bool]
    family: str = "custom"


class Vector:
    """A payload tagged with its backend.

    Use :func:`serial`, :func:`threaded` or :func:`make_custom` to build one.
    For serial and threaded vectors ``data`` is the underlying float64 array
    and writes through it are visible to the solvers (shared storage).
    """

    __slots__ = ("backend", "data", "_ops")

    def __init__(self, backend: BackendId, data, ops):
        self.backend = backend
        self.data = data
        self._ops = ops

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Vector<{self.backend}>({list(self.data)!r})"

    def to_array(self) -> np.ndarray:
        return np.array(self.data, dtype=np.float64)


def serial(data) -> Vector:
    """Wrap ``data`` as a serial vector; float64 arrays are shared, not copied."""
    if isinstance(data, np.ndarray) and data.dtype == np.float64 and data.ndim == 1:
        arr = data
    else:
        arr = np.array(data, dtype=np.float64).reshape(-1)
    return Vector(SERIAL, arr, _SERIAL_OPS)


def threaded(data, nchunks: int = 4, grain: int = 2048) -> Vector:
    v = serial(data)
    return Vector(THREADED, v.data, _ThreadedOps(nchunks, grain))


def make_custom(ops: VectorOpsTable, payload) -> Vector:
    missing = [name for name in OPERATIONS + ("check",) if getattr(ops, name, None) is None]
    if missing:
        raise IllegalInputError(f"custom vector table lacks {missing}")
    return Vector(BackendId("custom", ops.family), payload, ops)


def unwrap(v: Vector):
    """Return the payload of ``v`` (the array, or the custom payload as given)."""
    return v.data


def serial_data(v: Vector) -> np.ndarray:
    """Raw array of a serial-representation vector."""
    if not v.backend.serial_representation:
        raise RepresentationError(f"{v.backend} vector has no serial representation")
    return v.data


def compatible(x: Vector, y: Vector) -> bool:
    if x.backend != y.backend or len(x) != len(y):
        return False
    if x.backend.kind == "custom":
        return bool(x._ops.check(x.data, y.data))
    return True


def _check(*vs: Vector):
    x = vs[0]
    for y in vs[1:]:
        if x.backend != y.backend:
            raise CompatibilityError(f"backend mismatch: {x.backend} vs {y.backend}")
        if len(x) != len(y):
            raise CompatibilityError(f"length mismatch: {len(x)} vs {len(y)}")
        if x.backend.kind == "custom" and not x._ops.check(x.data, y.data):
            raise CompatibilityError("custom check rejected the operands")


def linear_sum(a: float, x: Vector, b: float, y: Vector, z: Vector) -> None:
    _check(x, y, z)
    z._ops.linear_sum(a, x.data, b, y.data, z.data)


def const_fill(c: float, z: Vector) -> None:
    z._ops.const_fill(c, z.data)


def product(x, y, z):
    _check(x, y, z)
    z._ops.product(x.data, y.data, z.data)


def quotient(x, y, z):
    _check(x, y, z)
    z._ops.quotient(x.data, y.data, z.data)


def scale(c, x, z):
    _check(x, z)
    z._ops.scale(c, x.data, z.data)


def abs(x, z):  # noqa: A001 - mirrors the operation name
    _check(x, z)
    z._ops.abs(x.data, z.data)


def invert(x, z):
    _check(x, z)
    z._ops.invert(x.data, z.data)


def add_constant(x, b, z):
    _check(x, z)
    z._ops.add_constant(x.data, b, z.data)


def dot_product(x, y) -> float:
    _check(x, y)
    return x._ops.dot_product(x.data, y.data)


def _nonempty(x):
    if len(x) == 0:
        raise IllegalInputError("norm of an empty vector")


def max_norm(x) -> float:
    _nonempty(x)
    return x._ops.max_norm(x.data)


def wrms_norm(x, w) -> float:
    _check(x, w)
    _nonempty(x)
    return x._ops.wrms_norm(x.data, w.data)


def weighted_l2_norm(x, w) -> float:
    _check(x, w)
    _nonempty(x)
    return x._ops.weighted_l2_norm(x.data, w.data)


def l1_norm(x) -> float:
    _nonempty(x)
    return x._ops.l1_norm(x.data)


def min_element(x) -> float:
    _nonempty(x)
    return x._ops.min_element(x.data)


def compare_threshold(c, x, z):
    _check(x, z)
    z._ops.compare_threshold(c, x.data, z.data)


def invert_with_test(x, z) -> bool:
    _check(x, z)
    return z._ops.invert_with_test(x.data, z.data)


def constraint_mask(c, x, m) -> bool:
    _check(c, x, m)
    return m._ops.constraint_mask(c.data, x.data, m.data)


def min_quotient(num, denom) -> float:
    _check(num, denom)
    return num._ops.min_quotient(num.data, denom.data)


def clone(x: Vector) -> Vector:
    return Vector(x.backend, x._ops.clone(x.data), x._ops)


def copy_into(src: Vector, dst: Vector) -> None:
    """dst <- src, expressed with the operation set."""
    scale(1.0, src, dst)


# A ready-made custom table over Python lists, implementing the textbook
# loops. Used to check backend independence of the solvers.

def _l_linear_sum(a, x, b, y, z):
    for i in range(len(z)):
        z[i] = a * x[i] + b * y[i]


def _l_const(c, z):
    for i in range(len(z)):
        z[i] = c


def _l_prod(x, y, z):
    for i in range(len(z)):
        z[i] = x[i] * y[i]


def _l_div(x, y, z):
    for i in range(len(z)):
        z[i] = x[i] / y[i]


def _l_scale(c, x, z):
    for i in range(len(z)):
        z[i] = c * x[i]


def _l_abs(x, z):
    for i in range(len(z)):
        z[i] = math.fabs(x[i])


def _l_inv(x, z):
    for i in range(len(z)):
        z[i] = 1.0 / x[i]


def _l_addconst(x, b, z):
    for i in range(len(z)):
        z[i] = x[i] + b


def _l_dot(x, y):
    s = 0.0
    for i in range(len(x)):
        s += x[i] * y[i]
    return s


def _l_maxnorm(x):
    m = 0.0
    for v in x:
        if math.fabs(v) > m:
            m = math.fabs(v)
    return m


def _l_wsq(x, w):
    s = 0.0
    for i in range(len(x)):
        p = x[i] * w[i]
        s += p * p
    return s


def _l_wrms(x, w):
    return math.sqrt(_l_wsq(x, w) / len(x))


def _l_wl2(x, w):
    return math.sqrt(_l_wsq(x, w))


def _l_l1(x):
    s = 0.0
    for v in x:
        s += math.fabs(v)
    return s


def _l_min(x):
    return min(x)


def _l_compare(c, x, z):
    for i in range(len(z)):
        z[i] = 1.0 if math.fabs(x[i]) >= c else 0.0


def _l_invtest(x, z):
    ok = True
    for i in range(len(z)):
        if x[i] == 0.0:
            ok = False
        else:
            z[i] = 1.0 / x[i]
    return ok


def _l_constrmask(c, x, m):
    ok = True
    for i in range(len(m)):
        ci, xi = c[i], x[i]
        bad = (ci == 2.0 and xi <= 0.0) or (ci == 1.0 and xi < 0.0) or \
              (ci == -1.0 and xi > 0.0) or (ci == -2.0 and xi >= 0.0)
        m[i] = 1.0 if bad else 0.0
        ok = ok and not bad
    return ok


def _l_minquot(num, denom):
    m = BIG_REAL
    for i in range(len(num)):
        if denom[i] != 0.0:
            m = min(m, num[i] / denom[i])
    return m


LIST_OPS = VectorOpsTable(
    linear_sum=_l_linear_sum,
    const_fill=_l_const,
    product=_l_prod,
    quotient=_l_div,
    scale=_l_scale,
    abs=_l_abs,
    invert=_l_inv,
    add_constant=_l_addconst,
    dot_product=_l_dot,
    max_norm=_l_maxnorm,
    wrms_norm=_l_wrms,
    weighted_l2_norm=_l_wl2,
    l1_norm=_l_l1,
    min_element=_l_min,
    compare_threshold=_l_compare,
    invert_with_test=_l_invtest,
    constraint_mask=_l_constrmask,
    min_quotient=_l_minquot,
    clone=lambda x: [float(v) for v in x],
    check=lambda x, y: len(x) == len(y),
    family="pylist",
)


def pylist(values) -> Vector:
    """Custom-backend vector over a Python list (see ``LIST_OPS``)."""
    return make_custom(LIST_OPS, [float(v) for v in values])
