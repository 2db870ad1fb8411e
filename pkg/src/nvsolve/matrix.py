"""Dense, banded, sparse and custom matrices.

Every matrix supports the same small interface: ``clone``, ``zero``,
``copy``, ``scale_add`` (A <- cA + B), ``scale_add_identity`` (A <- cA + I),
``matvec`` and ``space``. Storage follows the column-major conventions of
the direct solvers: dense element (i, j) lives at ``data[j*rows + i]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import vector as nv
from .errors import (
    CompatibilityError,
    IllegalInputError,
    MatrixCompatibilityError,
    RepresentationError,
)

CSC = "csc"
CSR = "csr"


def _vec_arrays(m, x, y):
    for v in (x, y):
        if not v.backend.serial_representation:
            raise RepresentationError(f"{m.family} matvec needs serial data, got {v.backend}")
    if len(x) != m.cols or len(y) != m.rows:
        raise CompatibilityError(
            f"matvec shape mismatch: {m.rows}x{m.cols} with x[{len(x)}], y[{len(y)}]"
        )
    return x.data, y.data


class DenseMatrix:
    family = "dense"

    def __init__(self, rows: int, cols: int | None = None, data=None):
        cols = rows if cols is None else cols
        if rows < 1 or cols < 1:
            raise IllegalInputError("matrix dimensions must be positive")
        self.rows, self.cols = rows, cols
        if data is None:
            self.data = np.zeros(rows * cols)
        else:
            self.data = np.asarray(data, dtype=np.float64).reshape(rows * cols)

    @classmethod
    def from_array(cls, a) -> "DenseMatrix":
        a = np.asarray(a, dtype=np.float64)
        m = cls(a.shape[0], a.shape[1])
        m.as_array()[:, :] = a
        return m

    def unwrap(self) -> np.ndarray:
        """2-D view indexed ``[column, row]`` over the shared storage."""
        return self.data.reshape(self.cols, self.rows)

    def as_array(self) -> np.ndarray:
        """2-D view indexed ``[row, column]`` over the shared storage."""
        return self.unwrap().T

    def __getitem__(self, ij):
        i, j = ij
        return self.data[j * self.rows + i]

    def __setitem__(self, ij, value):
        i, j = ij
        self.data[j * self.rows + i] = value

    def clone(self):
        return DenseMatrix(self.rows, self.cols)

    def zero(self):
        self.data.fill(0.0)

    def copy_to(self, dst):
        _same(self, dst)
        dst.data[:] = self.data

    def scale_add(self, c, b):
        _same(self, b)
        np.add(np.multiply(c, self.data), b.data, out=self.data)

    def scale_add_identity(self, c):
        _square(self)
        self.data *= c
        self.data[:: self.rows + 1] += 1.0

    def matvec(self, x, y):
        xa, ya = _vec_arrays(self, x, y)
        ya[:] = self.as_array() @ xa

    def space(self):
        return self.rows * self.cols, 3

    def to_array(self):
        return self.as_array().copy()


class BandMatrix:
    """Square band matrix with upper/lower half-bandwidths ``mu``/``ml``.

    ``smu`` rows of upper storage are kept so that a band LU factorization
    can store its fill-in in place; entries between ``mu`` and ``smu`` are
    reserved for the factorization and cannot be written through
    ``__setitem__``.
    """

    family = "band"

    def __init__(self, n: int, mu: int, ml: int, smu: int | None = None):
        if n < 1 or mu < 0 or ml < 0:
            raise IllegalInputError("invalid band dimensions")
        mu, ml = min(mu, n - 1), min(ml, n - 1)
        if smu is None:
            smu = min(n - 1, mu + ml)
        if smu < mu:
            raise IllegalInputError("smu must be at least mu")
        self.rows = self.cols = self.n = n
        self.mu, self.ml, self.smu = mu, ml, smu
        self.ldim = smu + ml + 1
        self.data = np.zeros(n * self.ldim)

    def columns(self) -> np.ndarray:
        """View indexed ``[j, smu + i - j]``."""
        return self.data.reshape(self.n, self.ldim)

    def in_band(self, i, j):
        return j - self.mu <= i <= j + self.ml

    def __getitem__(self, ij):
        i, j = ij
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(ij)
        if not self.in_band(i, j):
            return 0.0
        return self.data[j * self.ldim + self.smu + i - j]

    def __setitem__(self, ij, value):
        i, j = ij
        if not (0 <= i < self.n and 0 <= j < self.n) or not self.in_band(i, j):
            raise IndexError(f"({i}, {j}) lies outside the band")
        self.data[j * self.ldim + self.smu + i - j] = value

    def clone(self):
        return BandMatrix(self.n, self.mu, self.ml, self.smu)

    def zero(self):
        self.data.fill(0.0)

    def _check(self, other):
        if not isinstance(other, BandMatrix) or other.n != self.n:
            raise MatrixCompatibilityError("band operands differ in family or size")
        if other.mu > self.smu or other.ml > self.ml:
            raise MatrixCompatibilityError("band of the source exceeds the destination storage")

    def copy_to(self, dst):
        dst._check(self)
        dst.zero()
        src, out = self.columns(), dst.columns()
        for k in range(-self.mu, self.ml + 1):
            out[:, dst.smu + k] = src[:, self.smu + k]

    def scale_add(self, c, b):
        self._check(b)
        cols = self.columns()
        cols *= c
        bc = b.columns()
        for k in range(-b.mu, b.ml + 1):
            cols[:, self.smu + k] += bc[:, b.smu + k]
        self.mu = max(self.mu, b.mu)

    def scale_add_identity(self, c):
        cols = self.columns()
        cols *= c
        cols[:, self.smu] += 1.0

    def matvec(self, x, y):
        xa, ya = _vec_arrays(self, x, y)
        cols = self.columns()
        ya[:] = 0.0
        for k in range(-self.mu, self.ml + 1):
            # diagonal k holds entries (j + k, j)
            j0, j1 = max(0, -k), min(self.n, self.n - k)
            ya[j0 + k: j1 + k] += cols[j0:j1, self.smu + k] * xa[j0:j1]

    def space(self):
        return self.data.size, 7

    def to_array(self):
        a = np.zeros((self.n, self.n))
        cols = self.columns()
        for k in range(-self.mu, self.ml + 1):
            j = np.arange(max(0, -k), min(self.n, self.n - k))
            a[j + k, j] = cols[j, self.smu + k]
        return a


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


class SparseMatrix:
    """Compressed sparse column (``csc``) or row (``csr``) matrix.

    ``indexptrs`` maps major indices (columns for CSC, rows for CSR) to
    positions in ``data``; ``indexvals`` maps those positions to minor
    indices. All indices are 0-based. ``nnz`` is the storage capacity.
    """

    family = "sparse"

    def __init__(self, rows: int, cols: int, nnz: int, fmt: str = CSC):
        if fmt not in (CSC, CSR):
            raise IllegalInputError(f"unknown sparse format {fmt!r}")
        if rows < 1 or cols < 1 or nnz < 0:
            raise IllegalInputError("invalid sparse dimensions")
        self.rows, self.cols, self.fmt = rows, cols, fmt
        self.data = np.zeros(nnz)
        self.indexvals = np.zeros(nnz, dtype=np.int64)
        self.indexptrs = np.zeros(self.nmajor + 1, dtype=np.int64)

    @property
    def nnz(self) -> int:
        return self.data.size

    @property
    def nmajor(self) -> int:
        return self.cols if self.fmt == CSC else self.rows

    @property
    def stored(self) -> int:
        return int(self.indexptrs[-1])

    def _lines(self):
        p = self.indexptrs
        for k in range(self.nmajor):
            yield k, self.indexvals[p[k]: p[k + 1]], self.data[p[k]: p[k + 1]]

    def _set_pattern(self, lines, total):
        if total > self.nnz:
            cap = _next_pow2(total)
            self.data = np.zeros(cap)
            self.indexvals = np.zeros(cap, dtype=np.int64)
        pos = 0
        for k, (idx, vals) in enumerate(lines):
            self.indexptrs[k] = pos
            self.indexvals[pos: pos + len(idx)] = idx
            self.data[pos: pos + len(idx)] = vals
            pos += len(idx)
        self.indexptrs[self.nmajor] = pos

    def clone(self):
        return SparseMatrix(self.rows, self.cols, self.nnz, self.fmt)

    def zero(self):
        self.data.fill(0.0)
        self.indexvals.fill(0)
        self.indexptrs.fill(0)

    def _compat(self, b):
        if not isinstance(b, SparseMatrix) or (b.rows, b.cols, b.fmt) != (self.rows, self.cols, self.fmt):
            raise MatrixCompatibilityError("sparse operands differ in shape or format")

    def copy_to(self, dst):
        dst._compat(self)
        if dst.nnz < self.stored:
            dst.data = np.zeros(self.nnz)
            dst.indexvals = np.zeros(self.nnz, dtype=np.int64)
        n = self.stored
        dst.indexptrs[:] = self.indexptrs
        dst.indexvals[:n] = self.indexvals[:n]
        dst.data[:n] = self.data[:n]

    def scale_add(self, c, b):
        self._compat(b)
        lines, total = [], 0
        for (_, ia, va), (_, ib, vb) in zip(self._lines(), b._lines()):
            idx = np.union1d(ia, ib)
            full_a = np.zeros(idx.size)
            full_b = np.zeros(idx.size)
            full_a[np.searchsorted(idx, ia)] = va
            full_b[np.searchsorted(idx, ib)] += vb
            lines.append((idx, c * full_a + full_b))
            total += idx.size
        self._set_pattern(lines, total)

    def scale_add_identity(self, c):
        _square(self)
        lines, total = [], 0
        for k, ia, va in self._lines():
            idx = np.union1d(ia, [k])
            full = np.zeros(idx.size)
            full[np.searchsorted(idx, ia)] = va
            vals = c * full
            vals[np.searchsorted(idx, k)] += 1.0
            lines.append((idx, vals))
            total += idx.size
        self._set_pattern(lines, total)

    def _major_of_entries(self):
        n = self.stored
        return np.repeat(np.arange(self.nmajor), np.diff(self.indexptrs)), n

    def matvec(self, x, y):
        xa, ya = _vec_arrays(self, x, y)
        major, n = self._major_of_entries()
        minor, vals = self.indexvals[:n], self.data[:n]
        if self.fmt == CSC:
            ya[:] = np.bincount(minor, weights=vals * xa[major], minlength=self.rows)
        else:
            ya[:] = np.bincount(major, weights=vals * xa[minor], minlength=self.rows)

    def space(self):
        return self.nnz, self.nnz + self.nmajor + 1

    def to_array(self):
        a = np.zeros((self.rows, self.cols))
        major, n = self._major_of_entries()
        minor = self.indexvals[:n]
        r, c = (minor, major) if self.fmt == CSC else (major, minor)
        np.add.at(a, (r, c), self.data[:n])
        return a


@dataclass(frozen=True)
class MatrixOpsTable:
    """Callbacks for a user-defined matrix content.

    ``copy(src, dst)``, ``scale_add(c, a, b)`` (a <- c*a + b),
    ``scale_add_identity(c, a)`` and ``matvec(a, x, y)`` act on payloads;
    ``x`` and ``y`` are vector payloads.
    """

    clone: Callable[[Any], Any]
    zero: Callable[[Any], None]
    copy: Callable[[Any, Any], None]
    scale_add: Callable[[float, Any, Any], None]
    scale_add_identity: Callable[[float, Any], None]
    matvec: Callable[[Any, Any, Any], None]
    space: Callable[[Any], tuple]


class CustomMatrix:
    family = "custom"

    def __init__(self, ops: MatrixOpsTable, payload, rows: int, cols: int):
        self.ops, self.payload = ops, payload
        self.rows, self.cols = rows, cols

    def unwrap(self):
        return self.payload

    def clone(self):
        return CustomMatrix(self.ops, self.ops.clone(self.payload), self.rows, self.cols)

    def zero(self):
        self.ops.zero(self.payload)

    def copy_to(self, dst):
        _same(self, dst)
        self.ops.copy(self.payload, dst.payload)

    def scale_add(self, c, b):
        _same(self, b)
        self.ops.scale_add(c, self.payload, b.payload)

    def scale_add_identity(self, c):
        _square(self)
        self.ops.scale_add_identity(c, self.payload)

    def matvec(self, x, y):
        if len(x) != self.cols or len(y) != self.rows:
            raise CompatibilityError("matvec shape mismatch")
        self.ops.matvec(self.payload, x.data, y.data)

    def space(self):
        return self.ops.space(self.payload)

    def to_array(self):
        a = np.zeros((self.rows, self.cols))
        for j in range(self.cols):
            e = nv.serial(np.zeros(self.cols))
            e.data[j] = 1.0
            out = nv.serial(np.zeros(self.rows))
            self.matvec(e, out)
            a[:, j] = out.data
        return a


def make_custom(ops: MatrixOpsTable, payload, rows: int, cols: int) -> CustomMatrix:
    return CustomMatrix(ops, payload, rows, cols)


def _same(a, b):
    if type(a) is not type(b) or (a.rows, a.cols) != (b.rows, b.cols):
        raise MatrixCompatibilityError(
            f"{a.family} {a.rows}x{a.cols} vs {b.family} {b.rows}x{b.cols}"
        )
    if isinstance(a, CustomMatrix) and a.ops is not b.ops:
        raise MatrixCompatibilityError("custom matrices from different tables")


def _square(a):
    if a.rows != a.cols:
        raise MatrixCompatibilityError(f"{a.rows}x{a.cols} matrix is not square")


# Module-level interface.

def zero(a):
    a.zero()


def copy(src, dst):
    src.copy_to(dst)


def scale_add(c: float, a, b):
    """a <- c*a + b."""
    a.scale_add(c, b)


def scale_add_identity(c: float, a):
    """a <- c*a + I."""
    a.scale_add_identity(c)


def matvec(a, x: nv.Vector, y: nv.Vector):
    """y <- A x."""
    a.matvec(x, y)


def clone(a):
    return a.clone()


def space(a):
    """(real words, integer words) of storage."""
    return a.space()


def to_dense(a) -> DenseMatrix:
    return DenseMatrix.from_array(a.to_array())


def sparse_from_triplets(fmt: str, rows: int, cols: int, entries) -> SparseMatrix:
    """Build a sparse matrix from ``(i, j, value)`` triplets; duplicates are summed."""
    acc: dict[tuple[int, int], float] = {}
    for i, j, v in entries:
        if not (0 <= i < rows and 0 <= j < cols):
            raise IndexError(f"entry ({i}, {j}) outside {rows}x{cols}")
        key = (j, i) if fmt == CSC else (i, j)
        acc[key] = acc.get(key, 0.0) + float(v)
    m = SparseMatrix(rows, cols, len(acc), fmt)
    keys = sorted(acc)
    pos = 0
    for k in range(m.nmajor):
        m.indexptrs[k] = pos
        while pos < len(keys) and keys[pos][0] == k:
            m.indexvals[pos] = keys[pos][1]
            m.data[pos] = acc[keys[pos]]
            pos += 1
    m.indexptrs[m.nmajor] = pos
    return m


def sparse_from_dense(a, fmt: str = CSC) -> SparseMatrix:
    a = np.asarray(a, dtype=np.float64)
    rows, cols = a.shape
    entries = [(i, j, a[i, j]) for i in range(rows) for j in range(cols) if a[i, j] != 0.0]
    return sparse_from_triplets(fmt, rows, cols, entries)


def validate_sparse(m: SparseMatrix) -> None:
    """Raise AssertionError if the compressed layout invariants fail."""
    p = m.indexptrs
    assert p.size == m.nmajor + 1
    assert p[0] == 0
    assert np.all(np.diff(p) >= 0)
    assert p[-1] <= m.nnz
    nminor = m.rows if m.fmt == CSC else m.cols
    vals = m.indexvals[: p[-1]]
    assert np.all((vals >= 0) & (vals < nminor))
