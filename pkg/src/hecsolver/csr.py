"""Canonical compressed sparse row storage.

``SparseCsr`` is the exchange format used by every builder in the package.
A matrix is *canonical* when column indices are strictly increasing within
each row, which also rules out stored duplicates.  Builders sort and sum
duplicates; explicit zeros are kept unless dropping is requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

__all__ = ["FormatError", "SparseCsr"]

INDEX = np.int64
REAL = np.float64


class FormatError(ValueError):
    """Raised for malformed or non-canonical sparse input."""


@dataclass(frozen=True, eq=False)
class SparseCsr:
    """Real double-precision CSR matrix.

    Parameters
    ----------
    n_rows, n_cols : int
        Matrix shape.
    row_ptr : ndarray of int64, length ``n_rows + 1``
        Start offset of each row in ``col_idx``/``values``.
    col_idx : ndarray of int64, length ``nnz``
    values : ndarray of float64, length ``nnz``

    Instances are treated as immutable; the arrays are shared, not copied.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n_rows", int(self.n_rows))
        object.__setattr__(self, "n_cols", int(self.n_cols))
        object.__setattr__(self, "row_ptr", np.ascontiguousarray(self.row_ptr, dtype=INDEX))
        object.__setattr__(self, "col_idx", np.ascontiguousarray(self.col_idx, dtype=INDEX))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=REAL))
        if self.n_rows < 0 or self.n_cols < 0:
            raise FormatError("negative dimension")
        if self.row_ptr.shape != (self.n_rows + 1,):
            raise FormatError(f"row_ptr must have length {self.n_rows + 1}, "
                              f"got {self.row_ptr.shape[0]}")
        if self.col_idx.shape != self.values.shape or self.col_idx.ndim != 1:
            raise FormatError("col_idx and values must be 1-d arrays of equal length")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.col_idx.shape[0]:
            raise FormatError("row_ptr must start at 0 and end at nnz")

    # -- basic properties -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    def row_nnz(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO row array)."""
        return np.repeat(np.arange(self.n_rows, dtype=INDEX), self.row_nnz())

    def is_canonical(self) -> bool:
        try:
            self.check_canonical()
        except FormatError:
            return False
        return True

    def check_canonical(self) -> None:
        """Raise :class:`FormatError` unless the matrix is canonical."""
        if np.any(np.diff(self.row_ptr) < 0):
            raise FormatError("row_ptr is decreasing")
        if self.nnz == 0:
            return
        if self.col_idx.min() < 0 or self.col_idx.max() >= self.n_cols:
            raise FormatError("column index out of range")
        rows = self.row_indices()
        same_row = rows[1:] == rows[:-1]
        bad = same_row & (self.col_idx[1:] <= self.col_idx[:-1])
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0]) + 1
            raise FormatError(f"row {int(rows[k])} has unsorted or duplicate "
                              f"column {int(self.col_idx[k])}")

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_coo(cls, rows, cols, vals, shape, drop_zeros: bool = False) -> "SparseCsr":
        """Build a canonical matrix from triplets, summing duplicates."""
        n_rows, n_cols = (int(s) for s in shape)
        rows = np.asarray(rows, dtype=INDEX).ravel()
        cols = np.asarray(cols, dtype=INDEX).ravel()
        vals = np.asarray(vals, dtype=REAL).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise FormatError("triplet arrays differ in length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows:
                raise FormatError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise FormatError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            start = np.ones(rows.size, dtype=bool)
            start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            first = np.flatnonzero(start)
            vals = np.add.reduceat(vals, first)
            rows, cols = rows[first], cols[first]
        if drop_zeros:
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        row_ptr = np.zeros(n_rows + 1, dtype=INDEX)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=row_ptr[1:])
        return cls(n_rows, n_cols, row_ptr, cols, vals)

    @classmethod
    def from_dense(cls, a, drop_zeros: bool = True) -> "SparseCsr":
        a = np.asarray(a, dtype=REAL)
        if a.ndim != 2:
            raise FormatError("expected a 2-d array")
        if drop_zeros:
            r, c = np.nonzero(a)
        else:
            r, c = np.indices(a.shape).reshape(2, -1)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def from_scipy(cls, m) -> "SparseCsr":
        coo = sps.coo_matrix(m)
        return cls.from_coo(coo.row, coo.col, coo.data, coo.shape)

    @classmethod
    def identity(cls, n: int) -> "SparseCsr":
        idx = np.arange(n, dtype=INDEX)
        return cls(n, n, np.arange(n + 1, dtype=INDEX), idx, np.ones(n))

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> "SparseCsr":
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=INDEX),
                   np.zeros(0, dtype=INDEX), np.zeros(0))

    # -- conversions ------------------------------------------------------

    def to_scipy(self) -> sps.csr_matrix:
        return sps.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_indices(), self.col_idx), self.values)
        return out

    # -- structural helpers -----------------------------------------------

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        rows = self.row_indices()
        on = rows == self.col_idx
        d[rows[on]] = self.values[on]
        return d

    def transpose(self) -> "SparseCsr":
        return SparseCsr.from_coo(self.col_idx, self.row_indices(), self.values,
                                  (self.n_cols, self.n_rows))

    @property
    def T(self) -> "SparseCsr":
        return self.transpose()

    def submatrix(self, rows, cols=None) -> "SparseCsr":
        """Rows ``rows`` and columns ``cols`` (default: same as rows), in the given order."""
        rows = np.asarray(rows, dtype=INDEX)
        cols = rows if cols is None else np.asarray(cols, dtype=INDEX)
        sub = self.to_scipy()[rows][:, cols]
        return SparseCsr.from_scipy(sub)

    def pattern_equal(self, other: "SparseCsr") -> bool:
        return (self.shape == other.shape
                and np.array_equal(self.row_ptr, other.row_ptr)
                and np.array_equal(self.col_idx, other.col_idx))

    def bitwise_equal(self, other: "SparseCsr") -> bool:
        return (self.pattern_equal(other)
                and self.values.tobytes() == other.values.tobytes())

    def __matmul__(self, x):
        from .kernels import spmv_csr

        return spmv_csr(self, x)

    def __repr__(self) -> str:
        return f"SparseCsr(shape={self.shape}, nnz={self.nnz})"
