"""HEC storage: a fixed-width ELL block plus a CSR remainder.

Each row keeps its first ``ell_width`` entries (in column order) in the ELL
block; anything beyond spills into ``csr_rest``.  The ELL block is stored
slot-major (column-major): slot ``j`` of row ``i`` lives at
``j * ell_stride + i``.  Unused slots hold the sentinel column ``n_cols`` and
value 0 and are skipped by the kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csr import INDEX, FormatError, SparseCsr

__all__ = ["HecMatrix", "hec_from_csr", "DEFAULT_ELL_WIDTH", "DEFAULT_STRIDE_UNIT"]

DEFAULT_ELL_WIDTH = 20
DEFAULT_STRIDE_UNIT = 32


@dataclass(frozen=True, eq=False)
class HecMatrix:
    n_rows: int
    n_cols: int
    ell_width: int
    ell_stride: int
    ell_col: np.ndarray
    ell_val: np.ndarray
    csr_rest: SparseCsr

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def sentinel(self) -> int:
        return self.n_cols

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.ell_col != self.sentinel)) + self.csr_rest.nnz

    def ell_slot(self, i: int, j: int) -> tuple[int, float]:
        k = j * self.ell_stride + i
        return int(self.ell_col[k]), float(self.ell_val[k])

    def to_csr(self) -> SparseCsr:
        """Reassemble the canonical CSR matrix."""
        slots = np.arange(self.ell_width, dtype=INDEX)
        rows = np.arange(self.n_rows, dtype=INDEX)
        pos = (slots[:, None] * self.ell_stride + rows[None, :]).ravel()
        r_ell = np.broadcast_to(rows, (self.ell_width, self.n_rows)).ravel()
        c_ell = self.ell_col[pos]
        live = c_ell != self.sentinel
        rest = self.csr_rest
        return SparseCsr.from_coo(
            np.concatenate([r_ell[live], rest.row_indices()]),
            np.concatenate([c_ell[live], rest.col_idx]),
            np.concatenate([self.ell_val[pos][live], rest.values]),
            self.shape)

    def __matmul__(self, x):
        from .kernels import spmv

        return spmv(self, x)

    def __repr__(self) -> str:
        return (f"HecMatrix(shape={self.shape}, ell_width={self.ell_width}, "
                f"ell_stride={self.ell_stride}, csr_rest_nnz={self.csr_rest.nnz})")


def hec_from_csr(a: SparseCsr, ell_width_cap: int = DEFAULT_ELL_WIDTH,
                 stride_unit: int = DEFAULT_STRIDE_UNIT) -> HecMatrix:
    """Split a canonical CSR matrix into HEC storage.

    Parameters
    ----------
    a : SparseCsr
        Canonical input; unsorted or duplicate columns raise ``FormatError``.
    ell_width_cap : int
        Upper bound on ELL entries per row.  The actual width is
        ``min(ell_width_cap, max row nnz)``.
    stride_unit : int
        The ELL leading dimension is ``n_rows`` rounded up to a multiple of
        this value.
    """
    if ell_width_cap < 0:
        raise ValueError("ell_width_cap must be >= 0")
    if stride_unit < 1:
        raise ValueError("stride_unit must be >= 1")
    a.check_canonical()
    n = a.n_rows
    counts = a.row_nnz()
    width = int(min(ell_width_cap, counts.max() if n else 0))
    stride = -(-n // stride_unit) * stride_unit

    rows = a.row_indices()
    slot = np.arange(a.nnz, dtype=INDEX) - a.row_ptr[rows]
    in_ell = slot < width

    ell_col = np.full(width * stride, a.n_cols, dtype=INDEX)
    ell_val = np.zeros(width * stride)
    pos = slot[in_ell] * stride + rows[in_ell]
    ell_col[pos] = a.col_idx[in_ell]
    ell_val[pos] = a.values[in_ell]

    rest_ptr = np.zeros(n + 1, dtype=INDEX)
    np.cumsum(np.maximum(counts - width, 0), out=rest_ptr[1:])
    rest = SparseCsr(n, a.n_cols, rest_ptr, a.col_idx[~in_ell], a.values[~in_ell])
    return HecMatrix(n, a.n_cols, width, stride, ell_col, ell_val, rest)


def check_hec(h: HecMatrix) -> None:
    """Validate HEC invariants; raises ``FormatError``."""
    if h.ell_stride < h.n_rows:
        raise FormatError("ell_stride smaller than n_rows")
    if h.ell_col.shape != (h.ell_width * h.ell_stride,):
        raise FormatError("ELL arrays have the wrong size")
    live = h.ell_col != h.sentinel
    if np.any(h.ell_val[~live] != 0.0):
        raise FormatError("padding slot holds a nonzero value")
    if np.any((h.ell_col < 0) | (h.ell_col > h.sentinel)):
        raise FormatError("ELL column index out of range")
