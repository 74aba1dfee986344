"""SpMV and vector kernels.

All kernels work on half-open row ranges so they can be chunked across
workers.  Per-row arithmetic is fixed: a row sum starts at 0.0 and adds the
ELL slots in slot order and then the CSR remainder in column order, which is
exactly the column order of the canonical matrix.  HEC and CSR products are
therefore bitwise identical, and so is any chunking of either.

Dot products reduce fixed-size blocks sequentially and combine the block
partials with a pairwise tree whose shape depends only on the vector
length, so results do not depend on the worker count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._workers import run_chunks
from .csr import SparseCsr
from .hec import HecMatrix

__all__ = [
    "spmv", "spmv_csr", "spmv_axpby",
    "axpby_inplace", "axpbyz", "dot", "norm2",
    "DOT_BLOCK",
]

DOT_BLOCK = 2048


@njit(nogil=True, cache=True)
def _hec_rows(lo, hi, width, stride, ell_col, ell_val, sentinel,
              rp, ci, vv, x, y, alpha, beta, use_beta):
    m = hi - lo
    acc = np.zeros(m)
    # slot-major sweep: contiguous reads of each ELL column
    for j in range(width):
        base = j * stride
        for i in range(lo, hi):
            c = ell_col[base + i]
            if c != sentinel:
                acc[i - lo] += ell_val[base + i] * x[c]
    for i in range(lo, hi):
        s = acc[i - lo]
        for k in range(rp[i], rp[i + 1]):
            s += vv[k] * x[ci[k]]
        if use_beta:
            y[i] = alpha * s + beta * y[i]
        elif alpha == 1.0:
            y[i] = s
        else:
            y[i] = alpha * s


@njit(nogil=True, cache=True)
def _csr_rows(lo, hi, rp, ci, vv, x, y, alpha, beta, use_beta):
    for i in range(lo, hi):
        s = 0.0
        for k in range(rp[i], rp[i + 1]):
            s += vv[k] * x[ci[k]]
        if use_beta:
            y[i] = alpha * s + beta * y[i]
        elif alpha == 1.0:
            y[i] = s
        else:
            y[i] = alpha * s


@njit(nogil=True, cache=True)
def _axpbyz_range(lo, hi, alpha, x, beta, y, z):
    for i in range(lo, hi):
        z[i] = alpha * x[i] + beta * y[i]


@njit(nogil=True, cache=True)
def _block_dots(blo, bhi, block, x, y, out):
    n = x.shape[0]
    for b in range(blo, bhi):
        s = 0.0
        stop = min(n, (b + 1) * block)
        for i in range(b * block, stop):
            s += x[i] * y[i]
        out[b] = s


@njit(cache=True)
def _pairwise_sum(parts):
    m = parts.shape[0]
    if m == 0:
        return 0.0
    buf = parts.copy()
    while m > 1:
        h = m // 2
        for i in range(h):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if m % 2 == 1:
            buf[h] = buf[m - 1]
            m = h + 1
        else:
            m = h
    return buf[0]


def _vec(x, n: int | None = None, name: str = "x") -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"dimension mismatch: {name} has length {x.shape[0]}, expected {n}")
    return x


def _apply(a, x, y, alpha, beta, use_beta, workers):
    if isinstance(a, HecMatrix):
        r = a.csr_rest

        def run(lo, hi):
            _hec_rows(lo, hi, a.ell_width, a.ell_stride, a.ell_col, a.ell_val,
                      a.sentinel, r.row_ptr, r.col_idx, r.values, x, y,
                      alpha, beta, use_beta)
    elif isinstance(a, SparseCsr):
        def run(lo, hi):
            _csr_rows(lo, hi, a.row_ptr, a.col_idx, a.values, x, y,
                      alpha, beta, use_beta)
    else:
        raise TypeError(f"unsupported matrix type {type(a).__name__}")
    run_chunks(run, a.n_rows, workers)
    return y


def spmv(a, x, out=None, workers: int = 1) -> np.ndarray:
    """``y = A x`` for a :class:`HecMatrix` (or a :class:`SparseCsr`)."""
    x = _vec(x, a.n_cols)
    y = np.empty(a.n_rows) if out is None else _vec(out, a.n_rows, "out")
    return _apply(a, x, y, 1.0, 0.0, False, workers)


def spmv_csr(a: SparseCsr, x, out=None, workers: int = 1) -> np.ndarray:
    """Reference CSR product, bitwise equal to :func:`spmv` on HEC storage."""
    if not isinstance(a, SparseCsr):
        raise TypeError("spmv_csr expects a SparseCsr")
    return spmv(a, x, out=out, workers=workers)


def spmv_axpby(alpha: float, a, x, beta: float, y, workers: int = 1) -> np.ndarray:
    """In-place ``y = alpha A x + beta y``; returns ``y``."""
    x = _vec(x, a.n_cols)
    if not (isinstance(y, np.ndarray) and y.dtype == np.float64 and y.flags.c_contiguous):
        raise TypeError("y must be a contiguous float64 array (updated in place)")
    _vec(y, a.n_rows, "y")
    return _apply(a, x, y, float(alpha), float(beta), True, workers)


def axpbyz(alpha: float, x, beta: float, y, out=None, workers: int = 1) -> np.ndarray:
    """``z = alpha x + beta y`` into a new (or given) array."""
    x = _vec(x)
    y = _vec(y, x.shape[0], "y")
    z = np.empty_like(x) if out is None else out
    alpha, beta = float(alpha), float(beta)
    run_chunks(lambda lo, hi: _axpbyz_range(lo, hi, alpha, x, beta, y, z),
               x.shape[0], workers)
    return z


def axpby_inplace(alpha: float, x, beta: float, y: np.ndarray, workers: int = 1) -> np.ndarray:
    """``y = alpha x + beta y`` in place; returns ``y``."""
    x = _vec(x)
    if not (isinstance(y, np.ndarray) and y.dtype == np.float64 and y.flags.c_contiguous):
        raise TypeError("y must be a contiguous float64 array (updated in place)")
    _vec(y, x.shape[0], "y")
    return axpbyz(alpha, x, beta, y, out=y, workers=workers)


def dot(x, y, workers: int = 1) -> float:
    """Deterministic blocked inner product."""
    x = _vec(x)
    y = _vec(y, x.shape[0], "y")
    n_blocks = -(-x.shape[0] // DOT_BLOCK)
    parts = np.empty(n_blocks)
    run_chunks(lambda lo, hi: _block_dots(lo, hi, DOT_BLOCK, x, y, parts),
               n_blocks, workers)
    return float(_pairwise_sum(parts))


def norm2(x, workers: int = 1) -> float:
    return math.sqrt(dot(x, x, workers=workers))
