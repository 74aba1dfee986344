"""Test-problem generators."""

from __future__ import annotations

import numpy as np

from .csr import INDEX, SparseCsr

__all__ = ["poisson3d", "poisson2d", "poisson1d", "poisson3d_nnz", "random_sparse"]


def _stencil_csr(shape: tuple[int, ...], diag: float) -> SparseCsr:
    """Dirichlet Laplacian on a lexicographic grid (first axis fastest).

    Rows are written directly in canonical order: neighbour offsets are
    visited from the most negative to the most positive.
    """
    dims = [int(d) for d in shape]
    if any(d < 1 for d in dims):
        raise ValueError(f"grid dimensions must be >= 1, got {tuple(dims)}")
    n = int(np.prod(dims))
    strides = np.cumprod([1] + dims[:-1])
    idx = np.arange(n, dtype=INDEX)
    coords = [(idx // s) % d for s, d in zip(strides, dims)]

    offsets = []  # (offset, valid-mask or None, value), ascending offset
    for axis in reversed(range(len(dims))):
        offsets.append((-int(strides[axis]), coords[axis] > 0, -1.0))
    offsets.append((0, None, diag))
    for axis in range(len(dims)):
        offsets.append((int(strides[axis]), coords[axis] < dims[axis] - 1, -1.0))

    counts = np.ones(n, dtype=INDEX)
    for off, mask, _ in offsets:
        if mask is not None:
            counts += mask
    row_ptr = np.zeros(n + 1, dtype=INDEX)
    np.cumsum(counts, out=row_ptr[1:])
    nnz = int(row_ptr[-1])
    col_idx = np.empty(nnz, dtype=INDEX)
    values = np.empty(nnz)
    cursor = row_ptr[:-1].copy()
    for off, mask, val in offsets:
        rows = idx if mask is None else idx[mask]
        pos = cursor[rows]
        col_idx[pos] = rows + off
        values[pos] = val
        cursor[rows] += 1
    return SparseCsr(n, n, row_ptr, col_idx, values)


def poisson3d(nx: int, ny: int, nz: int) -> SparseCsr:
    """7-point Laplacian on an ``nx x ny x nz`` grid with Dirichlet truncation.

    Diagonal 6, neighbours -1; the unknown ``(i, j, k)`` has index
    ``i + nx * (j + ny * k)``.
    """
    return _stencil_csr((nx, ny, nz), 6.0)


def poisson2d(nx: int, ny: int) -> SparseCsr:
    """5-point Laplacian (diagonal 4)."""
    return _stencil_csr((nx, ny), 4.0)


def poisson1d(n: int) -> SparseCsr:
    """Tridiagonal ``[-1, 2, -1]``."""
    return _stencil_csr((n,), 2.0)


def poisson3d_nnz(nx: int, ny: int, nz: int) -> int:
    n = nx * ny * nz
    return 7 * n - 2 * (ny * nz + nx * nz + nx * ny)


def random_sparse(n_rows: int, n_cols: int, density: float, rng: np.random.Generator,
                  diag_shift: float | None = None) -> SparseCsr:
    """Uniform random pattern with normal values.

    With ``diag_shift`` set (square only), the diagonal is replaced by the
    absolute off-diagonal row sum plus ``diag_shift``, giving a strictly
    diagonally dominant matrix.
    """
    nnz = int(round(density * n_rows * n_cols))
    flat = rng.choice(n_rows * n_cols, size=nnz, replace=False) if nnz else np.zeros(0, dtype=INDEX)
    r, c = np.divmod(flat.astype(INDEX), n_cols)
    v = rng.standard_normal(nnz)
    a = SparseCsr.from_coo(r, c, v, (n_rows, n_cols))
    if diag_shift is None:
        return a
    if n_rows != n_cols:
        raise ValueError("diag_shift needs a square matrix")
    rows = a.row_indices()
    off = rows != a.col_idx
    rowsum = np.bincount(rows[off], weights=np.abs(a.values[off]), minlength=n_rows)
    idx = np.arange(n_rows, dtype=INDEX)
    return SparseCsr.from_coo(np.concatenate([rows[off], idx]),
                              np.concatenate([a.col_idx[off], idx]),
                              np.concatenate([a.values[off], rowsum + diag_shift]),
                              a.shape)
