"""Two-level restricted additive Schwarz with ILU(k) block solves.

The outer partition splits the matrix into blocks (optionally grown by
``outer_overlap`` graph layers); each outer block is split again into inner
blocks with ``inner_overlap`` layers.  Every leaf block gets its own ILU(k).
Applying the preconditioner restricts the residual to each leaf, solves,
and keeps only rows the leaf owns at both levels, so every global row
receives exactly one value.

Leaf factors are concatenated into one block-diagonal factor.  Its level
schedule interleaves the leaves: level ``t`` holds level ``t`` of every
block, so one scheduled sweep runs the blocks side by side (outer
parallelism) and the rows within a level side by side (inner parallelism).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._workers import run_tasks
from .csr import INDEX, SparseCsr
from .ilu import IluFactors, ilu_factorize, ilu_symbolic, trisolve
from .partition import RowPartition, extract_ras_blocks, partition_rows, permute_symmetric

__all__ = ["LeafBlock", "RasPreconditioner", "ras_apply", "concat_block_diagonal"]


@dataclass(frozen=True, eq=False)
class LeafBlock:
    outer: int
    inner: int
    rows: np.ndarray        # original row indices, in local order
    keep: np.ndarray        # rows mapped back by the restricted prolongation
    local_matrix: SparseCsr

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])


def concat_block_diagonal(mats: list[SparseCsr]) -> SparseCsr:
    """Block-diagonal matrix from square blocks (no re-sorting needed)."""
    sizes = [m.n_rows for m in mats]
    n = int(sum(sizes))
    row_off = np.concatenate([[0], np.cumsum(sizes)]).astype(INDEX)
    nnz_off = np.concatenate([[0], np.cumsum([m.nnz for m in mats])]).astype(INDEX)
    row_ptr = np.empty(n + 1, dtype=INDEX)
    row_ptr[-1] = nnz_off[-1]
    col_idx = np.empty(int(nnz_off[-1]), dtype=INDEX)
    values = np.empty(int(nnz_off[-1]))
    for b, m in enumerate(mats):
        row_ptr[row_off[b]:row_off[b + 1]] = m.row_ptr[:-1] + nnz_off[b]
        col_idx[nnz_off[b]:nnz_off[b + 1]] = m.col_idx + row_off[b]
        values[nnz_off[b]:nnz_off[b + 1]] = m.values
    return SparseCsr(n, n, row_ptr, col_idx, values)


class RasPreconditioner:
    """RAS-ILU(k) preconditioner.

    Parameters
    ----------
    a : SparseCsr
        System matrix (original ordering).
    outer_parts, inner_parts : int
        Number of outer blocks and of inner blocks per outer block.
    outer_overlap, inner_overlap : int
        Graph layers added at each level.
    k : int
        ILU fill level for every leaf.
    partitioner : str or callable
        Passed to :func:`partition_rows` at both levels.
    workers : int
        Worker count for leaf factorization and for the scheduled solves.
    """

    def __init__(self, a: SparseCsr, outer_parts: int = 1, inner_parts: int = 1,
                 outer_overlap: int = 0, inner_overlap: int = 0, k: int = 0,
                 partitioner="bisection", workers: int = 1,
                 shift_on_breakdown: float | None = None):
        t0 = time.perf_counter()
        self.n = a.n_rows
        self.k = int(k)
        self.outer_parts = int(outer_parts)
        self.inner_parts = int(inner_parts)
        self.outer_overlap = int(outer_overlap)
        self.inner_overlap = int(inner_overlap)
        self.workers = workers

        self.partition: RowPartition = partition_rows(a, outer_parts, partitioner)
        b = permute_symmetric(a, self.partition)
        to_original = self.partition.inverse
        leaves = []
        for ob in extract_ras_blocks(b, self.partition, outer_overlap):
            m = ob.local_matrix
            ip = partition_rows(m, inner_parts, partitioner)
            inner_inv = ip.inverse
            for ib in extract_ras_blocks(permute_symmetric(m, ip), ip, inner_overlap):
                outer_local = inner_inv[ib.rows]
                leaves.append(LeafBlock(
                    outer=ob.part, inner=ib.part,
                    rows=to_original[ob.rows[outer_local]],
                    keep=ib.keep & ob.keep[outer_local],
                    local_matrix=ib.local_matrix))
        self.leaves: list[LeafBlock] = leaves

        def factor(leaf):
            return lambda: ilu_factorize(leaf.local_matrix, ilu_symbolic(leaf.local_matrix, k),
                                         shift_on_breakdown=shift_on_breakdown)

        self.leaf_factors: list[IluFactors] = run_tasks([factor(l) for l in leaves], workers)
        self.factors = IluFactors.from_combined(
            concat_block_diagonal([f.combined for f in self.leaf_factors]))
        self.gather = np.concatenate([l.rows for l in leaves]).astype(INDEX)
        keep = np.concatenate([l.keep for l in leaves])
        self._keep_ext = np.flatnonzero(keep).astype(INDEX)
        self._keep_rows = self.gather[self._keep_ext]
        if not np.array_equal(np.sort(self._keep_rows), np.arange(self.n)):
            raise AssertionError("restricted prolongation does not cover every row once")
        self.setup_seconds = time.perf_counter() - t0

    @property
    def n_blocks(self) -> int:
        return len(self.leaves)

    @property
    def extended_size(self) -> int:
        return int(self.gather.shape[0])

    def apply(self, r):
        return ras_apply(self, r)

    def stats(self) -> dict:
        return {
            "blocks": self.n_blocks,
            "extended_rows": self.extended_size,
            "factor_nnz": self.factors.combined.nnz,
            "lower_levels": self.factors.lower_schedule.n_levels,
            "upper_levels": self.factors.upper_schedule.n_levels,
        }

    def __repr__(self):
        return (f"RasPreconditioner(outer={self.outer_parts}, inner={self.inner_parts}, "
                f"overlap=({self.outer_overlap}, {self.inner_overlap}), k={self.k})")


def ras_apply(pc: RasPreconditioner, r, workers: int | None = None) -> np.ndarray:
    """``z = sum_p R~_p^T (L_p U_p)^{-1} R_p r``."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (pc.n,):
        raise ValueError(f"dimension mismatch: r has shape {r.shape}, expected ({pc.n},)")
    z_ext = trisolve(pc.factors, r[pc.gather], workers=pc.workers if workers is None else workers)
    z = np.empty(pc.n)
    z[pc._keep_rows] = z_ext[pc._keep_ext]
    return z
