"""Halo exchange through a shared staging cache, and partitioned SpMV.

Each part owns a contiguous segment of the (permuted) vector.  Before the
product every part writes the entries other parts need into its slice of
one staging buffer (gather phase); after a barrier every part reads its
halo from the buffer (scatter phase) and multiplies its local block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._workers import run_tasks
from .csr import INDEX, SparseCsr
from .hec import DEFAULT_ELL_WIDTH, DEFAULT_STRIDE_UNIT, HecMatrix, hec_from_csr
from .kernels import spmv
from .partition import RowPartition

__all__ = ["CommPlan", "PartitionedMatrix", "build_comm_plan", "build_partitioned",
           "partitioned_spmv", "split_segments"]


@dataclass(frozen=True, eq=False)
class CommPlan:
    """Exchange plan for one partition.

    Attributes
    ----------
    part_ptr : ndarray
        Segment boundaries in the permuted ordering.
    send_idx : list of ndarray
        Per part, sorted *local* row indices whose values other parts need.
    recv_idx : list of ndarray
        Per part, sorted *global* indices outside its segment that it needs.
    cache_ptr : ndarray
        Offset of each part's send slice in the staging buffer.
    recv_pos : list of ndarray
        Per part, buffer position of each ``recv_idx`` entry.
    """

    part_ptr: np.ndarray
    send_idx: list
    recv_idx: list
    cache_ptr: np.ndarray
    recv_pos: list

    @property
    def n_parts(self) -> int:
        return int(self.part_ptr.shape[0] - 1)

    @property
    def comm_volume(self) -> int:
        """Number of values read from the cache per product."""
        return int(sum(r.shape[0] for r in self.recv_idx))

    @property
    def cache_size(self) -> int:
        return int(self.cache_ptr[-1])


def build_comm_plan(a: SparseCsr, p: RowPartition) -> CommPlan:
    """Minimal exchange plan for ``a`` in partition order."""
    ptr = p.part_ptr
    n_parts = p.n_parts
    owner_of = np.repeat(np.arange(n_parts, dtype=INDEX), np.diff(ptr))
    recv = []
    for q in range(n_parts):
        lo, hi = int(ptr[q]), int(ptr[q + 1])
        cols = a.col_idx[a.row_ptr[lo]:a.row_ptr[hi]]
        recv.append(np.unique(cols[(cols < lo) | (cols >= hi)]).astype(INDEX))
    needed = [[] for _ in range(n_parts)]
    for r in recv:
        if r.size:
            owners = owner_of[r]
            for q in np.unique(owners):
                needed[q].append(r[owners == q])
    send = []
    for q in range(n_parts):
        g = np.unique(np.concatenate(needed[q])) if needed[q] else np.zeros(0, dtype=INDEX)
        send.append((g - ptr[q]).astype(INDEX))
    cache_ptr = np.zeros(n_parts + 1, dtype=INDEX)
    np.cumsum([s.shape[0] for s in send], out=cache_ptr[1:])
    recv_pos = []
    for r in recv:
        owners = owner_of[r] if r.size else np.zeros(0, dtype=INDEX)
        pos = np.empty(r.shape[0], dtype=INDEX)
        for q in np.unique(owners):
            m = owners == q
            pos[m] = cache_ptr[q] + np.searchsorted(send[q], r[m] - ptr[q])
        recv_pos.append(pos)
    return CommPlan(ptr.copy(), send, recv, cache_ptr, recv_pos)


@dataclass(frozen=True, eq=False)
class PartitionedMatrix:
    """Local row blocks in HEC storage plus the exchange plan.

    Local column ``c < n_own`` is owned segment entry ``c``; column
    ``n_own + t`` is halo entry ``recv_idx[t]``.
    """

    plan: CommPlan
    blocks: list

    @property
    def n_rows(self) -> int:
        return int(self.plan.part_ptr[-1])


def build_partitioned(a: SparseCsr, p: RowPartition, plan: CommPlan | None = None,
                      strict: bool = True, ell_width_cap: int = DEFAULT_ELL_WIDTH,
                      stride_unit: int = DEFAULT_STRIDE_UNIT) -> PartitionedMatrix:
    """Split ``a`` (partition order) into per-part local HEC blocks.

    With ``strict=False`` entries whose column the plan does not deliver are
    dropped instead of raising; this exists to test plan minimality.
    """
    if plan is None:
        plan = build_comm_plan(a, p)
    if plan.n_parts != p.n_parts or not np.array_equal(plan.part_ptr, p.part_ptr):
        raise ValueError("plan does not match the partition")
    blocks = []
    for q in range(p.n_parts):
        lo, hi = p.part_range(q)
        s, e = a.row_ptr[lo], a.row_ptr[hi]
        cols = a.col_idx[s:e]
        vals = a.values[s:e]
        rows = np.repeat(np.arange(hi - lo, dtype=INDEX), np.diff(a.row_ptr[lo:hi + 1]))
        own = (cols >= lo) & (cols < hi)
        local = np.where(own, cols - lo, -1)
        r = plan.recv_idx[q]
        ext = ~own
        t = np.searchsorted(r, cols[ext])
        t_clip = np.minimum(t, max(r.shape[0] - 1, 0))
        hit = (t < r.shape[0]) & (r[t_clip] == cols[ext]) if r.size else np.zeros(t.shape, bool)
        if strict and not np.all(hit):
            raise ValueError(f"part {q}: matrix needs halo values the plan does not provide")
        local[np.flatnonzero(ext)[hit]] = (hi - lo) + t[hit]
        keep = local >= 0
        csr = SparseCsr.from_coo(rows[keep], local[keep], vals[keep],
                                 (hi - lo, (hi - lo) + r.shape[0]))
        blocks.append(hec_from_csr(csr, ell_width_cap, stride_unit))
    return PartitionedMatrix(plan, blocks)


def split_segments(x, part_ptr) -> list:
    x = np.asarray(x, dtype=np.float64)
    return [x[part_ptr[q]:part_ptr[q + 1]] for q in range(len(part_ptr) - 1)]


def partitioned_spmv(pm: PartitionedMatrix, segments, workers: int = 1) -> np.ndarray:
    """``y = A x`` with one task per part and an explicit exchange phase."""
    plan = pm.plan
    if len(segments) != plan.n_parts:
        raise ValueError("number of segments does not match the plan")
    for q, (seg, blk) in enumerate(zip(segments, pm.blocks)):
        if seg.shape[0] != blk.n_rows:
            raise ValueError(f"segment {q} has length {seg.shape[0]}, expected {blk.n_rows}")
    cache = np.empty(plan.cache_size)

    def gather(q):
        def task():
            cache[plan.cache_ptr[q]:plan.cache_ptr[q + 1]] = segments[q][plan.send_idx[q]]
        return task

    def compute(q):
        def task():
            x_ext = np.concatenate([segments[q], cache[plan.recv_pos[q]]])
            return spmv(pm.blocks[q], x_ext)
        return task

    run_tasks([gather(q) for q in range(plan.n_parts)], workers)
    ys = run_tasks([compute(q) for q in range(plan.n_parts)], workers)
    return np.concatenate(ys) if ys else np.zeros(0)
