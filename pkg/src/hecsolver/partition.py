"""Row partitioning, symmetric permutation and Schwarz block extraction.

The default partitioner is recursive graph bisection: a vertex set is
ordered by breadth-first level sets from a pseudo-peripheral vertex
(neighbours in ascending index order) and the ordering is cut so that the
two halves carry the exact row counts of their part ranges.  Disconnected
vertex sets are ordered component by component, largest first.  Part sizes
differ by at most one row.

Partitioners are plain callables ``f(a, n_parts) -> assignment`` where
``assignment[i]`` is the part of original row ``i``; any external tool can
be plugged in through :func:`partition_rows` or a partition file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sps
from numba import njit

from .csr import INDEX, SparseCsr

__all__ = [
    "RowPartition", "partition_rows", "permute_symmetric", "adjacency",
    "bisection_assignment", "natural_assignment", "PARTITIONERS",
    "RasBlock", "extract_ras_blocks", "overlap_layers",
    "write_partition", "read_partition",
]


@dataclass(frozen=True, eq=False)
class RowPartition:
    """Contiguous parts of a permuted row ordering.

    ``perm[old] = new``; part ``p`` owns new indices
    ``part_ptr[p]:part_ptr[p + 1]``.
    """

    n_parts: int
    perm: np.ndarray
    part_ptr: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.perm.shape[0])

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.shape[0], dtype=INDEX)
        return inv

    def sizes(self) -> np.ndarray:
        return np.diff(self.part_ptr)

    def assignment(self) -> np.ndarray:
        """Part index of each original row."""
        new_part = np.repeat(np.arange(self.n_parts, dtype=INDEX), self.sizes())
        return new_part[self.perm]

    def part_range(self, p: int) -> tuple[int, int]:
        return int(self.part_ptr[p]), int(self.part_ptr[p + 1])

    @classmethod
    def from_assignment(cls, assignment, n_parts: int | None = None) -> "RowPartition":
        """New order groups rows by part, original order within a part."""
        assignment = np.asarray(assignment, dtype=INDEX)
        if n_parts is None:
            n_parts = int(assignment.max()) + 1 if assignment.size else 1
        if assignment.size and (assignment.min() < 0 or assignment.max() >= n_parts):
            raise ValueError("part index out of range")
        order = np.argsort(assignment, kind="stable")
        perm = np.empty_like(order)
        perm[order] = np.arange(order.shape[0], dtype=INDEX)
        part_ptr = np.zeros(n_parts + 1, dtype=INDEX)
        np.cumsum(np.bincount(assignment, minlength=n_parts), out=part_ptr[1:])
        return cls(int(n_parts), perm, part_ptr)

    @classmethod
    def identity(cls, n: int) -> "RowPartition":
        return cls(1, np.arange(n, dtype=INDEX), np.array([0, n], dtype=INDEX))


def adjacency(a: SparseCsr) -> sps.csr_matrix:
    """Symmetrised structural graph of ``a`` without self loops."""
    g = sps.csr_matrix((np.ones(a.nnz, dtype=np.int8), a.col_idx, a.row_ptr), shape=a.shape)
    g = (g + g.T).tocsr()
    g.setdiag(0)
    g.eliminate_zeros()
    g.sort_indices()
    return g


# -- breadth-first machinery ------------------------------------------------

@njit(cache=True)
def _bfs(ptr, idx, root, mark, tag, dist, queue):
    head = 0
    tail = 1
    queue[0] = root
    dist[root] = 0
    while head < tail:
        v = queue[head]
        head += 1
        for k in range(ptr[v], ptr[v + 1]):
            w = idx[k]
            if mark[w] == tag and dist[w] < 0:
                dist[w] = dist[v] + 1
                queue[tail] = w
                tail += 1
    return tail


@njit(cache=True)
def _reset(dist, queue, count):
    for t in range(count):
        dist[queue[t]] = -1


@njit(cache=True)
def _pseudo_peripheral(ptr, idx, start, mark, tag, dist, queue):
    root = start
    cnt = _bfs(ptr, idx, root, mark, tag, dist, queue)
    ecc = dist[queue[cnt - 1]]
    while True:
        best = -1
        best_deg = 1 << 62
        for t in range(cnt):
            w = queue[t]
            if dist[w] == ecc:
                deg = 0
                for k in range(ptr[w], ptr[w + 1]):
                    if mark[idx[k]] == tag:
                        deg += 1
                if deg < best_deg or (deg == best_deg and w < best):
                    best = w
                    best_deg = deg
        _reset(dist, queue, cnt)
        cnt = _bfs(ptr, idx, best, mark, tag, dist, queue)
        ecc2 = dist[queue[cnt - 1]]
        if ecc2 > ecc:
            root = best
            ecc = ecc2
        else:
            _reset(dist, queue, cnt)
            return root


@njit(cache=True)
def _level_order(ptr, idx, verts, mark, tag, dist, done, queue):
    """Level-set ordering of ``verts`` (ascending), components largest first."""
    m = verts.shape[0]
    buf = np.empty(m, dtype=np.int64)
    comp_start = np.empty(m, dtype=np.int64)
    comp_len = np.empty(m, dtype=np.int64)
    n_comp = 0
    pos = 0
    for t in range(m):
        v = verts[t]
        if done[v]:
            continue
        root = _pseudo_peripheral(ptr, idx, v, mark, tag, dist, queue)
        cnt = _bfs(ptr, idx, root, mark, tag, dist, queue)
        for q in range(cnt):
            w = queue[q]
            buf[pos + q] = w
            done[w] = True
            dist[w] = -1
        comp_start[n_comp] = pos
        comp_len[n_comp] = cnt
        n_comp += 1
        pos += cnt
    out = np.empty(m, dtype=np.int64)
    order = np.argsort(-comp_len[:n_comp], kind="mergesort")
    pos = 0
    for c in order:
        s = comp_start[c]
        for q in range(comp_len[c]):
            out[pos] = buf[s + q]
            pos += 1
    for t in range(m):
        done[verts[t]] = False
    return out


def _part_sizes(n: int, n_parts: int) -> np.ndarray:
    base, extra = divmod(n, n_parts)
    return np.array([base + (1 if p < extra else 0) for p in range(n_parts)], dtype=INDEX)


def bisection_assignment(a: SparseCsr, n_parts: int) -> np.ndarray:
    """Recursive level-set bisection; returns the part of every row."""
    n = a.n_rows
    assignment = np.zeros(n, dtype=INDEX)
    if n_parts == 1 or n == 0:
        return assignment
    g = adjacency(a)
    ptr = g.indptr.astype(INDEX)
    idx = g.indices.astype(INDEX)
    sizes = _part_sizes(n, n_parts)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    mark = np.full(n, -1, dtype=INDEX)
    dist = np.full(n, -1, dtype=INDEX)
    done = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=INDEX)

    stack = [(np.arange(n, dtype=INDEX), 0, n_parts)]
    tag = 0
    while stack:
        verts, plo, phi = stack.pop()
        if phi - plo == 1:
            assignment[verts] = plo
            continue
        tag += 1
        mark[verts] = tag
        order = _level_order(ptr, idx, verts, mark, tag, dist, done, queue)
        pmid = plo + (phi - plo) // 2
        cut = int(offsets[pmid] - offsets[plo])
        stack.append((np.sort(order[cut:]), pmid, phi))
        stack.append((np.sort(order[:cut]), plo, pmid))
    return assignment


def natural_assignment(a: SparseCsr, n_parts: int) -> np.ndarray:
    """Contiguous slices of the original order (regular grids)."""
    sizes = _part_sizes(a.n_rows, n_parts)
    return np.repeat(np.arange(n_parts, dtype=INDEX), sizes)


PARTITIONERS: dict[str, Callable[[SparseCsr, int], np.ndarray]] = {
    "bisection": bisection_assignment,
    "natural": natural_assignment,
}


def partition_rows(a: SparseCsr, n_parts: int,
                   method: str | Callable[[SparseCsr, int], np.ndarray] = "bisection") -> RowPartition:
    """Partition the rows of a square matrix into ``n_parts`` contiguous blocks.

    Parameters
    ----------
    a : SparseCsr
        Square matrix; only its (symmetrised) pattern is used.
    n_parts : int
        Number of parts, ``1 <= n_parts <= n_rows``.
    method : str or callable
        Key of :data:`PARTITIONERS` or a callable returning a per-row part
        assignment.
    """
    if a.n_rows != a.n_cols:
        raise ValueError("partition_rows needs a square matrix")
    n_parts = int(n_parts)
    if n_parts < 1:
        raise ValueError("n_parts must be >= 1")
    if n_parts > max(a.n_rows, 1):
        raise ValueError(f"n_parts={n_parts} exceeds n_rows={a.n_rows}")
    if n_parts == 1:
        return RowPartition.identity(a.n_rows)
    fn = PARTITIONERS[method] if isinstance(method, str) else method
    return RowPartition.from_assignment(fn(a, n_parts), n_parts)


def permute_symmetric(a: SparseCsr, p: RowPartition | np.ndarray) -> SparseCsr:
    """``P A P^T`` with ``(P A P^T)[perm[i], perm[j]] = A[i, j]``."""
    perm = p.perm if isinstance(p, RowPartition) else np.asarray(p, dtype=INDEX)
    if a.n_rows != a.n_cols or perm.shape[0] != a.n_rows:
        raise ValueError("permutation does not match a square matrix")
    return SparseCsr.from_coo(perm[a.row_indices()], perm[a.col_idx], a.values, a.shape)


# -- partition files ----------------------------------------------------------

def write_partition(path: str | os.PathLike, p: RowPartition) -> None:
    """One ``row part`` pair per line (0-based original rows)."""
    assign = p.assignment()
    with open(path, "w") as fh:
        fh.write(f"# rows={p.n_rows} parts={p.n_parts}\n")
        for i, q in enumerate(assign):
            fh.write(f"{i} {int(q)}\n")


def read_partition(path: str | os.PathLike) -> RowPartition:
    n_parts = None
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("parts="):
                        n_parts = int(tok.split("=", 1)[1])
                continue
            row, part = line.split()
            pairs.append((int(row), int(part)))
    pairs.sort()
    rows = np.array([r for r, _ in pairs], dtype=INDEX)
    if not np.array_equal(rows, np.arange(rows.shape[0])):
        raise ValueError(f"{path}: rows must be exactly 0..n-1")
    return RowPartition.from_assignment([q for _, q in pairs], n_parts)


# -- restricted additive Schwarz blocks ---------------------------------------

@dataclass(frozen=True, eq=False)
class RasBlock:
    """One overlapping diagonal block.

    ``rows`` are sorted global indices (owned range plus overlap);
    ``layer[t]`` is 0 for owned rows and the BFS distance for overlap rows.
    ``keep`` marks the owned rows, the only ones mapped back by the
    restricted prolongation.
    """

    part: int
    owned: tuple[int, int]
    rows: np.ndarray
    layer: np.ndarray
    local_matrix: SparseCsr
    keep: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])

    @property
    def overlap_rows(self) -> np.ndarray:
        return self.rows[~self.keep]


def overlap_layers(g: sps.csr_matrix, lo: int, hi: int, overlap: int) -> np.ndarray:
    """BFS distance from ``lo:hi`` over graph ``g`` (-1 beyond ``overlap``)."""
    n = g.shape[0]
    layer = np.full(n, -1, dtype=INDEX)
    layer[lo:hi] = 0
    frontier = np.arange(lo, hi, dtype=INDEX)
    for t in range(1, overlap + 1):
        if frontier.size == 0:
            break
        nbrs = np.unique(g[frontier].indices)
        nbrs = nbrs[layer[nbrs] < 0]
        layer[nbrs] = t
        frontier = nbrs.astype(INDEX)
    return layer


def extract_ras_blocks(a: SparseCsr, p: RowPartition, overlap: int = 0,
                       graph: sps.csr_matrix | None = None) -> list[RasBlock]:
    """Cut ``a`` (already in partition order) into overlapping diagonal blocks.

    Every entry outside a block's row/column set is discarded.  With
    ``overlap = l`` each block grows by ``l`` breadth-first layers of the
    matrix graph.
    """
    if overlap < 0:
        raise ValueError("overlap must be >= 0")
    if p.n_rows != a.n_rows:
        raise ValueError("partition does not match the matrix")
    g = adjacency(a) if (graph is None and overlap > 0) else graph
    sa = a.to_scipy()
    blocks = []
    for q in range(p.n_parts):
        lo, hi = p.part_range(q)
        if overlap > 0:
            layer_all = overlap_layers(g, lo, hi, overlap)
            rows = np.flatnonzero(layer_all >= 0).astype(INDEX)
            layer = layer_all[rows]
        else:
            rows = np.arange(lo, hi, dtype=INDEX)
            layer = np.zeros(hi - lo, dtype=INDEX)
        local = SparseCsr.from_scipy(sa[rows][:, rows])
        blocks.append(RasBlock(q, (lo, hi), rows, layer, local, layer == 0))
    return blocks
