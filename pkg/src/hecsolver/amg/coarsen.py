"""C/F splittings: classical two-pass Ruge-Stueben and CLJP.

Both end with the same repair pass: a point with no strong couplings, or an
F point left without a strong C dependency, becomes C.  That makes every
splitting valid for interpolation.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..csr import INDEX
from .strength import StrengthGraph

__all__ = ["CfSplitting", "rs_coarsen", "cljp_coarsen", "is_valid_splitting", "COARSENERS"]

F_PT = 0
C_PT = 1
_UNDECIDED = -1


@dataclass(frozen=True, eq=False)
class CfSplitting:
    """``is_coarse[i]`` is 1 for C points; ``coarse_index`` is -1 on F points."""

    is_coarse: np.ndarray
    coarse_index: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> "CfSplitting":
        c = (np.asarray(labels) == C_PT).astype(np.int8)
        idx = np.full(c.shape[0], -1, dtype=INDEX)
        idx[c == 1] = np.arange(int(c.sum()), dtype=INDEX)
        return cls(c, idx)

    @property
    def n(self) -> int:
        return int(self.is_coarse.shape[0])

    @property
    def n_coarse(self) -> int:
        return int(self.is_coarse.sum())

    @property
    def coarse_points(self) -> np.ndarray:
        return np.flatnonzero(self.is_coarse)

    def labels(self) -> str:
        return "".join("C" if c else "F" for c in self.is_coarse)


@njit(cache=True)
def _repair(n, sp, si, state):
    for i in range(n):
        if sp[i] == sp[i + 1]:
            state[i] = C_PT
    for i in range(n):
        if state[i] != C_PT:
            ok = False
            for q in range(sp[i], sp[i + 1]):
                if state[si[q]] == C_PT:
                    ok = True
                    break
            if not ok:
                state[i] = C_PT
            else:
                state[i] = F_PT
    return state


def is_valid_splitting(s: StrengthGraph, cf: CfSplitting) -> bool:
    """Every F point strongly depends on at least one C point."""
    g = s.graph
    rows = g.row_indices()
    has_c = np.zeros(g.n_rows, dtype=bool)
    has_c[rows[cf.is_coarse[g.col_idx] == 1]] = True
    return bool(np.all(has_c | (cf.is_coarse == 1)))


# -- Ruge-Stueben ---------------------------------------------------------------

@njit(cache=True)
def _rs_first_pass(n, sp, si, tp, ti):
    # max-heap on measure, lowest index first on ties; keys are -lam * n + i
    state = np.full(n, _UNDECIDED, dtype=np.int64)
    lam = np.empty(n, dtype=np.int64)
    for i in range(n):
        lam[i] = tp[i + 1] - tp[i]
    heap = [np.int64(0) for _ in range(0)]
    for i in range(n):
        if sp[i] == sp[i + 1]:
            state[i] = C_PT  # no strong couplings: keep as coarse
        else:
            heap.append(-lam[i] * n + i)
    heapq.heapify(heap)
    # points without couplings still make their dependents F
    for i in range(n):
        if state[i] == C_PT:
            _rs_make_coarse(i, n, sp, si, tp, ti, state, lam, heap)
    while len(heap) > 0:
        key = heapq.heappop(heap)
        i = key % n
        if state[i] != _UNDECIDED or (key - i) // n != -lam[i]:
            continue
        if lam[i] == 0:
            state[i] = F_PT
            continue
        state[i] = C_PT
        _rs_make_coarse(i, n, sp, si, tp, ti, state, lam, heap)
    return state


@njit(cache=True)
def _rs_make_coarse(i, n, sp, si, tp, ti, state, lam, heap):
    for q in range(tp[i], tp[i + 1]):
        j = ti[q]
        if state[j] == _UNDECIDED:
            state[j] = F_PT
            for t in range(sp[j], sp[j + 1]):
                k = si[t]
                if state[k] == _UNDECIDED:
                    lam[k] += 1
                    heapq.heappush(heap, -lam[k] * n + k)
    for q in range(sp[i], sp[i + 1]):
        j = si[q]
        if state[j] == _UNDECIDED:
            lam[j] -= 1
            heapq.heappush(heap, -lam[j] * n + j)


@njit(cache=True)
def _rs_second_pass(n, sp, si, state):
    # strong F-F pairs must share a strong C point; otherwise promote one
    mark = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if state[i] != F_PT:
            continue
        for q in range(sp[i], sp[i + 1]):
            j = si[q]
            if state[j] == C_PT:
                mark[j] = i
        tentative = -1
        q = sp[i]
        while q < sp[i + 1]:
            j = si[q]
            q += 1
            if state[j] != F_PT:
                continue
            shared = False
            for t in range(sp[j], sp[j + 1]):
                if mark[si[t]] == i:
                    shared = True
                    break
            if shared:
                continue
            if tentative >= 0:
                # a second conflict: make i itself coarse instead
                state[tentative] = F_PT
                state[i] = C_PT
                break
            tentative = j
            state[j] = C_PT
            mark[j] = i
        if state[i] == C_PT:
            for t in range(sp[i], sp[i + 1]):
                if mark[si[t]] == i:
                    mark[si[t]] = -1
    return state


def rs_coarsen(s: StrengthGraph) -> CfSplitting:
    """Classical Ruge-Stueben splitting.

    First pass picks C points by descending measure ``|S_i^T|`` (ties to
    the lowest index) and makes their undecided dependents F.  Second pass
    makes sure every strongly coupled F-F pair shares a strong C point.
    """
    g = s.graph
    st = s.transpose()
    n = g.n_rows
    state = _rs_first_pass(n, g.row_ptr, g.col_idx, st.row_ptr, st.col_idx)
    state = _rs_second_pass(n, g.row_ptr, g.col_idx, state)
    state = _repair(n, g.row_ptr, g.col_idx, state)
    return CfSplitting.from_labels(state)


# -- CLJP -----------------------------------------------------------------------

@njit(cache=True)
def _cljp(n, sp, si, tp, ti, tpos, weight):
    state = np.full(n, _UNDECIDED, dtype=np.int64)
    alive = np.ones(si.shape[0], dtype=np.bool_)
    mark = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if sp[i] == sp[i + 1]:
            state[i] = C_PT
    for i in range(n):
        if state[i] == _UNDECIDED and weight[i] < 1.0:
            state[i] = F_PT
    chosen = np.empty(n, dtype=np.int64)
    while True:
        m = 0
        remaining = 0
        for i in range(n):
            if state[i] != _UNDECIDED:
                continue
            remaining += 1
            best = True
            for q in range(sp[i], sp[i + 1]):
                j = si[q]
                if alive[q] and state[j] == _UNDECIDED:
                    if weight[j] > weight[i] or (weight[j] == weight[i] and j < i):
                        best = False
                        break
            if best:
                for q in range(tp[i], tp[i + 1]):
                    j = ti[q]
                    if alive[tpos[q]] and state[j] == _UNDECIDED:
                        if weight[j] > weight[i] or (weight[j] == weight[i] and j < i):
                            best = False
                            break
            if best:
                chosen[m] = i
                m += 1
        if remaining == 0:
            break
        for t in range(m):
            state[chosen[t]] = C_PT
        for t in range(m):
            c = chosen[t]
            # c no longer needs the points it depends on
            for q in range(sp[c], sp[c + 1]):
                if alive[q]:
                    alive[q] = False
                    j = si[q]
                    if state[j] == _UNDECIDED:
                        weight[j] -= 1.0
            # points k depending on c can interpolate through c
            for q in range(tp[c], tp[c + 1]):
                k = ti[q]
                if alive[tpos[q]]:
                    alive[tpos[q]] = False
                mark[k] = c
            for q in range(tp[c], tp[c + 1]):
                j = ti[q]
                if state[j] == C_PT:
                    continue
                # k depends on j and on c: drop k -> j
                for u in range(tp[j], tp[j + 1]):
                    k = ti[u]
                    e = tpos[u]
                    if alive[e] and mark[k] == c:
                        alive[e] = False
                        if state[j] == _UNDECIDED:
                            weight[j] -= 1.0
        for i in range(n):
            if state[i] == _UNDECIDED and weight[i] < 1.0:
                state[i] = F_PT
    return state


def cljp_coarsen(s: StrengthGraph, seed: int = 0) -> CfSplitting:
    """CLJP splitting: independent sets by weight ``|S_i^T| + U[0, 1)``.

    Each round every undecided point whose weight beats all its undecided
    strong neighbours becomes C; edges it makes redundant are removed and the
    weights of the affected points lowered.  Points whose weight falls below
    one become F.  The random part comes from ``numpy.random.default_rng(seed)``,
    so a fixed seed gives a fixed splitting.
    """
    g = s.graph
    st = s.transpose()
    n = g.n_rows
    # position in g of each transposed edge
    rows = g.row_indices()
    key = g.col_idx * n + rows
    tpos = np.argsort(key, kind="stable").astype(INDEX)
    rng = np.random.default_rng(seed)
    weight = np.diff(st.row_ptr).astype(np.float64) + rng.random(n)
    state = _cljp(n, g.row_ptr, g.col_idx, st.row_ptr, st.col_idx, tpos, weight)
    state = _repair(n, g.row_ptr, g.col_idx, state)
    return CfSplitting.from_labels(state)


COARSENERS = {"rs": rs_coarsen, "cljp": cljp_coarsen}
