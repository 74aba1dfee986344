"""Classical interpolation: direct and standard (Ruge-Stueben).

For an F point ``i`` with strong C set ``C_i``:

direct
    ``w_ij = -alpha a_ij / a_ii`` for negative ``a_ij`` and
    ``w_ij = -beta a_ij / a_ii`` for positive ones, where ``alpha`` (``beta``)
    is the ratio of all negative (positive) off-diagonal row entries to those
    in ``C_i``.  A sign class with no entry in ``C_i`` is lumped into the
    diagonal instead.
standard
    Strong F neighbours ``m`` are eliminated first: ``a_im`` is spread over
    ``C_i`` in proportion to ``a_mk`` (only entries of opposite sign to
    ``a_mm``).  Weak couplings are lumped into the diagonal.

C points get an identity row.  Both keep ``P 1 = 1`` for zero row-sum
M-matrices.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..csr import SparseCsr
from .coarsen import CfSplitting
from .strength import StrengthGraph

__all__ = ["InterpolationError", "interp_direct", "interp_standard", "INTERPOLATORS"]


class InterpolationError(ValueError):
    def __init__(self, row: int):
        self.row = int(row)
        super().__init__(f"F point {self.row} has no strong C neighbour")


@njit(cache=True)
def _direct(n, rp, ci, v, sp, si, is_c, cidx):
    cap = rp[n] + n
    prow = np.zeros(n + 1, dtype=np.int64)
    pcol = np.empty(cap, dtype=np.int64)
    pval = np.empty(cap)
    strong = np.full(n, -1, dtype=np.int64)
    pos = 0
    for i in range(n):
        if is_c[i]:
            pcol[pos] = cidx[i]
            pval[pos] = 1.0
            pos += 1
            prow[i + 1] = pos
            continue
        for q in range(sp[i], sp[i + 1]):
            strong[si[q]] = i
        diag = 0.0
        neg_all = 0.0
        pos_all = 0.0
        neg_c = 0.0
        pos_c = 0.0
        n_c = 0
        for q in range(rp[i], rp[i + 1]):
            j = ci[q]
            a = v[q]
            if j == i:
                diag += a
                continue
            if a < 0.0:
                neg_all += a
            else:
                pos_all += a
            if strong[j] == i and is_c[j]:
                n_c += 1
                if a < 0.0:
                    neg_c += a
                else:
                    pos_c += a
        if n_c == 0:
            return prow, pcol, pval, i
        if neg_c != 0.0:
            alpha = neg_all / neg_c
        else:
            alpha = 0.0
            diag += neg_all
        if pos_c != 0.0:
            beta = pos_all / pos_c
        else:
            beta = 0.0
            diag += pos_all
        for q in range(rp[i], rp[i + 1]):
            j = ci[q]
            if j != i and strong[j] == i and is_c[j]:
                a = v[q]
                w = alpha * a if a < 0.0 else beta * a
                pcol[pos] = cidx[j]
                pval[pos] = -w / diag
                pos += 1
        prow[i + 1] = pos
    return prow, pcol[:pos].copy(), pval[:pos].copy(), -1


@njit(cache=True)
def _standard(n, rp, ci, v, sp, si, is_c, cidx):
    cap = rp[n] + n
    prow = np.zeros(n + 1, dtype=np.int64)
    pcol = np.empty(cap, dtype=np.int64)
    pval = np.empty(cap)
    strong = np.full(n, -1, dtype=np.int64)
    slot = np.full(n, -1, dtype=np.int64)  # position of a C_i member in numer
    cols = np.empty(n, dtype=np.int64)
    numer = np.zeros(n)
    pos = 0
    for i in range(n):
        if is_c[i]:
            pcol[pos] = cidx[i]
            pval[pos] = 1.0
            pos += 1
            prow[i + 1] = pos
            continue
        for q in range(sp[i], sp[i + 1]):
            strong[si[q]] = i
        m_c = 0
        for q in range(rp[i], rp[i + 1]):
            j = ci[q]
            if j != i and strong[j] == i and is_c[j]:
                slot[j] = m_c
                cols[m_c] = j
                numer[m_c] = v[q]
                m_c += 1
        if m_c == 0:
            return prow, pcol, pval, i
        diag = 0.0
        for q in range(rp[i], rp[i + 1]):
            m = ci[q]
            a = v[q]
            if m == i:
                diag += a
            elif strong[m] == i and not is_c[m]:
                # find a_mm, then distribute over C_i
                amm = 0.0
                for t in range(rp[m], rp[m + 1]):
                    if ci[t] == m:
                        amm = v[t]
                denom = 0.0
                for t in range(rp[m], rp[m + 1]):
                    k = ci[t]
                    if k != m and slot[k] >= 0 and v[t] * amm < 0.0:
                        denom += v[t]
                if denom == 0.0:
                    diag += a
                else:
                    for t in range(rp[m], rp[m + 1]):
                        k = ci[t]
                        if k != m and slot[k] >= 0 and v[t] * amm < 0.0:
                            numer[slot[k]] += a * v[t] / denom
            elif not (strong[m] == i and is_c[m]):
                diag += a
        # C_i members appear in ascending column order already
        for t in range(m_c):
            j = cols[t]
            pcol[pos] = cidx[j]
            pval[pos] = -numer[t] / diag
            pos += 1
            slot[j] = -1
        prow[i + 1] = pos
    return prow, pcol[:pos].copy(), pval[:pos].copy(), -1


def _build(kernel, a: SparseCsr, cf: CfSplitting, s: StrengthGraph) -> SparseCsr:
    if cf.n != a.n_rows or s.n != a.n_rows:
        raise ValueError("splitting, strength graph and matrix sizes differ")
    g = s.graph
    prow, pcol, pval, bad = kernel(a.n_rows, a.row_ptr, a.col_idx, a.values,
                                   g.row_ptr, g.col_idx, cf.is_coarse.astype(np.bool_),
                                   cf.coarse_index)
    if bad >= 0:
        raise InterpolationError(bad)
    return SparseCsr(a.n_rows, cf.n_coarse, prow, pcol, pval)


def interp_direct(a: SparseCsr, cf: CfSplitting, s: StrengthGraph) -> SparseCsr:
    """Direct interpolation ``P`` (fine x coarse)."""
    return _build(_direct, a, cf, s)


def interp_standard(a: SparseCsr, cf: CfSplitting, s: StrengthGraph) -> SparseCsr:
    """Standard interpolation ``P`` (fine x coarse)."""
    return _build(_standard, a, cf, s)


INTERPOLATORS = {"direct": interp_direct, "rsd": interp_direct,
                 "standard": interp_standard, "rsstd": interp_standard}
