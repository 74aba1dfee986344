"""Reference implementations used only by the tests.

Each oracle is written independently of the library code it checks: dense
linear algebra, plain Python loops, or networkx graph routines.
"""

from __future__ import annotations

import math

import networkx as nx
import numpy as np


def dense_matvec(a_dense, x):
    return np.asarray(a_dense, dtype=float) @ np.asarray(x, dtype=float)


def column_expansion(a_dense, x):
    """``A x`` as the combination ``sum_k x_k A[:, k]`` of the columns."""
    a_dense = np.asarray(a_dense, dtype=float)
    y = np.zeros(a_dense.shape[0])
    for k in range(a_dense.shape[1]):
        y = y + x[k] * a_dense[:, k]
    return y


def kahan_dot(x, y):
    s = 0.0
    c = 0.0
    for a, b in zip(np.asarray(x, float).tolist(), np.asarray(y, float).tolist()):
        t = a * b - c
        u = s + t
        c = (u - s) - t
        s = u
    return s


def kahan_norm(x):
    return math.sqrt(kahan_dot(x, x))


def rel_err(a, b) -> float:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    scale = max(float(np.max(np.abs(b))) if b.size else 0.0, 1e-300)
    return float(np.max(np.abs(a - b))) / scale if a.size else 0.0


# -- ILU ----------------------------------------------------------------------------

def dense_fill_levels(a_dense, k):
    """Brute-force level-of-fill on a dense level table.

    Returns the ``n x n`` array of levels with ``inf`` outside the pattern.
    """
    a = np.asarray(a_dense)
    n = a.shape[0]
    lev = np.where(a != 0, 0.0, np.inf)
    for i in range(n):
        for p in range(i):
            if lev[i, p] <= k:
                cand = lev[i, p] + lev[p, p + 1:] + 1
                lev[i, p + 1:] = np.minimum(lev[i, p + 1:], cand)
        lev[i, lev[i] > k] = np.inf
    return lev


def dense_ilu(a_dense, mask):
    """IKJ incomplete elimination on a dense copy restricted to ``mask``."""
    w = np.array(a_dense, dtype=float)
    n = w.shape[0]
    for i in range(1, n):
        for p in range(i):
            if not mask[i, p]:
                continue
            w[i, p] /= w[p, p]
            for j in range(p + 1, n):
                if mask[i, j]:
                    w[i, j] -= w[i, p] * w[p, j]
    lower = np.tril(w, -1) + np.eye(n)
    upper = np.triu(w)
    return lower, upper


def dag_levels(tri_dense, lower=True):
    """Level of every row as the longest dependency path (networkx)."""
    t = np.asarray(tri_dense)
    n = t.shape[0]
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for i, j in zip(*np.nonzero(t)):
        if (lower and j < i) or (not lower and j > i):
            g.add_edge(int(j), int(i))
    level = {}
    for v in nx.topological_sort(g):
        preds = list(g.predecessors(v))
        level[v] = 1 + max((level[u] for u in preds), default=0)
    return np.array([level[i] for i in range(n)]), nx.dag_longest_path_length(g) + 1


# -- partitioning -------------------------------------------------------------------------

def crossing_entries(a_scipy, part_of):
    """Stored entries ``(i, j)`` whose row and column lie in different parts."""
    coo = a_scipy.tocoo()
    return [(int(i), int(j)) for i, j in zip(coo.row, coo.col) if part_of[i] != part_of[j]]


def halo_pairs(a_scipy, part_of):
    """Distinct ``(part of i, j)`` over crossing entries: values a part must receive."""
    return {(int(part_of[i]), j) for i, j in crossing_entries(a_scipy, part_of)}


# -- multigrid ------------------------------------------------------------------------------

def has_strong_c(s_rows, is_coarse):
    """Every F point has a C point among its strong dependencies."""
    for i, row in enumerate(s_rows):
        if not is_coarse[i] and not any(is_coarse[j] for j in row):
            return False
    return True


def strong_sets(a_dense, theta):
    """Strong dependencies by the magnitude rule, straight from the definition."""
    a = np.asarray(a_dense, float)
    out = []
    for i in range(a.shape[0]):
        off = [(j, abs(a[i, j])) for j in range(a.shape[1]) if j != i and a[i, j] != 0]
        m = max((v for _, v in off), default=0.0)
        out.append(sorted(j for j, v in off if m > 0 and v >= theta * m))
    return out


def energy_norm(a_dense, e):
    return math.sqrt(max(float(e @ (a_dense @ e)), 0.0))
