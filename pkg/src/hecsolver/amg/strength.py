"""Classical strength of connection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..csr import SparseCsr

__all__ = ["StrengthGraph", "strength"]


@dataclass(frozen=True, eq=False)
class StrengthGraph:
    """``graph`` row ``i`` lists the points ``i`` strongly depends on (``S_i``)."""

    theta: float
    negative_only: bool
    graph: SparseCsr

    @property
    def n(self) -> int:
        return self.graph.n_rows

    def strong(self, i: int) -> np.ndarray:
        return self.graph.row(i)[0]

    def transpose(self) -> SparseCsr:
        """Row ``j`` lists the points that strongly depend on ``j``."""
        return self.graph.transpose()


def strength(a: SparseCsr, theta: float = 0.25, negative_only: bool = False) -> StrengthGraph:
    """Strong couplings ``j in S_i`` iff ``|a_ij| >= theta * max_{k != i} |a_ik|``.

    With ``negative_only`` the rule uses ``-a_ij`` and only negative
    off-diagonal entries can be strong.  Rows without off-diagonal entries
    (or with all-zero ones) have no strong couplings.
    """
    if a.n_rows != a.n_cols:
        raise ValueError("strength needs a square matrix")
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    rows = a.row_indices()
    off = rows != a.col_idx
    mag = -a.values if negative_only else np.abs(a.values)
    mag = np.where(off, mag, -np.inf)
    row_max = np.zeros(a.n_rows)
    np.maximum.at(row_max, rows, mag)
    thr = theta * row_max[rows]
    strong = off & (a.values != 0.0) & (row_max[rows] > 0.0) & (mag >= thr)
    ptr = np.zeros(a.n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows[strong], minlength=a.n_rows), out=ptr[1:])
    cols = a.col_idx[strong]
    g = SparseCsr(a.n_rows, a.n_cols, ptr, cols, np.ones(cols.shape[0]))
    return StrengthGraph(float(theta), bool(negative_only), g)
