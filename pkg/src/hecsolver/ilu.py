"""ILU(k) factorization and level-scheduled triangular solves.

Symbolic phase: every entry of ``A`` starts at fill level 0, every other
position at infinity.  Row ``i`` is eliminated against pivots ``p < i`` in
ascending order (only pivots whose level is at most ``k``), updating
``lev(i, j) = min(lev(i, j), lev(i, p) + lev(p, j) + 1)`` for the ``U``
entries of row ``p``; positions whose level exceeds ``k`` are dropped when
the row is finished.

Numeric phase: IKJ elimination restricted to the symbolic pattern.  ``L``
(unit diagonal, implicit) and ``U`` share one CSR array, with the position
of each diagonal entry cached.  No pivoting is done.

Triangular solves group rows into dependency levels,
``level(i) = 1 + max level(j)`` over the off-diagonal entries of row ``i``;
rows in one level are independent.  The per-row arithmetic does not depend
on the schedule, so level-parallel and sequential solves agree bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._workers import check_workers, run_chunks
from .csr import INDEX, FormatError, SparseCsr

__all__ = [
    "ZeroPivotError", "MissingDiagonalError",
    "FillLevels", "LevelSchedule", "IluFactors",
    "ilu_symbolic", "ilu_factorize", "ilu", "build_level_schedule",
    "trisolve", "trisolve_sequential", "solve_lower", "solve_upper",
    "diagonal_positions",
]

PIVOT_TINY = 1e-300
_INF = np.iinfo(np.int64).max


class ZeroPivotError(ArithmeticError):
    def __init__(self, row: int, value: float = 0.0):
        self.row = int(row)
        self.value = float(value)
        super().__init__(f"zero pivot in row {self.row} (|U_ii| = {abs(self.value):.3e})")


class MissingDiagonalError(FormatError):
    def __init__(self, row: int):
        self.row = int(row)
        super().__init__(f"row {self.row} has no stored diagonal entry")


# -- symbolic -----------------------------------------------------------------

@njit(nogil=True, cache=True)
def _symbolic(n, rp, ci, k):
    cap = max(2 * rp[n], 16)
    cols = np.empty(cap, dtype=np.int64)
    levs = np.empty(cap, dtype=np.int64)
    ptr = np.zeros(n + 1, dtype=np.int64)
    diag = np.empty(n, dtype=np.int64)
    lev = np.full(n, _INF, dtype=np.int64)
    nxt = np.empty(n + 1, dtype=np.int64)
    head = n
    pos = 0
    for i in range(n):
        prev = head
        has_diag = False
        for q in range(rp[i], rp[i + 1]):
            j = ci[q]
            lev[j] = 0
            nxt[prev] = j
            prev = j
            if j == i:
                has_diag = True
        nxt[prev] = -1
        if not has_diag:
            for q in range(rp[i], rp[i + 1]):
                lev[ci[q]] = _INF
            return ptr, cols, levs, diag, i
        p = nxt[head]
        while p != -1 and p < i:
            lp = lev[p]
            if lp <= k:
                cur = p
                for t in range(diag[p] + 1, ptr[p + 1]):
                    j = cols[t]
                    nl = lp + levs[t] + 1
                    if nl > k:
                        continue
                    if lev[j] == _INF:
                        while nxt[cur] != -1 and nxt[cur] < j:
                            cur = nxt[cur]
                        nxt[j] = nxt[cur]
                        nxt[cur] = j
                        lev[j] = nl
                    elif nl < lev[j]:
                        lev[j] = nl
                    cur = j
            p = nxt[p]
        # emit the row, growing storage when needed
        j = nxt[head]
        while j != -1:
            if pos == cap:
                cap *= 2
                c2 = np.empty(cap, dtype=np.int64)
                l2 = np.empty(cap, dtype=np.int64)
                c2[:pos] = cols[:pos]
                l2[:pos] = levs[:pos]
                cols = c2
                levs = l2
            cols[pos] = j
            levs[pos] = lev[j]
            if j == i:
                diag[i] = pos
            lev[j] = _INF
            pos += 1
            j = nxt[j]
        ptr[i + 1] = pos
    return ptr, cols[:pos].copy(), levs[:pos].copy(), diag, -1


@dataclass(frozen=True, eq=False)
class FillLevels:
    """ILU(k) pattern with the fill level of every retained position."""

    k: int
    pattern: SparseCsr  # values hold nothing meaningful (zeros)
    level: np.ndarray
    diag_pos: np.ndarray

    @property
    def nnz(self) -> int:
        return self.pattern.nnz


def ilu_symbolic(a: SparseCsr, k: int) -> FillLevels:
    """Level-of-fill pattern of ILU(k)."""
    if a.n_rows != a.n_cols:
        raise ValueError("ILU needs a square matrix")
    if k < 0:
        raise ValueError("fill level k must be >= 0")
    a.check_canonical()
    ptr, cols, levs, diag, bad = _symbolic(a.n_rows, a.row_ptr, a.col_idx, int(k))
    if bad >= 0:
        raise MissingDiagonalError(bad)
    pattern = SparseCsr(a.n_rows, a.n_cols, ptr, cols, np.zeros(cols.shape[0]))
    return FillLevels(int(k), pattern, levs, diag)


# -- level schedules ----------------------------------------------------------

@njit(cache=True)
def _row_levels(n, rp, ci, lower):
    lev = np.zeros(n, dtype=np.int64)
    if lower:
        for i in range(n):
            m = 0
            for q in range(rp[i], rp[i + 1]):
                j = ci[q]
                if j < i and lev[j] > m:
                    m = lev[j]
            lev[i] = m + 1
    else:
        for i in range(n - 1, -1, -1):
            m = 0
            for q in range(rp[i], rp[i + 1]):
                j = ci[q]
                if j > i and lev[j] > m:
                    m = lev[j]
            lev[i] = m + 1
    return lev


@dataclass(frozen=True, eq=False)
class LevelSchedule:
    """Rows grouped by dependency level (levels numbered from 1).

    Rows of level ``t`` are ``rows[level_ptr[t - 1]:level_ptr[t]]``, ascending.
    """

    orientation: str
    n_levels: int
    level_ptr: np.ndarray
    rows: np.ndarray
    level_of: np.ndarray

    def level_rows(self, t: int) -> np.ndarray:
        return self.rows[self.level_ptr[t - 1]:self.level_ptr[t]]

    def widths(self) -> np.ndarray:
        return np.diff(self.level_ptr)


def _schedule(a: SparseCsr, orientation: str) -> LevelSchedule:
    if orientation not in ("lower", "upper"):
        raise ValueError("orientation must be 'lower' or 'upper'")
    lev = _row_levels(a.n_rows, a.row_ptr, a.col_idx, orientation == "lower")
    n_levels = int(lev.max()) if a.n_rows else 0
    rows = np.argsort(lev, kind="stable").astype(INDEX)
    level_ptr = np.zeros(n_levels + 1, dtype=INDEX)
    np.cumsum(np.bincount(lev, minlength=n_levels + 1)[1:], out=level_ptr[1:])
    return LevelSchedule(orientation, n_levels, level_ptr, rows, lev)


def build_level_schedule(tri: SparseCsr, orientation: str = "lower") -> LevelSchedule:
    """Level schedule of a triangular matrix.

    Raises ``FormatError`` if ``tri`` has entries on the wrong side of the
    diagonal.
    """
    rows = tri.row_indices()
    if orientation == "lower" and np.any(tri.col_idx > rows):
        raise FormatError("matrix is not lower triangular")
    if orientation == "upper" and np.any(tri.col_idx < rows):
        raise FormatError("matrix is not upper triangular")
    return _schedule(tri, orientation)


# -- numeric ------------------------------------------------------------------

@njit(nogil=True, cache=True)
def _numeric(n, a_rp, a_ci, a_v, rp, ci, diag, tiny, diag_scale):
    vals = np.zeros(ci.shape[0])
    where = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for q in range(rp[i], rp[i + 1]):
            where[ci[q]] = q
        for q in range(a_rp[i], a_rp[i + 1]):
            vals[where[a_ci[q]]] = a_v[q]
        if diag_scale != 1.0:
            vals[diag[i]] *= diag_scale
        for q in range(rp[i], diag[i]):
            p = ci[q]
            lip = vals[q] / vals[diag[p]]
            vals[q] = lip
            for t in range(diag[p] + 1, rp[p + 1]):
                w = where[ci[t]]
                if w >= 0:
                    vals[w] -= lip * vals[t]
        for q in range(rp[i], rp[i + 1]):
            where[ci[q]] = -1
        if not abs(vals[diag[i]]) >= tiny:
            return vals, i
    return vals, -1


@dataclass(frozen=True, eq=False)
class IluFactors:
    """``L`` (strictly lower, unit diagonal) and ``U`` in one CSR array."""

    combined: SparseCsr
    diag_pos: np.ndarray
    lower_schedule: LevelSchedule
    upper_schedule: LevelSchedule
    fills: FillLevels | None = None

    @property
    def n(self) -> int:
        return self.combined.n_rows

    def lower(self) -> SparseCsr:
        """``L`` with its unit diagonal made explicit."""
        c = self.combined
        rows = c.row_indices()
        m = c.col_idx < rows
        idx = np.arange(c.n_rows, dtype=INDEX)
        return SparseCsr.from_coo(np.concatenate([rows[m], idx]),
                                  np.concatenate([c.col_idx[m], idx]),
                                  np.concatenate([c.values[m], np.ones(c.n_rows)]), c.shape)

    def upper(self) -> SparseCsr:
        c = self.combined
        rows = c.row_indices()
        m = c.col_idx >= rows
        return SparseCsr.from_coo(rows[m], c.col_idx[m], c.values[m], c.shape)

    @classmethod
    def from_combined(cls, combined: SparseCsr, fills: FillLevels | None = None) -> "IluFactors":
        return cls(combined, diagonal_positions(combined),
                   _schedule(combined, "lower"), _schedule(combined, "upper"), fills)


def diagonal_positions(a: SparseCsr) -> np.ndarray:
    """Position of each row's diagonal entry; raises if one is missing."""
    rows = a.row_indices()
    on = np.flatnonzero(rows == a.col_idx)
    pos = np.full(a.n_rows, -1, dtype=INDEX)
    pos[rows[on]] = on
    if np.any(pos < 0):
        raise MissingDiagonalError(int(np.flatnonzero(pos < 0)[0]))
    return pos


def ilu_factorize(a: SparseCsr, fills: FillLevels, shift_on_breakdown: float | None = None) -> IluFactors:
    """Numeric ILU over a symbolic pattern.

    Parameters
    ----------
    a : SparseCsr
        The matrix the pattern was computed from.
    fills : FillLevels
        Output of :func:`ilu_symbolic` for ``a``.
    shift_on_breakdown : float, optional
        Off by default.  When set and a zero pivot occurs, the factorization
        is retried once with every diagonal entry scaled by
        ``1 + shift_on_breakdown``.
    """
    pat = fills.pattern
    if pat.shape != a.shape or pat.nnz < a.nnz:
        raise ValueError("pattern was not computed from this matrix")
    vals, bad = _numeric(a.n_rows, a.row_ptr, a.col_idx, a.values,
                         pat.row_ptr, pat.col_idx, fills.diag_pos, PIVOT_TINY, 1.0)
    if bad >= 0 and shift_on_breakdown:
        vals, bad = _numeric(a.n_rows, a.row_ptr, a.col_idx, a.values,
                             pat.row_ptr, pat.col_idx, fills.diag_pos, PIVOT_TINY,
                             1.0 + float(shift_on_breakdown))
    if bad >= 0:
        raise ZeroPivotError(bad, vals[fills.diag_pos[bad]])
    combined = SparseCsr(a.n_rows, a.n_cols, pat.row_ptr, pat.col_idx, vals)
    return IluFactors(combined, fills.diag_pos,
                      _schedule(combined, "lower"), _schedule(combined, "upper"), fills)


def ilu(a: SparseCsr, k: int = 0, **kwargs) -> IluFactors:
    return ilu_factorize(a, ilu_symbolic(a, k), **kwargs)


# -- triangular solves ------------------------------------------------------

@njit(nogil=True, cache=True)
def _lower_rows(rows, lo, hi, rp, ci, vals, diag, x, unit):
    for t in range(lo, hi):
        i = rows[t]
        s = x[i]
        for q in range(rp[i], diag[i]):
            s -= vals[q] * x[ci[q]]
        if unit:
            x[i] = s
        else:
            x[i] = s / vals[diag[i]]


@njit(nogil=True, cache=True)
def _upper_rows(rows, lo, hi, rp, ci, vals, diag, x, unit):
    for t in range(lo, hi):
        i = rows[t]
        s = x[i]
        for q in range(diag[i] + 1, rp[i + 1]):
            s -= vals[q] * x[ci[q]]
        if unit:
            x[i] = s
        else:
            x[i] = s / vals[diag[i]]


@njit(nogil=True, cache=True)
def _sequential_lower(n, rp, ci, vals, diag, x, unit):
    for i in range(n):
        s = x[i]
        for q in range(rp[i], diag[i]):
            s -= vals[q] * x[ci[q]]
        x[i] = s if unit else s / vals[diag[i]]


@njit(nogil=True, cache=True)
def _sequential_upper(n, rp, ci, vals, diag, x, unit):
    for i in range(n - 1, -1, -1):
        s = x[i]
        for q in range(diag[i] + 1, rp[i + 1]):
            s -= vals[q] * x[ci[q]]
        x[i] = s if unit else s / vals[diag[i]]


# levels narrower than this run on the calling thread
_MIN_PARALLEL_LEVEL = 256


def _scheduled_sweep(kernel, m: SparseCsr, diag, sched: LevelSchedule, x, unit, workers):
    rp, ci, vals = m.row_ptr, m.col_idx, m.values
    if workers == 1:
        kernel(sched.rows, 0, sched.rows.shape[0], rp, ci, vals, diag, x, unit)
        return x
    lp = sched.level_ptr
    for t in range(sched.n_levels):
        lo, hi = int(lp[t]), int(lp[t + 1])
        if hi - lo < _MIN_PARALLEL_LEVEL:
            kernel(sched.rows, lo, hi, rp, ci, vals, diag, x, unit)
        else:
            run_chunks(lambda a, b, lo=lo: kernel(sched.rows, lo + a, lo + b, rp, ci,
                                                  vals, diag, x, unit),
                       hi - lo, workers)
    return x


def solve_lower(m: SparseCsr, diag, sched: LevelSchedule, b, unit: bool = True,
                workers: int = 1) -> np.ndarray:
    """Solve with the lower triangle (plus diagonal unless ``unit``) of ``m``.

    Entries right of the diagonal are ignored, so ``m`` may be a full
    matrix; ``sched`` must be its lower schedule.
    """
    x = np.array(b, dtype=np.float64, copy=True)
    return _scheduled_sweep(_lower_rows, m, diag, sched, x, unit, check_workers(workers))


def solve_upper(m: SparseCsr, diag, sched: LevelSchedule, b, unit: bool = False,
                workers: int = 1) -> np.ndarray:
    x = np.array(b, dtype=np.float64, copy=True)
    return _scheduled_sweep(_upper_rows, m, diag, sched, x, unit, check_workers(workers))


def trisolve(f: IluFactors, b, workers: int = 1) -> np.ndarray:
    """Solve ``L U x = b`` with level-scheduled sweeps."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (f.n,):
        raise ValueError(f"dimension mismatch: b has shape {b.shape}, expected ({f.n},)")
    workers = check_workers(workers)
    c = f.combined
    x = b.copy()
    _scheduled_sweep(_lower_rows, c, f.diag_pos, f.lower_schedule, x, True, workers)
    _scheduled_sweep(_upper_rows, c, f.diag_pos, f.upper_schedule, x, False, workers)
    return x


def trisolve_sequential(f: IluFactors, b) -> np.ndarray:
    """Plain forward/backward substitution in natural row order."""
    c = f.combined
    x = np.array(b, dtype=np.float64, copy=True)
    _sequential_lower(f.n, c.row_ptr, c.col_idx, c.values, f.diag_pos, x, True)
    _sequential_upper(f.n, c.row_ptr, c.col_idx, c.values, f.diag_pos, x, False)
    return x
