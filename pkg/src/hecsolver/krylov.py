"""Preconditioned Krylov solvers: BiCGSTAB, restarted GMRES and CG.

All solvers stop on the relative residual ``||b - A x|| / ||b|| <= tol``.
When the recursively updated residual reports convergence the true residual
is recomputed; if it is still above the tolerance the method restarts from
the current iterate, so a converged report always satisfies the tolerance.
Breakdowns end the solve with a populated ``breakdown`` field instead of
raising.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .comm import PartitionedMatrix, build_partitioned, partitioned_spmv, split_segments
from .csr import SparseCsr
from .hec import HecMatrix, hec_from_csr
from .kernels import axpby_inplace, axpbyz, dot, norm2, spmv
from .partition import RowPartition, partition_rows, permute_symmetric
from .precond import as_preconditioner

__all__ = ["SolverConfig", "SolveReport", "PartitionedOperator",
           "bicgstab", "gmres", "cg", "true_relative_residual"]


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    max_iterations: int = 1000
    restart: int = 30
    initial_guess: np.ndarray | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class SolveReport:
    iterations: int = 0
    final_relative_residual: float = 0.0
    converged: bool = False
    breakdown: str | None = None
    timings: dict = field(default_factory=lambda: {
        "setup": 0.0, "apply": 0.0, "spmv": 0.0, "precond": 0.0})
    comm_volume: int = 0
    residual_history: list = field(default_factory=list, repr=False)

    @property
    def status(self) -> str:
        if self.converged:
            return "converged"
        return self.breakdown or "max_iterations"


class PartitionedOperator:
    """``A`` split over ``n_parts`` row blocks with halo exchange.

    Products take and return vectors in the original ordering; each
    product adds ``plan.comm_volume`` to :attr:`comm_volume`.
    """

    def __init__(self, a: SparseCsr, n_parts: int, partitioner="bisection",
                 partition: RowPartition | None = None, workers: int = 1):
        self.partition = partition or partition_rows(a, n_parts, partitioner)
        self.matrix: PartitionedMatrix = build_partitioned(
            permute_symmetric(a, self.partition), self.partition)
        self.n_rows = self.n_cols = a.n_rows
        self.workers = workers
        self.comm_volume = 0

    def matvec(self, x):
        perm = self.partition.perm
        xp = np.empty_like(x)
        xp[perm] = x
        yp = partitioned_spmv(self.matrix, split_segments(xp, self.partition.part_ptr),
                              workers=self.workers)
        self.comm_volume += self.matrix.plan.comm_volume
        return yp[perm]


class _Op:
    def __init__(self, a, workers):
        if isinstance(a, SparseCsr):
            if a.n_rows != a.n_cols:
                raise ValueError("solver needs a square matrix")
            a = hec_from_csr(a)
        self.a = a
        self.n = a.n_rows
        self.workers = workers
        self.seconds = 0.0
        self.count = 0

    def __call__(self, x):
        t0 = time.perf_counter()
        if isinstance(self.a, (HecMatrix, SparseCsr)):
            y = spmv(self.a, x, workers=self.workers)
        elif hasattr(self.a, "matvec"):
            y = np.asarray(self.a.matvec(x), dtype=np.float64)
        else:
            y = np.asarray(self.a @ x, dtype=np.float64)
        self.seconds += time.perf_counter() - t0
        self.count += 1
        return y

    @property
    def comm_volume(self) -> int:
        return int(getattr(self.a, "comm_volume", 0))


class _Pc:
    def __init__(self, m):
        self.m = as_preconditioner(m)
        self.seconds = 0.0

    def __call__(self, r):
        t0 = time.perf_counter()
        z = self.m.apply(r)
        self.seconds += time.perf_counter() - t0
        return z


def _prepare(a, b, m, config, workers):
    config = config or SolverConfig()
    op = _Op(a, workers)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (op.n,):
        raise ValueError(f"dimension mismatch: b has shape {b.shape}, expected ({op.n},)")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains NaN or Inf")
    x = (np.zeros(op.n) if config.initial_guess is None
         else np.array(config.initial_guess, dtype=np.float64, copy=True))
    if x.shape != (op.n,):
        raise ValueError("initial guess has the wrong length")
    return config, op, _Pc(m), b, x


def _finish(report, op, pc, t0, comm0):
    report.timings["apply"] = time.perf_counter() - t0
    report.timings["spmv"] = op.seconds
    report.timings["precond"] = pc.seconds
    report.timings["setup"] = float(getattr(pc.m, "setup_seconds", 0.0))
    report.comm_volume = op.comm_volume - comm0
    return report


def true_relative_residual(a, x, b, workers: int = 1) -> float:
    op = a if isinstance(a, _Op) else _Op(a, workers)
    bn = norm2(b, workers)
    r = axpbyz(1.0, b, -1.0, op(x), workers=workers)
    return norm2(r, workers) / bn if bn > 0 else norm2(r, workers)


def bicgstab(a, b, m=None, config: SolverConfig | None = None, workers: int = 1):
    """Preconditioned BiCGSTAB.

    Parameters
    ----------
    a : SparseCsr, HecMatrix or operator with ``matvec``
    b : ndarray
    m : Preconditioner, callable or None
    config : SolverConfig
    workers : int
        Worker count for SpMV and vector kernels.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    config, op, pc, b, x = _prepare(a, b, m, config, workers)
    t0 = time.perf_counter()
    comm0 = op.comm_volume
    report = SolveReport()
    w = workers
    tol = config.tolerance
    bnorm = norm2(b, w)
    if bnorm == 0.0:
        report.converged = True
        return np.zeros(op.n), _finish(report, op, pc, t0, comm0)

    r = axpbyz(1.0, b, -1.0, op(x), workers=w)
    res = norm2(r, w) / bnorm
    report.residual_history.append(res)
    if res <= tol:
        report.converged = True
        report.final_relative_residual = res
        return x, _finish(report, op, pc, t0, comm0)

    r0 = r.copy()
    p = v = None
    rho_prev = alpha = omega = 1.0
    fresh = True
    k = 0
    while k < config.max_iterations:
        k += 1
        rho = dot(r0, r, w)
        if rho == 0.0:
            report.breakdown = "rho=0"
            break
        if fresh:
            p = r.copy()
            fresh = False
        else:
            beta = (rho / rho_prev) * (alpha / omega)
            axpby_inplace(-omega, v, 1.0, p, w)
            axpby_inplace(1.0, r, beta, p, w)
        p_hat = pc(p)
        v = op(p_hat)
        r0v = dot(r0, v, w)
        if r0v == 0.0:
            report.breakdown = "(r0,v)=0"
            break
        alpha = rho / r0v
        s = axpbyz(1.0, r, -alpha, v, workers=w)
        res = norm2(s, w) / bnorm
        if res <= tol:
            axpby_inplace(alpha, p_hat, 1.0, x, w)
            r = s
            report.residual_history.append(res)
            done, r, res = _confirm(op, b, x, bnorm, tol, w)
            if done:
                report.converged = True
                break
            r0, fresh = r.copy(), True
            continue
        s_hat = pc(s)
        t = op(s_hat)
        tt = dot(t, t, w)
        omega = dot(t, s, w) / tt if tt != 0.0 else 0.0
        axpby_inplace(alpha, p_hat, 1.0, x, w)
        axpby_inplace(omega, s_hat, 1.0, x, w)
        r = axpbyz(1.0, s, -omega, t, workers=w)
        res = norm2(r, w) / bnorm
        report.residual_history.append(res)
        if res <= tol:
            done, r, res = _confirm(op, b, x, bnorm, tol, w)
            if done:
                report.converged = True
                break
            r0, fresh = r.copy(), True
            continue
        if omega == 0.0:
            report.breakdown = "omega=0"
            break
        rho_prev = rho
    report.iterations = k
    report.final_relative_residual = true_relative_residual(op, x, b, w)
    return x, _finish(report, op, pc, t0, comm0)


def _confirm(op, b, x, bnorm, tol, w):
    r = axpbyz(1.0, b, -1.0, op(x), workers=w)
    res = norm2(r, w) / bnorm
    return res <= tol, r, res


def gmres(a, b, m=None, config: SolverConfig | None = None, workers: int = 1):
    """Right-preconditioned restarted GMRES(m) with modified Gram-Schmidt.

    The least-squares residual is tracked with Givens rotations; the true
    residual is recomputed at the end of every cycle.  A full cycle that
    fails to reduce the residual ends the solve with
    ``breakdown="stagnation"``.
    """
    config, op, pc, b, x = _prepare(a, b, m, config, workers)
    t0 = time.perf_counter()
    comm0 = op.comm_volume
    report = SolveReport()
    w = workers
    tol = config.tolerance
    n = op.n
    bnorm = norm2(b, w)
    if bnorm == 0.0:
        report.converged = True
        return np.zeros(n), _finish(report, op, pc, t0, comm0)

    r = axpbyz(1.0, b, -1.0, op(x), workers=w)
    beta = norm2(r, w)
    report.residual_history.append(beta / bnorm)
    its = 0
    restart = min(config.restart, max(n, 1))
    while beta / bnorm > tol and its < config.max_iterations:
        V = np.zeros((restart + 1, n))
        Z = np.zeros((restart, n))
        H = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        V[0] = r / beta
        used = 0
        for j in range(restart):
            Z[j] = pc(V[j])
            vec = op(Z[j])
            its += 1
            for i in range(j + 1):
                H[i, j] = dot(vec, V[i], w)
                axpby_inplace(-H[i, j], V[i], 1.0, vec, w)
            H[j + 1, j] = norm2(vec, w)
            if H[j + 1, j] != 0.0:
                V[j + 1] = vec / H[j + 1, j]
            for i in range(j):
                h0, h1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * h0 + sn[i] * h1
                H[i + 1, j] = -sn[i] * h0 + cs[i] * h1
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            used = j + 1
            report.residual_history.append(abs(g[j + 1]) / bnorm)
            if abs(g[j + 1]) / bnorm <= tol or denom == 0.0 or its >= config.max_iterations:
                break
        y = np.zeros(used)
        for i in range(used - 1, -1, -1):
            if H[i, i] == 0.0:
                break
            y[i] = (g[i] - H[i, i + 1:used] @ y[i + 1:used]) / H[i, i]
        for i in range(used):
            axpby_inplace(y[i], Z[i], 1.0, x, w)
        r = axpbyz(1.0, b, -1.0, op(x), workers=w)
        new_beta = norm2(r, w)
        if new_beta >= beta and new_beta / bnorm > tol:
            beta = new_beta
            report.breakdown = "stagnation"
            break
        beta = new_beta
    report.iterations = its
    report.final_relative_residual = beta / bnorm
    report.converged = report.final_relative_residual <= tol
    if report.converged:
        report.breakdown = None
    return x, _finish(report, op, pc, t0, comm0)


def cg(a, b, m=None, config: SolverConfig | None = None, workers: int = 1):
    """Preconditioned conjugate gradients.

    ``A`` (and ``M``) must be symmetric positive definite; this is not
    checked up front.  A non-positive curvature ``p^T A p <= 0`` ends the
    solve with ``breakdown="indefinite"``.
    """
    config, op, pc, b, x = _prepare(a, b, m, config, workers)
    t0 = time.perf_counter()
    comm0 = op.comm_volume
    report = SolveReport()
    w = workers
    tol = config.tolerance
    bnorm = norm2(b, w)
    if bnorm == 0.0:
        report.converged = True
        return np.zeros(op.n), _finish(report, op, pc, t0, comm0)

    r = axpbyz(1.0, b, -1.0, op(x), workers=w)
    res = norm2(r, w) / bnorm
    report.residual_history.append(res)
    k = 0
    if res > tol:
        z = pc(r)
        p = z.copy()
        rz = dot(r, z, w)
        while k < config.max_iterations:
            k += 1
            q = op(p)
            pq = dot(p, q, w)
            if not pq > 0.0:
                report.breakdown = "indefinite"
                break
            alpha = rz / pq
            axpby_inplace(alpha, p, 1.0, x, w)
            axpby_inplace(-alpha, q, 1.0, r, w)
            res = norm2(r, w) / bnorm
            report.residual_history.append(res)
            if res <= tol:
                done, r, res = _confirm(op, b, x, bnorm, tol, w)
                if done:
                    break
            z = pc(r)
            rz_new = dot(r, z, w)
            if rz_new == 0.0:
                break
            axpby_inplace(1.0, z, rz_new / rz, p, w)
            rz = rz_new
    report.iterations = k
    report.final_relative_residual = true_relative_residual(op, x, b, w)
    report.converged = report.final_relative_residual <= tol and report.breakdown is None
    return x, _finish(report, op, pc, t0, comm0)
