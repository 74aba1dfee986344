"""AMG setup, V-cycle, solve loop and preconditioner wrapper."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ..csr import SparseCsr
from ..hec import HecMatrix, hec_from_csr
from ..kernels import axpbyz, norm2, spmv, spmv_axpby
from ..krylov import SolverConfig, SolveReport
from .coarsen import COARSENERS, CfSplitting
from .interp import INTERPOLATORS
from .smoothers import Smoother, SmootherConfig
from .strength import strength

__all__ = ["AmgOptions", "AmgLevel", "AmgHierarchy", "AmgPreconditioner",
           "CoarseningStagnation", "amg_setup", "vcycle", "amg_solve", "galerkin"]


class CoarseningStagnation(UserWarning):
    """Coarsening stopped making progress; the hierarchy ends early."""


@dataclass(frozen=True)
class AmgOptions:
    coarsening: str = "rs"
    interpolation: str = "direct"
    pre_smoother: SmootherConfig = field(default_factory=SmootherConfig)
    post_smoother: SmootherConfig | None = None  # defaults to the pre-smoother
    theta: float = 0.25
    negative_only: bool = False
    max_levels: int = 8
    coarse_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.coarsening.lower() not in COARSENERS:
            raise ValueError(f"unknown coarsening {self.coarsening!r}")
        if self.interpolation.lower() not in INTERPOLATORS:
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if isinstance(self.pre_smoother, str):
            object.__setattr__(self, "pre_smoother", SmootherConfig(kind=self.pre_smoother))
        if isinstance(self.post_smoother, str):
            object.__setattr__(self, "post_smoother", SmootherConfig(kind=self.post_smoother))

    @classmethod
    def make(cls, coarsening="rs", interpolation="direct", smoother="djacobi",
             sweeps: int = 3, **kw) -> "AmgOptions":
        cfg = SmootherConfig(kind=smoother, sweeps=sweeps)
        return cls(coarsening=coarsening, interpolation=interpolation, pre_smoother=cfg, **kw)


@dataclass(eq=False)
class AmgLevel:
    a: SparseCsr
    op: HecMatrix
    p: SparseCsr | None = None
    r: SparseCsr | None = None
    splitting: CfSplitting | None = None
    pre: Smoother | None = None
    post: Smoother | None = None

    @property
    def n(self) -> int:
        return self.a.n_rows


def galerkin(r: SparseCsr, a: SparseCsr, p: SparseCsr) -> SparseCsr:
    """``R A P`` via scipy's sparse product."""
    return SparseCsr.from_scipy((r.to_scipy() @ a.to_scipy()) @ p.to_scipy())


@dataclass(eq=False)
class AmgHierarchy:
    """Levels ``0..L``; level 0 is the input matrix, level ``L`` is solved densely."""

    levels: list
    coarse_lu: tuple
    options: AmgOptions
    setup_seconds: float = 0.0
    workers: int = 1

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def grid_complexity(self) -> float:
        return sum(l.n for l in self.levels) / self.levels[0].n

    def operator_complexity(self) -> float:
        return sum(l.a.nnz for l in self.levels) / max(self.levels[0].a.nnz, 1)

    def galerkin_errors(self) -> list[float]:
        """Frobenius-relative ``||R A P - A_c|| / ||A_c||`` per coarse level.

        The product is recomputed as ``R (A P)``, the other association
        from the one used during setup.
        """
        out = []
        for fine, coarse in zip(self.levels[:-1], self.levels[1:]):
            rap = fine.r.to_scipy() @ (fine.a.to_scipy() @ fine.p.to_scipy())
            diff = rap - coarse.a.to_scipy()
            den = scipy.sparse.linalg.norm(coarse.a.to_scipy())
            out.append(float(scipy.sparse.linalg.norm(diff) / den) if den else 0.0)
        return out

    def summary(self) -> str:
        lines = [f"levels: {self.n_levels}",
                 f"coarsening: {self.options.coarsening}  interpolation: {self.options.interpolation}"
                 f"  smoother: {self.options.pre_smoother.kind} x{self.options.pre_smoother.sweeps}",
                 f"{'level':>5} {'rows':>10} {'nnz':>12} {'nnz/row':>8}"]
        for i, l in enumerate(self.levels):
            lines.append(f"{i:>5} {l.n:>10} {l.a.nnz:>12} {l.a.nnz / max(l.n, 1):>8.2f}")
        lines.append(f"grid complexity: {self.grid_complexity():.4f}")
        lines.append(f"operator complexity: {self.operator_complexity():.4f}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "levels": [{"rows": l.n, "nnz": l.a.nnz} for l in self.levels],
            "grid_complexity": self.grid_complexity(),
            "operator_complexity": self.operator_complexity(),
        }


def amg_setup(a: SparseCsr, options: AmgOptions | None = None, workers: int = 1,
              **kw) -> AmgHierarchy:
    """Build the hierarchy.

    Coarsening stops when a level has at most ``coarse_size`` rows, when
    ``max_levels`` levels exist, or when the splitting keeps every point
    (a :class:`CoarseningStagnation` warning is issued).  The last level is
    factored with dense LU.
    """
    if options is None:
        options = AmgOptions.make(**kw) if kw else AmgOptions()
    elif kw:
        raise TypeError("pass either options or keyword settings, not both")
    if a.n_rows != a.n_cols:
        raise ValueError("AMG needs a square matrix")
    if a.n_rows == 0:
        raise ValueError("AMG needs a non-empty matrix")
    t0 = time.perf_counter()
    post_cfg = options.post_smoother or options.pre_smoother
    coarsen = COARSENERS[options.coarsening.lower()]
    interp = INTERPOLATORS[options.interpolation.lower()]
    levels = [AmgLevel(a, hec_from_csr(a))]
    while levels[-1].n > options.coarse_size and len(levels) < options.max_levels:
        lev = levels[-1]
        s = strength(lev.a, options.theta, options.negative_only)
        if options.coarsening.lower() == "cljp":
            cf = coarsen(s, seed=options.seed + len(levels) - 1)
        else:
            cf = coarsen(s)
        if cf.n_coarse >= lev.n or cf.n_coarse == 0:
            warnings.warn(f"coarsening stagnated on level {len(levels) - 1} "
                          f"({lev.n} rows, {cf.n_coarse} coarse)", CoarseningStagnation)
            break
        p = interp(lev.a, cf, s)
        r = p.transpose()
        ac = galerkin(r, lev.a, p)
        lev.p, lev.r, lev.splitting = p, r, cf
        levels.append(AmgLevel(ac, hec_from_csr(ac)))
    for lev in levels[:-1]:
        lev.pre = Smoother(lev.a, options.pre_smoother, workers)
        lev.post = lev.pre if post_cfg == options.pre_smoother else Smoother(lev.a, post_cfg, workers)
    lu = scipy.linalg.lu_factor(levels[-1].a.to_dense())
    return AmgHierarchy(levels, lu, options, time.perf_counter() - t0, workers)


def vcycle(h: AmgHierarchy, b, x=None, level: int = 0) -> np.ndarray:
    """One V-cycle on ``level`` starting from ``x`` (zero when omitted)."""
    lev = h.levels[level]
    b = np.asarray(b, dtype=np.float64)
    if level == h.n_levels - 1:
        return scipy.linalg.lu_solve(h.coarse_lu, b)
    x = np.zeros(lev.n) if x is None else np.asarray(x, dtype=np.float64)
    x = lev.pre(x, b)
    r = b.copy()
    spmv_axpby(-1.0, lev.op, x, 1.0, r, workers=h.workers)
    bc = spmv(lev.r, r, workers=h.workers)
    xc = vcycle(h, bc, None, level + 1)
    x = x + spmv(lev.p, xc, workers=h.workers)
    return lev.post(x, b)


def amg_solve(h: AmgHierarchy, b, config: SolverConfig | None = None):
    """Repeat V-cycles until ``||b - A x|| / ||b|| <= tol``.

    Returns ``(x, SolveReport)``.  Three consecutive cycles that each grow
    the residual end the solve with ``breakdown="divergence"``.
    """
    config = config or SolverConfig()
    a = h.levels[0].op
    n = h.levels[0].n
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ValueError(f"dimension mismatch: b has shape {b.shape}, expected ({n},)")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains NaN or Inf")
    t0 = time.perf_counter()
    report = SolveReport()
    report.timings["setup"] = h.setup_seconds
    bnorm = norm2(b)
    if bnorm == 0.0:
        report.converged = True
        report.timings["apply"] = time.perf_counter() - t0
        return np.zeros(n), report
    x = (np.zeros(n) if config.initial_guess is None
         else np.array(config.initial_guess, dtype=np.float64, copy=True))
    res = norm2(axpbyz(1.0, b, -1.0, spmv(a, x))) / bnorm
    report.residual_history.append(res)
    growth = 0
    while res > config.tolerance and report.iterations < config.max_iterations:
        x = vcycle(h, b, x)
        report.iterations += 1
        new = norm2(axpbyz(1.0, b, -1.0, spmv(a, x))) / bnorm
        report.residual_history.append(new)
        if not np.isfinite(new):
            report.breakdown = "divergence"
            res = new
            break
        growth = growth + 1 if new > res else 0
        res = new
        if growth >= 3:
            report.breakdown = "divergence"
            break
    report.final_relative_residual = float(res)
    report.converged = bool(res <= config.tolerance)
    report.timings["apply"] = time.perf_counter() - t0
    return x, report


class AmgPreconditioner:
    """One V-cycle from a zero start as ``M^-1``."""

    def __init__(self, a: SparseCsr, options: AmgOptions | None = None, workers: int = 1, **kw):
        self.hierarchy = amg_setup(a, options, workers=workers, **kw)
        self.setup_seconds = self.hierarchy.setup_seconds

    def apply(self, r):
        return vcycle(self.hierarchy, r)

    def __repr__(self):
        o = self.hierarchy.options
        return (f"AmgPreconditioner({o.coarsening}+{o.interpolation}+{o.pre_smoother.kind}, "
                f"levels={self.hierarchy.n_levels})")
