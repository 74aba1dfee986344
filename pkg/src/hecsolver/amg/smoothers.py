"""Relaxation for the multigrid cycle.

``djacobi`` and ``wjacobi`` are the same iteration ``x += w D^-1 (b - A x)``
with different default weights (2/3 and 0.8).  ``chebyshev`` applies a
degree-``d`` Chebyshev polynomial in ``D^-1 A`` targeting
``[lmax / 30, 1.1 lmax]``, with ``lmax`` from a few power iterations.
``gs`` is a forward Gauss-Seidel sweep, solving with ``D + L`` through the
level-scheduled triangular solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..csr import SparseCsr
from ..hec import hec_from_csr
from ..ilu import _schedule, diagonal_positions, solve_lower
from ..kernels import axpby_inplace, norm2, spmv, spmv_axpby

__all__ = ["SmootherConfig", "Smoother", "make_smoother", "smooth", "SMOOTHER_KINDS",
           "estimate_lambda_max"]

SMOOTHER_KINDS = ("djacobi", "wjacobi", "chebyshev", "gs")
_ALIASES = {"dj": "djacobi", "damped-jacobi": "djacobi", "wj": "wjacobi",
            "weighted-jacobi": "wjacobi", "chev": "chebyshev", "cheb": "chebyshev",
            "gauss-seidel": "gs", "gaussseidel": "gs"}
_DEFAULT_OMEGA = {"djacobi": 2.0 / 3.0, "wjacobi": 0.8}


def _kind(kind: str) -> str:
    k = kind.lower()
    k = _ALIASES.get(k, k)
    if k not in SMOOTHER_KINDS:
        raise ValueError(f"unknown smoother {kind!r}; choose from {SMOOTHER_KINDS}")
    return k


@dataclass(frozen=True)
class SmootherConfig:
    kind: str = "djacobi"
    sweeps: int = 3
    omega: float | None = None
    degree: int = 3
    power_iterations: int = 10
    lower_ratio: float = 1.0 / 30.0
    upper_factor: float = 1.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", _kind(self.kind))
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.omega is not None and not 0.0 < self.omega <= 1.0:
            raise ValueError("Jacobi weight must lie in (0, 1]")
        if self.degree < 1:
            raise ValueError("Chebyshev degree must be >= 1")

    @property
    def weight(self) -> float:
        return self.omega if self.omega is not None else _DEFAULT_OMEGA.get(self.kind, 1.0)


def estimate_lambda_max(a: SparseCsr, d_inv, iterations: int = 10, seed: int = 0,
                        op=None) -> float:
    """Largest eigenvalue of ``D^-1 A`` by power iteration (norm ratio)."""
    op = a if op is None else op
    v = np.random.default_rng(seed).standard_normal(a.n_rows)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max(iterations, 1)):
        w = d_inv * spmv(op, v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        lam = nw
        v = w / nw
    return lam


class Smoother:
    """Relaxation bound to one matrix; ``smoother(x, b)`` returns the new iterate."""

    def __init__(self, a: SparseCsr, config: SmootherConfig | None = None, workers: int = 1):
        self.config = config or SmootherConfig()
        self.a = a
        self.workers = workers
        self.op = hec_from_csr(a)
        d = a.diagonal()
        if np.any(d == 0.0):
            raise ZeroDivisionError(f"zero diagonal in row {int(np.flatnonzero(d == 0.0)[0])}")
        self.d_inv = 1.0 / d
        self.lambda_max = None
        if self.config.kind == "chebyshev":
            self.lambda_max = estimate_lambda_max(a, self.d_inv, self.config.power_iterations,
                                                  self.config.seed, self.op)
        if self.config.kind == "gs":
            self._diag = diagonal_positions(a)
            self._sched = _schedule(a, "lower")

    @property
    def kind(self) -> str:
        return self.config.kind

    def residual(self, x, b):
        r = np.array(b, dtype=np.float64, copy=True)
        return spmv_axpby(-1.0, self.op, x, 1.0, r, workers=self.workers)

    def __call__(self, x, b) -> np.ndarray:
        x = np.array(x, dtype=np.float64, copy=True)
        b = np.asarray(b, dtype=np.float64)
        if x.shape != (self.a.n_rows,) or b.shape != x.shape:
            raise ValueError("dimension mismatch in smoother")
        step = getattr(self, "_" + self.kind)
        for _ in range(self.config.sweeps):
            x = step(x, b)
        return x

    def _jacobi(self, x, b):
        r = self.residual(x, b)
        return axpby_inplace(self.config.weight, self.d_inv * r, 1.0, x, workers=self.workers)

    _djacobi = _jacobi
    _wjacobi = _jacobi

    def _chebyshev(self, x, b):
        c = self.config
        upper = c.upper_factor * self.lambda_max
        lower = c.lower_ratio * self.lambda_max
        theta = 0.5 * (upper + lower)
        delta = 0.5 * (upper - lower)
        sigma = theta / delta
        rho = 1.0 / sigma
        r = self.d_inv * self.residual(x, b)
        d = r / theta
        for k in range(c.degree):
            x = x + d
            if k == c.degree - 1:
                break
            r = r - self.d_inv * spmv(self.op, d, workers=self.workers)
            rho_new = 1.0 / (2.0 * sigma - rho)
            d = rho_new * rho * d + (2.0 * rho_new / delta) * r
            rho = rho_new
        return x

    def _gs(self, x, b):
        r = self.residual(x, b)
        e = solve_lower(self.a, self._diag, self._sched, r, unit=False, workers=self.workers)
        return x + e


def make_smoother(a: SparseCsr, config: SmootherConfig | str | None = None,
                  workers: int = 1) -> Smoother:
    if isinstance(config, str):
        config = SmootherConfig(kind=config)
    return Smoother(a, config, workers)


def smooth(kind: str, a: SparseCsr, x, b, config: SmootherConfig | None = None,
           workers: int = 1) -> np.ndarray:
    """One-shot relaxation: build the smoother and apply ``config.sweeps`` sweeps."""
    cfg = config or SmootherConfig(kind=kind)
    if cfg.kind != _kind(kind):
        cfg = SmootherConfig(kind=kind, sweeps=cfg.sweeps, omega=cfg.omega, degree=cfg.degree,
                             power_iterations=cfg.power_iterations, seed=cfg.seed)
    return Smoother(a, cfg, workers)(x, b)
