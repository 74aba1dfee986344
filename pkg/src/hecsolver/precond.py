"""Preconditioner interface and the simple implementations."""

from __future__ import annotations

import time
from typing import Protocol, runtime_checkable

import numpy as np

from .csr import SparseCsr
from .ilu import IluFactors, ilu_factorize, ilu_symbolic, trisolve

__all__ = ["Preconditioner", "IdentityPreconditioner", "IluPreconditioner", "as_preconditioner"]


@runtime_checkable
class Preconditioner(Protocol):
    """Fixed linear operator ``r -> z ~= M^{-1} r``."""

    def apply(self, r: np.ndarray) -> np.ndarray: ...


class IdentityPreconditioner:
    setup_seconds = 0.0

    def apply(self, r):
        return np.array(r, dtype=np.float64, copy=True)

    def __repr__(self):
        return "IdentityPreconditioner()"


class IluPreconditioner:
    """Global ILU(k) on the whole matrix."""

    def __init__(self, a: SparseCsr, k: int = 0, workers: int = 1,
                 shift_on_breakdown: float | None = None):
        t0 = time.perf_counter()
        self.k = int(k)
        self.workers = workers
        self.factors: IluFactors = ilu_factorize(a, ilu_symbolic(a, k),
                                                 shift_on_breakdown=shift_on_breakdown)
        self.setup_seconds = time.perf_counter() - t0

    def apply(self, r):
        return trisolve(self.factors, r, workers=self.workers)

    def __repr__(self):
        return f"IluPreconditioner(k={self.k}, nnz={self.factors.combined.nnz})"


class _CallablePreconditioner:
    setup_seconds = 0.0

    def __init__(self, fn):
        self.fn = fn

    def apply(self, r):
        return np.asarray(self.fn(r), dtype=np.float64)


def as_preconditioner(m) -> Preconditioner:
    """Accept ``None``, an object with ``apply``, or a plain callable."""
    if m is None:
        return IdentityPreconditioner()
    if hasattr(m, "apply"):
        return m
    if callable(m):
        return _CallablePreconditioner(m)
    raise TypeError(f"cannot use {type(m).__name__} as a preconditioner")
