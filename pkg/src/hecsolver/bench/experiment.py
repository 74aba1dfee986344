"""Experiment runner, preset grids, SpMV benchmark and report I/O.

Report schema
-------------
Each solver row is a flat record: the :class:`ExperimentSpec` fields
followed by the :data:`RESULT_FIELDS`.  Timing fields are wall-clock
seconds (best of ``timing_repeats`` after ``warmup`` untimed runs, measured
with ``time.perf_counter``).  ``parallel_seconds`` and ``speedup`` map a
worker count (as a string) to a value; in CSV files such mappings and lists
are JSON-encoded strings.  JSON reports hold ``{"metadata": ..., "rows": [...]}``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np

from ..amg import AmgOptions, AmgPreconditioner, amg_setup, amg_solve
from ..amg.smoothers import SmootherConfig
from ..csr import FormatError, SparseCsr
from ..gallery import poisson3d
from ..hec import hec_from_csr
from ..kernels import spmv
from ..krylov import PartitionedOperator, SolverConfig, bicgstab, cg, gmres
from ..mmio import read_matrix_market
from ..precond import IluPreconditioner
from ..ras import RasPreconditioner

__all__ = ["ExperimentSpec", "ReportRow", "RESULT_FIELDS", "SPMV_FIELDS", "TIMING_METHOD",
           "load_matrix", "run_experiment", "run_grid", "preset_specs", "PRESETS",
           "spmv_bench", "write_csv", "read_csv", "write_json", "read_json"]

TIMING_METHOD = "time.perf_counter; best of timing_repeats runs after warmup runs"

SOLVERS = ("bicgstab", "gmres", "cg", "amg")
PRECONDITIONERS = ("none", "ilu", "ras", "amg")
_PC_ALIASES = {"ilu_k": "ilu", "ras_ilu": "ras", "ras_ilu_k": "ras", "identity": "none"}
_KRYLOV = {"bicgstab": bicgstab, "gmres": gmres, "cg": cg}


@dataclass(frozen=True)
class ExperimentSpec:
    """One solver run.

    ``matrix`` is either ``"poisson:N"`` / ``"poisson:NXxNYxNZ"`` or a
    Matrix Market path.  ``workers`` lists the worker counts to time; the
    one-worker run is always included and serves as the sequential baseline.
    """

    matrix: str = "poisson:50"
    solver: str = "bicgstab"
    preconditioner: str = "ras"
    k: int = 0
    outer_parts: int = 1
    inner_parts: int = 1
    outer_overlap: int = 0
    inner_overlap: int = 0
    coarsening: str = "rs"
    interpolation: str = "direct"
    smoother: str = "djacobi"
    max_levels: int = 8
    pre_sweeps: int = 3
    post_sweeps: int = 3
    tolerance: float = 1e-6
    max_iterations: int = 1000
    restart: int = 30
    partitioner: str = "bisection"
    rhs: str = "ones"
    seed: int = 0
    workers: tuple = (1,)
    timing_repeats: int = 3
    warmup: int = 1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "solver", self.solver.lower())
        pc = self.preconditioner.lower()
        object.__setattr__(self, "preconditioner", _PC_ALIASES.get(pc, pc))
        object.__setattr__(self, "workers", tuple(int(w) for w in self.workers))
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.solver == "amg" and self.preconditioner not in ("none", "amg"):
            raise ValueError("the amg solver takes no extra preconditioner")
        if min(self.workers, default=1) < 1 or self.timing_repeats < 1 or self.warmup < 0:
            raise ValueError("workers and timing_repeats must be >= 1, warmup >= 0")
        if self.rhs not in ("ones", "random"):
            raise ValueError("rhs must be 'ones' or 'random'")
        for name in ("k", "outer_overlap", "inner_overlap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.outer_parts < 1 or self.inner_parts < 1:
            raise ValueError("part counts must be >= 1")

    def amg_options(self) -> AmgOptions:
        return AmgOptions(coarsening=self.coarsening, interpolation=self.interpolation,
                          pre_smoother=SmootherConfig(kind=self.smoother, sweeps=self.pre_sweeps,
                                                      seed=self.seed),
                          post_smoother=SmootherConfig(kind=self.smoother, sweeps=self.post_sweeps,
                                                       seed=self.seed),
                          max_levels=self.max_levels, seed=self.seed)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["workers"] = list(self.workers)
        return d


SPEC_FIELDS = [f.name for f in dataclasses.fields(ExperimentSpec)]

# name -> kind, used to parse CSV cells back
RESULT_FIELDS = {
    "status": "str", "error": "str", "n_rows": "int", "nnz": "int",
    "iterations": "int", "converged": "bool", "final_relative_residual": "float",
    "breakdown": "str", "comm_volume": "int", "consistent": "bool",
    "setup_seconds": "float", "seq_seconds": "float",
    "parallel_seconds": "json", "speedup": "json",
    "hierarchy": "json", "precond_stats": "json",
}
_SPEC_KINDS = {f.name: ("json" if f.name == "workers" else
                        {"int": "int", "float": "float", "str": "str"}[str(f.type)])
               for f in dataclasses.fields(ExperimentSpec)}


@dataclass
class ReportRow:
    spec: ExperimentSpec
    status: str = "ok"
    error: str = ""
    n_rows: int = 0
    nnz: int = 0
    iterations: int = 0
    converged: bool = False
    final_relative_residual: float = math.nan
    breakdown: str = ""
    comm_volume: int = 0
    consistent: bool = True
    setup_seconds: float = math.nan
    seq_seconds: float = math.nan
    parallel_seconds: dict = field(default_factory=dict)
    speedup: dict = field(default_factory=dict)
    hierarchy: dict = field(default_factory=dict)
    precond_stats: dict = field(default_factory=dict)

    def record(self) -> dict:
        d = self.spec.as_dict()
        for name in RESULT_FIELDS:
            d[name] = getattr(self, name)
        return d

    def non_timing(self) -> dict:
        """Fields that must be reproducible run to run."""
        d = self.record()
        for name in ("setup_seconds", "seq_seconds", "parallel_seconds", "speedup"):
            d.pop(name)
        d["hierarchy"] = {k: v for k, v in self.hierarchy.items() if k != "setup_seconds"}
        return d


# -- matrices ---------------------------------------------------------------------

_POISSON = re.compile(r"^poisson:(\d+)(?:x(\d+)x(\d+))?$")


def load_matrix(source: str, cache: dict | None = None) -> SparseCsr:
    """``poisson:N``, ``poisson:NXxNYxNZ`` or a Matrix Market file."""
    if cache is not None and source in cache:
        return cache[source]
    m = _POISSON.match(source)
    if m:
        nx = int(m.group(1))
        ny = int(m.group(2) or nx)
        nz = int(m.group(3) or nx)
        a = poisson3d(nx, ny, nz)
    else:
        a = read_matrix_market(source)
    if cache is not None:
        cache[source] = a
    return a


def _rhs(spec: ExperimentSpec, n: int) -> np.ndarray:
    if spec.rhs == "random":
        return np.random.default_rng(spec.seed).standard_normal(n)
    return np.ones(n)


# -- single experiment ------------------------------------------------------------------

def _run_once(spec: ExperimentSpec, a: SparseCsr, b: np.ndarray, workers: int) -> dict:
    t0 = time.perf_counter()
    out = {"hierarchy": {}, "precond_stats": {}}
    if spec.solver == "amg":
        h = amg_setup(a, spec.amg_options(), workers=workers)
        out["setup_seconds"] = time.perf_counter() - t0
        _, rep = amg_solve(h, b, SolverConfig(spec.tolerance, spec.max_iterations))
        out["hierarchy"] = h.as_dict()
    else:
        pc = None
        partition = None
        if spec.preconditioner == "ilu":
            pc = IluPreconditioner(a, spec.k, workers=workers)
            out["precond_stats"] = {"factor_nnz": pc.factors.combined.nnz}
        elif spec.preconditioner == "ras":
            pc = RasPreconditioner(a, spec.outer_parts, spec.inner_parts, spec.outer_overlap,
                                   spec.inner_overlap, spec.k, spec.partitioner, workers)
            partition = pc.partition
            out["precond_stats"] = pc.stats()
        elif spec.preconditioner == "amg":
            pc = AmgPreconditioner(a, spec.amg_options(), workers=workers)
            out["hierarchy"] = pc.hierarchy.as_dict()
        op = a
        if spec.outer_parts > 1:
            # the outer blocks stand in for separate devices exchanging halos
            op = PartitionedOperator(a, spec.outer_parts, spec.partitioner,
                                     partition=partition, workers=workers)
        out["setup_seconds"] = time.perf_counter() - t0
        cfg = SolverConfig(spec.tolerance, spec.max_iterations, spec.restart)
        _, rep = _KRYLOV[spec.solver](op, b, pc, cfg, workers=workers)
    out.update(iterations=rep.iterations, converged=rep.converged,
               final_relative_residual=float(rep.final_relative_residual),
               breakdown=rep.breakdown or "", comm_volume=int(rep.comm_volume),
               status=rep.status)
    return out


_OUTCOME_KEYS = ("iterations", "converged", "final_relative_residual", "breakdown",
                 "comm_volume", "status")


def run_experiment(spec: ExperimentSpec, cache: dict | None = None) -> ReportRow:
    """Run ``spec`` for every worker count and collect one report row.

    Unreadable matrices and numerical failures (zero pivots, missing
    diagonals, interpolation failures) end up in ``status="error"`` rows;
    non-converged solves keep their breakdown reason in ``status``.
    """
    row = ReportRow(spec)
    try:
        a = load_matrix(spec.matrix, cache)
    except (OSError, FormatError, ValueError) as exc:
        row.status, row.error = "error", f"{type(exc).__name__}: {exc}"
        return row
    row.n_rows, row.nnz = a.n_rows, a.nnz
    b = _rhs(spec, a.n_rows)
    best: dict[int, float] = {}
    base = None
    try:
        for w in sorted(set(spec.workers) | {1}):
            times = []
            for rep in range(spec.warmup + spec.timing_repeats):
                t0 = time.perf_counter()
                out = _run_once(spec, a, b, w)
                dt = time.perf_counter() - t0
                if rep >= spec.warmup:
                    times.append(dt)
                key = tuple(out[k] for k in _OUTCOME_KEYS)
                if base is None:
                    base = out
                    base_key = key
                elif key != base_key:
                    row.consistent = False
            best[w] = min(times)
            if w == 1:
                row.setup_seconds = base["setup_seconds"]
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        # zero pivots, missing diagonals, failed interpolation, singular coarse grids
        row.status, row.error = "error", f"{type(exc).__name__}: {exc}"
        return row
    for k in _OUTCOME_KEYS:
        setattr(row, k, base[k])
    row.hierarchy = base["hierarchy"]
    row.precond_stats = base["precond_stats"]
    row.seq_seconds = best[1]
    row.parallel_seconds = {str(w): t for w, t in best.items() if w != 1}
    row.speedup = {str(w): best[1] / t for w, t in best.items() if w != 1 and t > 0}
    return row


# -- grids ---------------------------------------------------------------------------

_RAS_COMBOS = [(1, 8, 0, 0), (2, 8, 0, 0), (3, 8, 0, 0), (4, 8, 0, 0), (4, 128, 0, 0),
               (4, 1024, 0, 0)]
_OVERLAP_COMBOS = [(4, 8, 0, 0), (4, 8, 1, 0), (4, 8, 0, 1), (4, 8, 1, 1)]
_AMG_COMBOS = [("cljp", "direct", "djacobi"), ("cljp", "direct", "chebyshev"),
               ("rs", "direct", "djacobi"), ("rs", "standard", "wjacobi"),
               ("rs", "standard", "gs")]


def preset_specs(name: str, matrix: str = "poisson:50", solvers=("bicgstab", "gmres"),
                 **overrides) -> list[ExperimentSpec]:
    """Named parameter grids.

    ``ras``
        six outer/inner combinations without overlap, ILU level 0..3
    ``overlap``
        outer 4, inner 8, ILU(0), the four outer/inner overlap choices
    ``amg``
        five coarsening/interpolation/smoother combinations, standalone AMG
    """
    specs = []
    if name == "ras":
        for solver in solvers:
            for seq, (op, ip, oo, io) in enumerate(_RAS_COMBOS, 1):
                for k in range(4):
                    specs.append(ExperimentSpec(
                        matrix=matrix, solver=solver, preconditioner="ras", k=k,
                        outer_parts=op, inner_parts=ip, outer_overlap=oo, inner_overlap=io,
                        label=f"ras-{seq}", **overrides))
    elif name == "overlap":
        for solver in solvers:
            for seq, (op, ip, oo, io) in enumerate(_OVERLAP_COMBOS, 1):
                specs.append(ExperimentSpec(
                    matrix=matrix, solver=solver, preconditioner="ras", k=0,
                    outer_parts=op, inner_parts=ip, outer_overlap=oo, inner_overlap=io,
                    label=f"overlap-{seq}", **overrides))
    elif name == "amg":
        for seq, (co, it, sm) in enumerate(_AMG_COMBOS, 1):
            specs.append(ExperimentSpec(
                matrix=matrix, solver="amg", preconditioner="none", coarsening=co,
                interpolation=it, smoother=sm, label=f"amg-{seq}", **overrides))
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    return specs


PRESETS = ("ras", "overlap", "amg")


def run_grid(specs, csv_path=None, json_path=None, progress=None) -> list[ReportRow]:
    """Run every spec (matrices are loaded once) and write the reports."""
    cache: dict = {}
    rows = []
    for spec in specs:
        row = run_experiment(spec, cache)
        rows.append(row)
        if progress is not None:
            progress(row)
    records = [r.record() for r in rows]
    if csv_path:
        write_csv(csv_path, records, SPEC_FIELDS + list(RESULT_FIELDS))
    if json_path:
        write_json(json_path, records)
    return rows


# -- SpMV benchmark ---------------------------------------------------------------------

SPMV_FIELDS = {"matrix": "str", "n_rows": "int", "nnz": "int", "format": "str",
               "workers": "int", "seconds": "float", "gflops": "float",
               "max_rel_diff": "float", "status": "str", "error": "str"}


def _time_product(op, x, workers, repeats, warmup, inner):
    y = np.empty(op.n_rows)
    best = math.inf
    for rep in range(warmup + repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            spmv(op, x, out=y, workers=workers)
        dt = (time.perf_counter() - t0) / inner
        if rep >= warmup:
            best = min(best, dt)
    return best


def spmv_bench(sources, workers=None, repeats: int = 3, warmup: int = 1, seed: int = 0,
               tolerance: float = 1e-13) -> list[dict]:
    """Throughput of CSR and HEC products, ``2 nnz / seconds`` in GFlop/s.

    The HEC and CSR results are compared on a seeded random vector; a
    relative difference above ``tolerance`` marks the rows as errors.
    """
    if workers is None:
        workers = sorted({1, os.cpu_count() or 1})
    rows = []
    for src in sources:
        try:
            a = load_matrix(src)
        except (OSError, FormatError, ValueError) as exc:
            rows.append({**{k: "" for k in SPMV_FIELDS}, "matrix": src, "n_rows": 0, "nnz": 0,
                         "workers": 0, "seconds": math.nan, "gflops": math.nan,
                         "max_rel_diff": math.nan, "status": "error",
                         "error": f"{type(exc).__name__}: {exc}"})
            continue
        h = hec_from_csr(a)
        x = np.random.default_rng(seed).standard_normal(a.n_cols)
        y_csr = spmv(a, x)
        y_hec = spmv(h, x)
        scale = float(np.max(np.abs(y_csr))) if a.n_rows else 0.0
        diff = float(np.max(np.abs(y_hec - y_csr))) / scale if scale > 0 else 0.0
        ok = diff <= tolerance
        inner = max(1, min(1000, int(2e6 // max(a.nnz, 1))))
        for fmt, op in (("csr", a), ("hec", h)):
            for w in workers:
                sec = _time_product(op, x, w, repeats, warmup, inner)
                rows.append({"matrix": src, "n_rows": a.n_rows, "nnz": a.nnz, "format": fmt,
                             "workers": int(w), "seconds": sec,
                             "gflops": 2.0 * a.nnz / sec / 1e9 if sec > 0 else math.nan,
                             "max_rel_diff": diff, "status": "ok" if ok else "error",
                             "error": "" if ok else "HEC and CSR products differ"})
    return rows


# -- report files -------------------------------------------------------------------------

def _encode(v):
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(v, sort_keys=True)
    if isinstance(v, float):
        return repr(v)
    return v


def _decode(kind, s):
    if kind == "int":
        return int(s)
    if kind == "float":
        return float(s)
    if kind == "bool":
        return s == "True"
    if kind == "json":
        return json.loads(s)
    return s


def _kinds(fields) -> dict:
    kinds = {**_SPEC_KINDS, **RESULT_FIELDS}
    if set(fields) <= set(SPMV_FIELDS):
        kinds = SPMV_FIELDS
    return kinds


def write_csv(path, records: list[dict], fields: list[str] | None = None) -> None:
    if fields is None:
        fields = list(records[0]) if records else SPEC_FIELDS + list(RESULT_FIELDS)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in records:
            w.writerow({k: _encode(r[k]) for k in fields})


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        kinds = _kinds(reader.fieldnames or [])
        return [{k: _decode(kinds.get(k, "str"), v) for k, v in r.items()} for r in reader]


def write_json(path, records: list[dict], metadata: dict | None = None) -> None:
    meta = {"timing_method": TIMING_METHOD, "schema": "hecsolver-report-1"}
    meta.update(metadata or {})
    with open(path, "w") as fh:
        json.dump({"metadata": meta, "rows": records}, fh, indent=1, sort_keys=True)


def read_json(path) -> list[dict]:
    with open(path) as fh:
        return json.load(fh)["rows"]
