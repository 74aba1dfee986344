"""``hecsolver`` command line: spmv-bench, solve, grid, gen-poisson, info.

Exit status is 0 when the runs complete (non-converged solves included),
1 on harness errors such as invalid settings or unwritable outputs, and 2
on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from ..csr import FormatError
from ..gallery import poisson3d
from ..hec import hec_from_csr
from ..mmio import write_matrix_market
from .experiment import (PRESETS, SPMV_FIELDS, ExperimentSpec, load_matrix, preset_specs,
                         run_grid, spmv_bench, write_csv, write_json)

_SPEC_DEFAULTS = ExperimentSpec()


def _add_spec_flags(p: argparse.ArgumentParser, with_layout: bool = True) -> None:
    d = _SPEC_DEFAULTS
    if with_layout:
        p.add_argument("--matrix", default=d.matrix,
                       help="Matrix Market file or poisson:N / poisson:NXxNYxNZ")
        p.add_argument("--solver", default=d.solver, choices=["bicgstab", "gmres", "cg", "amg"])
        p.add_argument("--preconditioner", default=d.preconditioner,
                       help="none, ilu, ras or amg")
        p.add_argument("--k", type=int, default=d.k, help="ILU fill level")
        p.add_argument("--outer-parts", type=int, default=d.outer_parts)
        p.add_argument("--inner-parts", type=int, default=d.inner_parts)
        p.add_argument("--outer-overlap", type=int, default=d.outer_overlap)
        p.add_argument("--inner-overlap", type=int, default=d.inner_overlap)
        p.add_argument("--coarsening", default=d.coarsening, choices=["rs", "cljp"])
        p.add_argument("--interpolation", default=d.interpolation,
                       choices=["direct", "standard", "rsd", "rsstd"])
        p.add_argument("--smoother", default=d.smoother)
        p.add_argument("--max-levels", type=int, default=d.max_levels)
        p.add_argument("--pre-sweeps", type=int, default=d.pre_sweeps)
        p.add_argument("--post-sweeps", type=int, default=d.post_sweeps)
    p.add_argument("--tolerance", type=float, default=d.tolerance)
    p.add_argument("--max-iterations", type=int, default=d.max_iterations)
    p.add_argument("--restart", type=int, default=d.restart)
    p.add_argument("--partitioner", default=d.partitioner, choices=["bisection", "natural"])
    p.add_argument("--rhs", default=d.rhs, choices=["ones", "random"])
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--workers", type=int, nargs="+", default=list(d.workers),
                   help="worker counts to time (1 is always included)")
    p.add_argument("--timing-repeats", type=int, default=d.timing_repeats)
    p.add_argument("--warmup", type=int, default=d.warmup)
    p.add_argument("--csv", help="write the report as CSV")
    p.add_argument("--json", help="write the report as JSON")


def _spec_kwargs(args, names) -> dict:
    out = {}
    for n in names:
        v = getattr(args, n)
        out[n] = tuple(v) if n == "workers" else v
    return out


_COMMON = ("tolerance", "max_iterations", "restart", "partitioner", "rhs", "seed", "workers",
           "timing_repeats", "warmup")


def _print_row(row, out) -> None:
    s = row.spec
    what = s.solver if s.solver == "amg" else f"{s.solver}+{s.preconditioner}"
    extra = ""
    if row.speedup:
        extra = " speedup " + " ".join(f"{w}:{v:.2f}" for w, v in row.speedup.items())
    tag = s.label or s.matrix
    if row.status == "error":
        print(f"{tag:<12} {what:<16} ERROR {row.error}", file=out)
        return
    print(f"{tag:<12} {what:<16} k={s.k} outer={s.outer_parts}/{s.outer_overlap} "
          f"inner={s.inner_parts}/{s.inner_overlap} it={row.iterations:<4} {row.status:<10} "
          f"res={row.final_relative_residual:.2e} seq={row.seq_seconds:.3f}s{extra}", file=out)


def cmd_solve(args) -> int:
    names = [f.name for f in dataclasses.fields(ExperimentSpec) if f.name != "label"]
    spec = ExperimentSpec(**_spec_kwargs(args, names))
    rows = run_grid([spec], args.csv, args.json)
    _print_row(rows[0], sys.stdout)
    if rows[0].hierarchy:
        print(json.dumps(rows[0].hierarchy, indent=1))
    return 0


def cmd_grid(args) -> int:
    overrides = _spec_kwargs(args, _COMMON)
    specs = []
    for name in args.preset:
        specs += preset_specs(name, matrix=args.matrix, solvers=tuple(args.solvers),
                              **overrides)
    run_grid(specs, args.csv, args.json, progress=lambda r: _print_row(r, sys.stdout))
    return 0


def cmd_spmv_bench(args) -> int:
    sources = list(args.matrices) + [f"poisson:{n}" for n in (args.poisson or [])]
    workers = args.workers or sorted({1, os.cpu_count() or 1})
    rows = spmv_bench(sources, workers, args.timing_repeats, args.warmup, args.seed)
    fields = list(SPMV_FIELDS)
    if args.csv:
        write_csv(args.csv, rows, fields)
    if args.json:
        write_json(args.json, rows, {"kind": "spmv-bench"})
    for r in rows:
        if r["status"] == "error" and r["n_rows"] == 0:
            print(f"{r['matrix']}: ERROR {r['error']}")
        else:
            print(f"{r['matrix']:<24} rows={r['n_rows']:<9} nnz={r['nnz']:<10} {r['format']} "
                  f"w={r['workers']} {r['gflops']:.3f} GFlop/s diff={r['max_rel_diff']:.1e}")
    return 0


def cmd_gen_poisson(args) -> int:
    dims = list(args.dims) + [args.dims[0]] * (3 - len(args.dims))
    a = poisson3d(*dims)
    print(f"poisson {dims[0]}x{dims[1]}x{dims[2]}: rows={a.n_rows} nnz={a.nnz}")
    if args.output:
        write_matrix_market(args.output, a, symmetric=args.symmetric,
                            comment=f"3D Poisson 7-point {dims[0]}x{dims[1]}x{dims[2]}")
    return 0


def cmd_info(args) -> int:
    a = load_matrix(args.matrix)
    counts = a.row_nnz()
    h = hec_from_csr(a)
    sym = a.n_rows == a.n_cols and (a.to_scipy() != a.to_scipy().T).nnz == 0
    info = {
        "rows": a.n_rows, "cols": a.n_cols, "nnz": a.nnz,
        "nnz_per_row": {"min": int(counts.min()) if a.n_rows else 0,
                        "max": int(counts.max()) if a.n_rows else 0,
                        "mean": float(a.nnz / max(a.n_rows, 1))},
        "symmetric": bool(sym),
        "hec": {"ell_width": h.ell_width, "ell_stride": h.ell_stride,
                "ell_entries": int(a.nnz - h.csr_rest.nnz), "csr_rest_nnz": h.csr_rest.nnz},
    }
    if a.n_rows == a.n_cols and a.n_rows:
        d = np.abs(a.diagonal())
        off = np.asarray(abs(a.to_scipy()).sum(axis=1)).ravel() - d
        info["diagonally_dominant"] = bool(np.all(d >= off))
    print(json.dumps(info, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hecsolver", description="Sparse solver experiment harness")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spmv-bench", help="CSR vs HEC product throughput")
    s.add_argument("matrices", nargs="*", help="Matrix Market files or poisson:N sources")
    s.add_argument("--poisson", type=int, nargs="+", help="also benchmark poisson:N")
    s.add_argument("--workers", type=int, nargs="+")
    s.add_argument("--timing-repeats", type=int, default=3)
    s.add_argument("--warmup", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv")
    s.add_argument("--json")
    s.set_defaults(func=cmd_spmv_bench)

    s = sub.add_parser("solve", help="run one solver configuration")
    _add_spec_flags(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("grid", help="run preset parameter grids")
    s.add_argument("--preset", nargs="+", default=["ras"], choices=list(PRESETS))
    s.add_argument("--matrix", default="poisson:50")
    s.add_argument("--solvers", nargs="+", default=["bicgstab", "gmres"],
                   choices=["bicgstab", "gmres", "cg"])
    _add_spec_flags(s, with_layout=False)
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("gen-poisson", help="generate a 3D Poisson matrix")
    s.add_argument("dims", type=int, nargs="+", help="NX [NY NZ]")
    s.add_argument("-o", "--output", help="Matrix Market output file")
    s.add_argument("--symmetric", action="store_true", help="store the lower triangle only")
    s.set_defaults(func=cmd_gen_poisson)

    s = sub.add_parser("info", help="matrix statistics")
    s.add_argument("matrix")
    s.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-poisson" and len(args.dims) not in (1, 3):
        parser.error("gen-poisson takes one or three dimensions")
    try:
        return args.func(args)
    except (ValueError, OSError, FormatError) as exc:
        print(f"hecsolver: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
