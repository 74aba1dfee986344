"""Sparse iterative solvers on hybrid ELL/CSR storage.

Storage and kernels (CSR, HEC, SpMV, BLAS-1), graph partitioning with halo
exchange plans, ILU(k) with level-scheduled triangular solves, two-level
restricted additive Schwarz, Krylov solvers and classical algebraic
multigrid.
"""

from .comm import CommPlan, PartitionedMatrix, build_comm_plan, build_partitioned, partitioned_spmv
from .csr import FormatError, SparseCsr
from .gallery import poisson1d, poisson2d, poisson3d, poisson3d_nnz, random_sparse
from .hec import HecMatrix, hec_from_csr
from .ilu import (FillLevels, IluFactors, LevelSchedule, MissingDiagonalError, ZeroPivotError,
                  build_level_schedule, ilu, ilu_factorize, ilu_symbolic, trisolve,
                  trisolve_sequential)
from .kernels import axpby_inplace, axpbyz, dot, norm2, spmv, spmv_axpby, spmv_csr
from .krylov import PartitionedOperator, SolveReport, SolverConfig, bicgstab, cg, gmres
from .mmio import read_matrix_market, write_matrix_market
from .partition import RowPartition, extract_ras_blocks, partition_rows, permute_symmetric
from .precond import IdentityPreconditioner, IluPreconditioner, Preconditioner
from .ras import RasPreconditioner, ras_apply
from .amg import (AmgHierarchy, AmgOptions, AmgPreconditioner, SmootherConfig, amg_setup,
                  amg_solve, cljp_coarsen, interp_direct, interp_standard, rs_coarsen, smooth,
                  strength, vcycle)

__version__ = "0.1.0"

__all__ = [
    "SparseCsr", "FormatError", "HecMatrix", "hec_from_csr",
    "spmv", "spmv_csr", "spmv_axpby", "axpbyz", "axpby_inplace", "dot", "norm2",
    "poisson1d", "poisson2d", "poisson3d", "poisson3d_nnz", "random_sparse",
    "read_matrix_market", "write_matrix_market",
    "RowPartition", "partition_rows", "permute_symmetric", "extract_ras_blocks",
    "CommPlan", "PartitionedMatrix", "build_comm_plan", "build_partitioned", "partitioned_spmv",
    "FillLevels", "IluFactors", "LevelSchedule", "ZeroPivotError", "MissingDiagonalError",
    "ilu_symbolic", "ilu_factorize", "ilu", "build_level_schedule", "trisolve",
    "trisolve_sequential",
    "Preconditioner", "IdentityPreconditioner", "IluPreconditioner",
    "RasPreconditioner", "ras_apply",
    "SolverConfig", "SolveReport", "PartitionedOperator", "bicgstab", "gmres", "cg",
    "AmgOptions", "AmgHierarchy", "AmgPreconditioner", "SmootherConfig", "strength",
    "rs_coarsen", "cljp_coarsen", "interp_direct", "interp_standard", "smooth",
    "amg_setup", "vcycle", "amg_solve",
]
