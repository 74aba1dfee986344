import numpy as np
import pytest

from hecsolver import (IluPreconditioner, PartitionedOperator, RasPreconditioner, SolverConfig,
                       SparseCsr, bicgstab, cg, gmres, ilu, partition_rows, permute_symmetric,
                       poisson1d, poisson3d, random_sparse, trisolve)
from hecsolver.partition import RowPartition
from oracles import rel_err

SOLVERS = {"bicgstab": bicgstab, "gmres": gmres, "cg": cg}


def _spd(n, seed, density=0.05):
    a = random_sparse(n, n, density, np.random.default_rng(seed))
    s = a.to_scipy()
    s = s + s.T
    d = np.asarray(abs(s).sum(axis=1)).ravel() + 1.0
    s.setdiag(d)
    return SparseCsr.from_scipy(s.tocsr())


def _nonsym(n, seed, density=0.05):
    a = random_sparse(n, n, density, np.random.default_rng(seed))
    s = a.to_scipy()
    s.setdiag(np.asarray(abs(s).sum(axis=1)).ravel() + 1.0)
    return SparseCsr.from_scipy(s.tocsr())


# -- RAS --------------------------------------------------------------------------------

def test_ras_single_block_equals_global_ilu():
    a = poisson3d(10, 10, 10)
    pc = RasPreconditioner(a, 1, 1, 0, 0, k=1)
    r = np.random.default_rng(0).standard_normal(a.n_rows)
    assert np.array_equal(pc.apply(r), trisolve(ilu(a, 1), r))


def test_ras_block_diagonal_exact():
    blocks = [poisson1d(7).to_dense(), 3 * np.eye(5) + np.diag(np.ones(4), 1)]
    d = np.zeros((12, 12))
    d[:7, :7], d[7:, 7:] = blocks
    a = SparseCsr.from_dense(d)
    pc = RasPreconditioner(a, 2, 1, 0, 0, k=0,
                           partitioner=lambda m, k: (np.arange(m.n_rows) >= 7).astype(int)
                           if k == 2 else np.zeros(m.n_rows, int))
    r = np.random.default_rng(1).standard_normal(12)
    # fill-free blocks: ILU(0) is exact, and so is the block solve
    assert rel_err(pc.apply(r), np.linalg.solve(d, r)) <= 1e-12


def test_ras_covers_every_row_once():
    a = poisson3d(12, 12, 12)
    pc = RasPreconditioner(a, 4, 8, 1, 1, k=0)
    assert pc.n_blocks == 32
    assert pc.extended_size > a.n_rows
    st = pc.stats()
    assert st["blocks"] == 32 and st["factor_nnz"] > 0


def test_ras_inner_overlap_grows_leaves():
    a = poisson3d(10, 10, 10)
    small = RasPreconditioner(a, 2, 4, 0, 0).extended_size
    big = RasPreconditioner(a, 2, 4, 0, 1).extended_size
    assert small == a.n_rows < big


@pytest.mark.parametrize("workers", [1, 2, 4])
def test_ras_apply_workers_bitwise(workers):
    a = poisson3d(12, 12, 12)
    r = np.random.default_rng(2).standard_normal(a.n_rows)
    ref = RasPreconditioner(a, 2, 8, 1, 1, k=1).apply(r)
    assert np.array_equal(RasPreconditioner(a, 2, 8, 1, 1, k=1, workers=workers).apply(r), ref)


def test_ras_overlap_trend_poisson():
    a = poisson3d(20, 20, 20)
    b = np.ones(a.n_rows)
    its = []
    for ov in (0, 1, 2):
        _, rep = bicgstab(a, b, RasPreconditioner(a, 4, 8, ov, ov, k=0))
        assert rep.converged
        its.append(rep.iterations)
    assert its[1] <= its[0] + 2 and its[2] <= its[0] + 2


def test_ras_dimension_mismatch():
    pc = RasPreconditioner(poisson1d(10), 2)
    with pytest.raises(ValueError):
        pc.apply(np.ones(11))


# -- Krylov examples ------------------------------------------------------------------------

@pytest.mark.parametrize("name", list(SOLVERS))
def test_identity_one_step(name):
    b = np.arange(1.0, 11.0)
    x, rep = SOLVERS[name](SparseCsr.identity(10), b)
    assert rep.converged and rep.iterations <= 1
    assert rel_err(x, b) <= 1e-12


@pytest.mark.parametrize("name", ["bicgstab", "gmres"])
def test_small_nonsymmetric(name):
    a = SparseCsr.from_dense([[4.0, 1.0], [2.0, 3.0]])
    x, rep = SOLVERS[name](a, np.array([1.0, 2.0]), config=SolverConfig(tolerance=1e-12))
    assert rep.converged
    assert rel_err(x, [0.1, 0.6]) <= 1e-10


@pytest.mark.parametrize("name", list(SOLVERS))
def test_zero_rhs(name):
    x, rep = SOLVERS[name](poisson1d(20), np.zeros(20))
    assert rep.converged and rep.iterations == 0
    assert np.array_equal(x, np.zeros(20))


@pytest.mark.parametrize("name", list(SOLVERS))
@pytest.mark.parametrize("seed", range(4))
def test_dense_oracle(name, seed):
    a = _spd(150, seed) if name == "cg" else _nonsym(150, seed)
    b = np.random.default_rng(seed).standard_normal(150)
    cfg = SolverConfig(tolerance=1e-12, max_iterations=500, restart=50)
    for m in (None, IluPreconditioner(a, 0)):
        x, rep = SOLVERS[name](a, b, m, cfg)
        assert rep.converged, rep
        assert rel_err(x, np.linalg.solve(a.to_dense(), b)) <= 1e-8


@pytest.mark.parametrize("name", list(SOLVERS))
def test_residual_contract(name):
    a = poisson3d(10, 10, 10)
    b = np.random.default_rng(3).standard_normal(a.n_rows)
    x, rep = SOLVERS[name](a, b, IluPreconditioner(a, 0))
    true = np.linalg.norm(b - a.to_scipy() @ x) / np.linalg.norm(b)
    assert rep.converged
    assert abs(true - rep.final_relative_residual) <= 1e-12
    assert true <= 1e-6
    assert rep.timings["apply"] >= rep.timings["spmv"] >= 0


def test_gmres_ilu_fewer_iterations():
    a = poisson3d(30, 30, 30)
    b = np.ones(a.n_rows)
    _, plain = gmres(a, b)
    _, pre = gmres(a, b, IluPreconditioner(a, 0))
    assert plain.converged and pre.converged
    assert pre.iterations < plain.iterations


def test_cg_distinct_eigenvalues():
    d = np.repeat([1.0, 2.0, 5.0, 9.0], 10)
    a = SparseCsr.from_dense(np.diag(d))
    _, rep = cg(a, np.ones(40), config=SolverConfig(tolerance=1e-12))
    assert rep.converged and rep.iterations <= 4


def test_cg_exact_preconditioner():
    a = _spd(60, 7)
    inv = np.linalg.inv(a.to_dense())
    _, rep = cg(a, np.ones(60), lambda r: inv @ r, SolverConfig(tolerance=1e-10))
    assert rep.converged and rep.iterations <= 2


def test_cg_indefinite_reports_breakdown():
    a = SparseCsr.from_dense(np.diag([1.0, -1.0, 2.0]))
    _, rep = cg(a, np.ones(3))
    assert not rep.converged and rep.breakdown == "indefinite"


def test_max_iterations_reported():
    a = poisson3d(15, 15, 15)
    _, rep = bicgstab(a, np.ones(a.n_rows), config=SolverConfig(max_iterations=3))
    assert not rep.converged and rep.iterations == 3 and rep.status == "max_iterations"


@pytest.mark.parametrize("name", list(SOLVERS))
def test_determinism(name):
    a = poisson3d(12, 12, 12)
    b = np.random.default_rng(9).standard_normal(a.n_rows)
    x1, r1 = SOLVERS[name](a, b, RasPreconditioner(a, 2, 4, 1, 1, k=1))
    x2, r2 = SOLVERS[name](a, b, RasPreconditioner(a, 2, 4, 1, 1, k=1, workers=2), workers=3)
    assert np.array_equal(x1, x2)
    assert r1.iterations == r2.iterations
    assert r1.residual_history == r2.residual_history


def test_permutation_equivariance():
    a = _nonsym(120, 11)
    b = np.random.default_rng(11).standard_normal(120)
    perm = np.random.default_rng(12).permutation(120)
    pa = permute_symmetric(a, perm)
    pb = np.empty(120)
    pb[perm] = b
    cfg = SolverConfig(tolerance=1e-10)
    x, _ = gmres(a, b, config=cfg)
    px, _ = gmres(pa, pb, config=cfg)
    assert rel_err(px[perm], x) <= 1e-7


def test_bad_inputs():
    with pytest.raises(ValueError):
        bicgstab(poisson1d(5), np.ones(4))
    with pytest.raises(ValueError):
        gmres(poisson1d(3), np.array([1.0, np.nan, 0.0]))
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        cg(SparseCsr.from_dense(np.ones((2, 3))), np.ones(2))


# -- partitioned operator -----------------------------------------------------------------

def test_partitioned_operator_solve():
    a = poisson3d(12, 12, 12)
    b = np.ones(a.n_rows)
    x_ref, ref = bicgstab(a, b)
    op = PartitionedOperator(a, 4)
    x, rep = bicgstab(op, b)
    assert rep.converged and rep.iterations == ref.iterations
    assert rel_err(x, x_ref) <= 1e-10
    # every product pays the plan volume once
    assert rep.comm_volume > 0 and rep.comm_volume % op.matrix.plan.comm_volume == 0


def test_partitioned_operator_given_partition():
    a = poisson3d(6, 6, 6)
    part = RowPartition.identity(a.n_rows)
    op = PartitionedOperator(a, 1, partition=part)
    x = np.random.default_rng(0).standard_normal(a.n_rows)
    assert rel_err(op.matvec(x), a.to_scipy() @ x) <= 1e-14
    assert op.comm_volume == 0
    assert partition_rows(a, 1).n_parts == 1
