import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hecsolver import (FormatError, SparseCsr, ilu, ilu_factorize, ilu_symbolic, poisson1d,
                       poisson2d, poisson3d, random_sparse, trisolve)
from hecsolver.ilu import (MissingDiagonalError, ZeroPivotError, build_level_schedule,
                           solve_lower, solve_upper, trisolve_sequential)
from oracles import dag_levels, dense_fill_levels, dense_ilu, rel_err


def _pattern(a):
    return {(int(i), int(j)) for i, j in zip(a.row_indices(), a.col_idx)}


def _dominant(n, density, seed):
    a = random_sparse(n, n, density, np.random.default_rng(seed))
    d = np.abs(a.to_dense()).sum(axis=1) + 1.0
    s = a.to_scipy()
    s.setdiag(d)
    return SparseCsr.from_scipy(s)


# -- symbolic -------------------------------------------------------------------------

def test_ilu0_pattern_is_pattern_of_a():
    for a in (poisson3d(6, 5, 4), _dominant(120, 0.05, 1)):
        f = ilu_symbolic(a, 0)
        assert _pattern(f.pattern) == _pattern(a)
        assert np.all(f.level == 0)


def test_tridiagonal_has_no_fill():
    a = poisson1d(50)
    for k in range(4):
        assert _pattern(ilu_symbolic(a, k).pattern) == _pattern(a)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_fill_levels_match_dense_oracle(k):
    for a in (poisson2d(10, 10), _dominant(60, 0.06, k)):
        f = ilu_symbolic(a, k)
        lev = dense_fill_levels(a.to_dense(), k)
        expect = {(int(i), int(j)) for i, j in zip(*np.nonzero(np.isfinite(lev)))}
        assert _pattern(f.pattern) == expect
        rows = f.pattern.row_indices()
        np.testing.assert_array_equal(f.level, lev[rows, f.pattern.col_idx].astype(int))


def test_2d_ilu1_fill_positions():
    a = poisson2d(10, 10)
    got = _pattern(ilu_symbolic(a, 1).pattern) - _pattern(a)
    # level-1 fill of the 5-point stencil: the anti-diagonal neighbour pair
    assert got
    for i, j in got:
        assert abs(i - j) == 9


def test_pattern_nesting_over_k():
    a = poisson3d(8, 8, 8)
    prev = None
    for k in range(4):
        cur = _pattern(ilu_symbolic(a, k).pattern)
        if prev is not None:
            assert prev <= cur
        prev = cur


def test_symbolic_errors():
    with pytest.raises(ValueError):
        ilu_symbolic(SparseCsr.identity(3), -1)
    with pytest.raises(ValueError):
        ilu_symbolic(SparseCsr.from_dense(np.ones((2, 3))), 0)
    with pytest.raises(MissingDiagonalError):
        ilu_symbolic(SparseCsr.from_dense([[1.0, 1.0], [1.0, 0.0]]), 0)


# -- numeric --------------------------------------------------------------------------

def test_identity_factors():
    f = ilu(SparseCsr.identity(5), 0)
    np.testing.assert_array_equal(f.lower().to_dense(), np.eye(5))
    np.testing.assert_array_equal(f.upper().to_dense(), np.eye(5))


@pytest.mark.parametrize("n", [1, 2, 10, 200])
def test_tridiagonal_exact(n):
    rng = np.random.default_rng(n)
    d = np.diag(rng.uniform(3, 4, n)) + np.diag(rng.uniform(-1, 1, n - 1), 1) \
        + np.diag(rng.uniform(-1, 1, n - 1), -1)
    a = SparseCsr.from_dense(d)
    f = ilu(a, 0)
    lu = f.lower().to_dense() @ f.upper().to_dense()
    assert np.max(np.abs(lu - d).sum(axis=1)) <= 1e-12 * np.max(np.abs(d).sum(axis=1))


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_residual_zero_on_pattern(k):
    a = poisson3d(8, 8, 8)
    f = ilu(a, k)
    lu = (f.lower().to_scipy() @ f.upper().to_scipy()).toarray()
    d = a.to_dense()
    mask = np.zeros_like(d, dtype=bool)
    mask[f.combined.row_indices(), f.combined.col_idx] = True
    assert np.max(np.abs((lu - d)[mask])) <= 1e-12 * np.max(np.abs(d))


def test_full_residual_non_increasing_in_k():
    a = poisson3d(20, 20, 20)
    s = a.to_scipy()
    prev = np.inf
    for k in range(4):
        f = ilu(a, k)
        r = abs(f.lower().to_scipy() @ f.upper().to_scipy() - s).sum(axis=1).max()
        assert r <= prev * (1 + 1e-12)
        prev = r


@pytest.mark.parametrize("k", [0, 1, 2])
def test_values_match_dense_elimination(k):
    a = _dominant(50, 0.08, 10 + k)
    f = ilu(a, k)
    mask = np.isfinite(dense_fill_levels(a.to_dense(), k))
    lo, up = dense_ilu(a.to_dense(), mask)
    assert rel_err(f.lower().to_dense(), lo) <= 1e-12
    assert rel_err(f.upper().to_dense(), up) <= 1e-12


def test_zero_pivot_detected():
    a = SparseCsr.from_dense([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(ZeroPivotError) as info:
        ilu(a, 0)
    assert info.value.row == 1
    f = ilu(SparseCsr.from_dense([[1.0, 1.0], [1.0, 1.0]]), 0, shift_on_breakdown=0.1)
    assert np.all(np.isfinite(f.combined.values))


def test_missing_diagonal_factorize():
    a = SparseCsr.from_dense([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(MissingDiagonalError):
        ilu(a, 0)


def test_pattern_mismatch_rejected():
    with pytest.raises(ValueError):
        ilu_factorize(poisson1d(4), ilu_symbolic(poisson1d(5), 0))


# -- level schedules ------------------------------------------------------------------

def test_schedule_diagonal_one_level():
    s = build_level_schedule(SparseCsr.identity(7), "lower")
    assert s.n_levels == 1 and s.widths().tolist() == [7]


def test_schedule_bidiagonal_n_levels():
    a = SparseCsr.from_dense(np.eye(6) + np.diag(np.ones(5), -1))
    s = build_level_schedule(a, "lower")
    assert s.n_levels == 6
    np.testing.assert_array_equal(s.rows, np.arange(6))


def test_schedule_rejects_wrong_triangle():
    with pytest.raises(FormatError):
        build_level_schedule(SparseCsr.from_dense(np.triu(np.ones((3, 3)))), "lower")


@pytest.mark.parametrize("k", [0, 2])
def test_schedule_matches_dag_oracle(k):
    f = ilu(poisson3d(10, 10, 10), k)
    d = f.combined.to_dense()
    for sched, lower in ((f.lower_schedule, True), (f.upper_schedule, False)):
        levels, n_levels = dag_levels(d, lower)
        assert sched.n_levels == n_levels
        np.testing.assert_array_equal(sched.level_of, levels)
        # no row depends on another row of its own or a later level
        for t in range(1, sched.n_levels + 1):
            for i in sched.level_rows(t):
                row = d[i]
                deps = np.flatnonzero(row[:i] if lower else row[i + 1:])
                deps = deps if lower else deps + i + 1
                assert np.all(sched.level_of[deps] < t)
        assert np.array_equal(np.sort(sched.rows), np.arange(f.n))


# -- triangular solves ------------------------------------------------------------------

@pytest.mark.parametrize("workers", [1, 2, 4])
def test_trisolve_bitwise_sequential(workers):
    for k in (0, 1):
        f = ilu(poisson3d(20, 20, 20), k)
        b = np.random.default_rng(k).standard_normal(f.n)
        assert np.array_equal(trisolve(f, b, workers=workers), trisolve_sequential(f, b))


@given(st.integers(1, 80), st.integers(0, 3), st.integers(0, 2**31))
def test_trisolve_matches_dense_solve(n, k, seed):
    a = _dominant(n, 0.1, seed)
    f = ilu(a, k)
    b = np.random.default_rng(seed).standard_normal(n)
    lu = f.lower().to_dense() @ f.upper().to_dense()
    x = trisolve(f, b)
    assert rel_err(x, np.linalg.solve(lu, b)) <= 1e-10


def test_solve_lower_upper_with_diagonal():
    rng = np.random.default_rng(2)
    d = np.tril(rng.uniform(-1, 1, (30, 30))) + 5 * np.eye(30)
    m = SparseCsr.from_dense(d + np.triu(rng.uniform(-1, 1, (30, 30)), 1))
    diag = np.flatnonzero(m.row_indices() == m.col_idx)
    b = rng.standard_normal(30)
    x = solve_lower(m, diag, build_level_schedule(SparseCsr.from_dense(d), "lower"), b,
                    unit=False)
    assert rel_err(x, np.linalg.solve(d, b)) <= 1e-12
    u = np.triu(m.to_dense())
    x = solve_upper(m, diag, build_level_schedule(SparseCsr.from_dense(u), "upper"), b)
    assert rel_err(x, np.linalg.solve(u, b)) <= 1e-12


def test_trisolve_dimension_mismatch():
    with pytest.raises(ValueError):
        trisolve(ilu(poisson1d(4), 0), np.ones(5))
