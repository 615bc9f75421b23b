import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudonet.screening import (
    ActiveSet,
    LambdaGrid,
    check_violations,
    geometric_grid,
    lambda1_max,
    screening_coefficients,
    solve_path,
    solve_restricted,
    strong_rule_filter,
    write_path_csv,
)
from pseudonet.solver import Problem, SolverOptions, default_start, solve
from pseudonet.synthlab import generate_ground_truth, sample_mvn
from pseudonet.symcore import center_columns, sample_covariance

from conftest import random_covariance, random_sym
from oracles import naive_screening_coefficients


def synthetic_S(p, n, seed):
    truth = generate_ground_truth(p, 0.1, seed=seed)
    X = center_columns(sample_mvn(truth.sigma0, n, seed=seed + 1))
    return sample_covariance(X)


# -- coefficients ---------------------------------------------------------------

def test_coefficients_zero_for_diagonal_inputs():
    prob = Problem(np.diag([1.0, 2.0, 3.0]), 5, 1.0, 0.3)
    c = screening_coefficients(prob, np.diag([0.5, 0.7, 0.2]))
    assert np.all(c == 0)


def test_coefficients_diagonal_estimate_general_S(rng):
    S = random_covariance(rng, 10, 4)
    n = 10
    d = rng.uniform(0.5, 2, 4)
    c = screening_coefficients(Problem(S, n, 1.0, 0.3), np.diag(d))
    want = 0.5 * n * (d[:, None] + d[None, :]) * S
    np.fill_diagonal(want, 0)
    np.testing.assert_allclose(c, want, rtol=1e-13)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30)
def test_coefficients_match_naive_loop(seed):
    rng = np.random.default_rng(seed)
    p, n = int(rng.integers(2, 8)), int(rng.integers(2, 20))
    S = random_covariance(rng, n, p)
    lam2 = float(rng.uniform(0, 2))
    om = random_sym(rng, p)
    c = screening_coefficients(Problem(S, n, 1.0, lam2), om)
    want = naive_screening_coefficients(S, n, lam2, om)
    assert np.max(np.abs(c - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


# -- strong rule -----------------------------------------------------------------

def test_strong_rule_examples():
    c = np.array([[0.0, 0.7, 0.85], [0.7, 0.0, 0.0], [0.85, 0.0, 0.0]])
    active = strong_rule_filter(c, 1.0, 0.9)
    assert active.pairs() == {(0, 2)}
    basic = strong_rule_filter(c, 0.8, 0.8)
    assert basic.pairs() == {(0, 2)}  # |c| < lambda drops 0.7, keeps 0.85
    with pytest.raises(ValueError):
        strong_rule_filter(c, 0.5, 0.9)


def test_active_set_invariants():
    a = ActiveSet.from_pairs(4, [(0, 1), (1, 0), (2, 3)])
    assert len(a) == 2 and a.pairs() == {(0, 1), (2, 3)}
    assert not np.any(np.diag(a.mask))
    with pytest.raises(ValueError):
        ActiveSet.from_pairs(3, [(1, 1)])


# -- restricted solves and violations ---------------------------------------------

def test_restricted_full_equals_unrestricted(rng):
    S = random_covariance(rng, 15, 6)
    prob = Problem(S, 15, 0.3, 0.5)
    a = solve_restricted(prob, ActiveSet.full(6), SolverOptions(epsilon=1e-12)).omega
    b = solve(prob, SolverOptions(epsilon=1e-12)).omega
    assert np.linalg.norm(a - b) < 1e-10


def test_restricted_empty_gives_closed_form(rng):
    S = random_covariance(rng, 15, 5)
    prob = Problem(S, 15, 0.01, 0.5)
    est = solve_restricted(prob, ActiveSet.empty(5))
    np.testing.assert_allclose(est.omega, default_start(prob), atol=1e-12)


def test_restricted_on_true_support(rng):
    S = random_covariance(rng, 20, 6)
    prob = Problem(S, 20, 0.5, 0.5)
    full = solve(prob, SolverOptions(epsilon=1e-12))
    support = ActiveSet(full.omega != 0)
    est = solve_restricted(prob, support, SolverOptions(epsilon=1e-12))
    assert np.linalg.norm(est.omega - full.omega) < 1e-8
    assert check_violations(prob, full, support) == set()


def test_violation_detected_for_forced_exclusion(rng):
    S = random_covariance(rng, 20, 6)
    prob = Problem(S, 20, 0.3, 0.5)
    full = solve(prob, SolverOptions(epsilon=1e-12))
    pairs = ActiveSet(full.omega != 0).pairs()
    assert pairs
    victim = max(pairs, key=lambda ij: abs(full.omega[ij]))
    active = ActiveSet(full.omega != 0)
    active.mask[victim] = active.mask[victim[::-1]] = False
    est = solve_restricted(prob, active)
    assert victim in check_violations(prob, est, active)


def test_no_violations_for_diagonal_S():
    prob = Problem(np.diag([1.0, 2.0, 0.5]), 4, 0.1, 0.2)
    est = solve_restricted(prob, ActiveSet.empty(3))
    assert check_violations(prob, est, ActiveSet.empty(3)) == set()


# -- path -------------------------------------------------------------------------

def test_lambda1_max_gives_diagonal(rng):
    S = random_covariance(rng, 10, 5)
    for l2 in (0.0, 0.5):
        top = lambda1_max(S, 10, l2)
        assert solve(Problem(S, 10, top * (1 + 1e-9), l2)).nnz_offdiag == 0
        assert solve(Problem(S, 10, top * 0.9, l2)).nnz_offdiag > 0


def test_one_cell_path_equals_single_solve(rng):
    S = random_covariance(rng, 12, 5)
    grid = LambdaGrid((0.4,), (0.7,))
    res = solve_path(S, 12, grid)
    est = solve(Problem(S, 12, 0.4, 0.7))
    np.testing.assert_array_equal(res.estimate(0, 0).omega, est.omega)
    assert res.dropped_fraction[0, 0] == 0


def test_path_matches_unscreened_and_dropped_monotone():
    S = synthetic_S(20, 10, seed=3)
    grid = geometric_grid(S, 10, (2.0, 0.5), num=6, min_ratio=0.1)
    opts = SolverOptions(epsilon=1e-10)
    screened = solve_path(S, 10, grid, opts)
    for k, l, est in screened.cells():
        ref = solve(Problem(S, 10, grid.lambda1_seq[k], grid.lambda2_seq[l]), opts).omega
        assert np.linalg.norm(est.omega - ref) < 1e-6
    for l in range(grid.shape[1]):
        col = screened.dropped_fraction[1:, l]
        # larger lambda1 (earlier rows) drops more; allow 1 point of slack
        assert np.all(np.diff(col) <= 0.01)


def test_warm_and_cold_agree():
    S = synthetic_S(15, 8, seed=5)
    grid = geometric_grid(S, 8, (1.0,), num=5)
    opts = SolverOptions(epsilon=1e-10)
    warm = solve_path(S, 8, grid, opts, screening=False)
    for k, _, est in warm.cells():
        cold = solve(Problem(S, 8, grid.lambda1_seq[k], 1.0), opts)
        assert np.linalg.norm(est.omega - cold.omega) < 1e-6


def test_jobs_give_identical_rows():
    S = synthetic_S(10, 8, seed=1)
    grid = geometric_grid(S, 8, (1.0, 0.5), num=3)
    a = solve_path(S, 8, grid, jobs=1)
    b = solve_path(S, 8, grid, jobs=2)
    for (_, _, x), (_, _, y) in zip(a.cells(), b.cells()):
        assert np.linalg.norm(x.omega - y.omega) < 1e-6


def test_grid_validation():
    with pytest.raises(ValueError):
        LambdaGrid((1.0, 1.0), (1.0,))
    with pytest.raises(ValueError):
        LambdaGrid((1.0,), (-1.0,))
    with pytest.raises(ValueError):
        LambdaGrid((0.0,), (1.0,))


def test_path_csv(tmp_path):
    S = synthetic_S(6, 10, seed=2)
    res = solve_path(S, 10, geometric_grid(S, 10, (1.0,), num=3))
    f = tmp_path / "path.csv"
    write_path_csv(f, res)
    lines = f.read_text().splitlines()
    assert lines[0] == "lambda1,lambda2,nnz,dropped_pct,violations,kkt_residual,objective"
    assert len(lines) == 4
