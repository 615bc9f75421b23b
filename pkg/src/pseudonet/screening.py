"""Sequential strong screening rules and the grid path solver.

Along a decreasing ``lambda1`` sequence (fixed ``lambda2``), an off-diagonal
pair is dropped from the next solve when its gradient coefficient at the
previous solution satisfies ``|c_ij| < 2 lambda1_next - lambda1_prev``.  The
rule can be wrong, so after each restricted solve every dropped pair is
checked against the optimality condition ``|c_ij| <= lambda1`` and violators
are put back.

``c_ij`` is the off-diagonal entry of the smooth gradient
``(n/2)(S Omega + Omega S) + lambda2 Omega``, i.e. the coefficient written
with ``S`` scaled by ``n/2``; this keeps the rule and the KKT check on the
same scale as the objective.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import annotate
from .solver import Estimate, Problem, SolverOptions, default_start, smooth_gradient, solve

VIOLATION_RTOL = 1e-8


@dataclass(frozen=True)
class LambdaGrid:
    lambda1_seq: tuple
    lambda2_seq: tuple

    def __post_init__(self):
        l1 = tuple(float(x) for x in np.atleast_1d(self.lambda1_seq))
        l2 = tuple(float(x) for x in np.atleast_1d(self.lambda2_seq))
        if not l1 or not l2:
            raise ValueError("grid sequences must be nonempty")
        if any(x <= 0 for x in l1):
            raise ValueError("lambda1 values must be positive")
        # lambda2 = 0 is admitted (as the last entry) for CONCORD paths
        if any(x < 0 for x in l2):
            raise ValueError("lambda2 values must be nonnegative")
        for seq, name in ((l1, "lambda1"), (l2, "lambda2")):
            if any(b >= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} sequence must be strictly decreasing")
        object.__setattr__(self, "lambda1_seq", l1)
        object.__setattr__(self, "lambda2_seq", l2)

    @property
    def shape(self) -> tuple:
        return len(self.lambda1_seq), len(self.lambda2_seq)


class ActiveSet:
    """Unordered off-diagonal pairs allowed to be nonzero, stored as a symmetric mask."""

    def __init__(self, mask):
        m = np.array(mask, dtype=bool)
        m = m | m.T
        np.fill_diagonal(m, False)
        self.mask = m

    @classmethod
    def from_pairs(cls, p: int, pairs) -> "ActiveSet":
        m = np.zeros((p, p), dtype=bool)
        for i, j in pairs:
            if i == j:
                raise ValueError("diagonal pairs are not allowed")
            m[i, j] = m[j, i] = True
        return cls(m)

    @classmethod
    def full(cls, p: int) -> "ActiveSet":
        return cls(np.ones((p, p), dtype=bool))

    @classmethod
    def empty(cls, p: int) -> "ActiveSet":
        return cls(np.zeros((p, p), dtype=bool))

    @property
    def p(self) -> int:
        return self.mask.shape[0]

    def pairs(self) -> set:
        i, j = np.nonzero(np.triu(self.mask, 1))
        return set(zip(i.tolist(), j.tolist()))

    def __len__(self) -> int:
        return int(np.count_nonzero(np.triu(self.mask, 1)))

    def free_mask(self) -> np.ndarray:
        return self.mask | np.eye(self.p, dtype=bool)

    def union(self, pairs) -> "ActiveSet":
        m = self.mask.copy()
        for i, j in pairs:
            m[i, j] = m[j, i] = True
        return ActiveSet(m)


@dataclass
class PathResult:
    grid: LambdaGrid
    estimates: list  # estimates[k][l] for lambda1_seq[k], lambda2_seq[l]
    dropped_fraction: np.ndarray
    violation_counts: np.ndarray

    def estimate(self, k: int, l: int) -> Estimate:
        return self.estimates[k][l]

    def cells(self):
        r, s = self.grid.shape
        for k in range(r):
            for l in range(s):
                yield k, l, self.estimates[k][l]


def screening_coefficients(problem: Problem, omega_hat) -> np.ndarray:
    """Off-diagonal gradient coefficients ``c_ij`` at ``omega_hat``; zero diagonal."""
    c = smooth_gradient(problem, omega_hat)
    np.fill_diagonal(c, 0.0)
    return c


def lambda1_max(S, n: int, lambda2: float) -> float:
    """Smallest ``lambda1`` at which the diagonal closed-form estimate is optimal."""
    prob = Problem(S, n, 1.0, lambda2)
    c = screening_coefficients(prob, default_start(prob))
    return float(np.max(np.abs(c))) if c.shape[0] > 1 else 0.0


def geometric_grid(S, n: int, lambda2_seq, num: int = 10, min_ratio: float = 0.1) -> LambdaGrid:
    """``num`` log-spaced ``lambda1`` values from ``lambda1_max`` (largest ``lambda2``)
    down to ``min_ratio * lambda1_max``."""
    l2 = tuple(sorted((float(x) for x in np.atleast_1d(lambda2_seq)), reverse=True))
    top = max(lambda1_max(S, n, l) for l in l2)
    if top <= 0:
        top = 1.0
    l1 = top * np.geomspace(1.0, min_ratio, num) if num > 1 else np.array([top])
    return LambdaGrid(tuple(l1), l2)


def strong_rule_filter(c, lambda1_prev: float, lambda1_next: float) -> ActiveSet:
    """Keep pair ``(i, j)`` unless ``|c_ij| < 2*lambda1_next - lambda1_prev``."""
    if lambda1_next > lambda1_prev:
        raise ValueError("lambda1_next must not exceed lambda1_prev")
    c = np.asarray(c, dtype=np.float64)
    return ActiveSet(~(np.abs(c) < 2.0 * lambda1_next - lambda1_prev))


def solve_restricted(problem: Problem, active: ActiveSet, options: SolverOptions = SolverOptions(), omega0=None) -> Estimate:
    """Solve with every off-diagonal outside ``active`` pinned at zero."""
    return solve(problem, options, omega0, free=active.free_mask())


def check_violations(problem: Problem, estimate, active: ActiveSet) -> set:
    """Excluded pairs whose optimality condition ``|grad_ij| <= lambda1`` fails."""
    omega = estimate.omega if isinstance(estimate, Estimate) else np.asarray(estimate)
    G = smooth_gradient(problem, omega)
    bad = (np.abs(G) > problem.lambda1 * (1.0 + VIOLATION_RTOL)) & ~active.mask
    np.fill_diagonal(bad, False)
    i, j = np.nonzero(np.triu(bad, 1))
    return set(zip(i.tolist(), j.tolist()))


def _warm(omega: np.ndarray, active: ActiveSet) -> np.ndarray:
    return np.where(active.free_mask(), omega, 0.0)


def _solve_row(S, n, grid: LambdaGrid, l: int, options: SolverOptions, screening: bool, omega_start=None):
    lam2 = grid.lambda2_seq[l]
    p = S.shape[0]
    n_pairs = p * (p - 1) // 2
    r = len(grid.lambda1_seq)
    ests, dropped, viol = [], np.zeros(r), np.zeros(r, dtype=int)

    prob = Problem(S, n, grid.lambda1_seq[0], lam2)
    try:
        est = solve(prob, options, omega_start)
    except Exception as exc:
        annotate(exc, f"at grid cell (lambda1={grid.lambda1_seq[0]}, lambda2={lam2})")
        raise
    ests.append(est)
    for k in range(1, r):
        lam_prev, lam = grid.lambda1_seq[k - 1], grid.lambda1_seq[k]
        prob = Problem(S, n, lam, lam2)
        prev = ests[-1]
        try:
            if not screening:
                est = solve(prob, options, prev.omega)
            else:
                c = screening_coefficients(prob, prev.omega)
                active = strong_rule_filter(c, lam_prev, lam)
                dropped[k] = 1.0 - len(active) / n_pairs if n_pairs else 0.0
                while True:
                    est = solve_restricted(prob, active, options, _warm(prev.omega, active))
                    bad = check_violations(prob, est, active)
                    if not bad:
                        break
                    viol[k] += len(bad)
                    active = active.union(bad)
                    prev = est
        except Exception as exc:
            annotate(exc, f"at grid cell (lambda1={lam}, lambda2={lam2})")
            raise
        ests.append(est)
    return ests, dropped, viol


def solve_path(
    S,
    n: int,
    grid: LambdaGrid,
    options: SolverOptions = SolverOptions(),
    screening: bool = True,
    jobs: int = 1,
) -> PathResult:
    """Solve over the whole ``(lambda1, lambda2)`` grid.

    Each ``lambda2`` row walks down ``lambda1`` with warm starts; with
    ``screening`` each step after the first is a restricted solve followed by
    the violation loop.  Rows are independent and run on ``jobs`` threads.
    """
    r, s = grid.shape
    if jobs > 1 and s > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda l: _solve_row(S, n, grid, l, options, screening), range(s)))
    else:
        rows = []
        start = None
        for l in range(s):
            rows.append(_solve_row(S, n, grid, l, options, screening, start))
            start = rows[-1][0][0].omega
    estimates = [[rows[l][0][k] for l in range(s)] for k in range(r)]
    dropped = np.column_stack([row[1] for row in rows])
    viol = np.column_stack([row[2] for row in rows])
    return PathResult(grid, estimates, dropped, viol)


def write_path_csv(path, result: PathResult) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda1", "lambda2", "nnz", "dropped_pct", "violations", "kkt_residual", "objective"])
        for k, l, est in result.cells():
            w.writerow([
                repr(result.grid.lambda1_seq[k]),
                repr(result.grid.lambda2_seq[l]),
                est.nnz_offdiag,
                repr(100.0 * float(result.dropped_fraction[k, l])),
                int(result.violation_counts[k, l]),
                repr(est.kkt_residual),
                repr(est.objective_value),
            ])
