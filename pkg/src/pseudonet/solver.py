"""Penalized pseudolikelihood objective and its proximal gradient solver.

The estimator minimizes over symmetric ``Omega``::

    f(Omega) = -sum_i log|Omega_ii| + (n/2) tr(S Omega^2)
               + lambda1 * ||Omega_off||_1 + (lambda2/2) ||Omega||_F^2

split as ``f = g + h`` with ``h = lambda1 * ||Omega_off||_1``.  The l1 norm
runs over all ordered off-diagonal pairs ``(i, j), i != j``.  Setting
``lambda2 = 0`` gives the CONCORD objective.

Restricted solves (used by the screening path) pass ``free``: a symmetric
boolean mask of coordinates allowed to be nonzero.  The diagonal is always
free; masked-out off-diagonals are pinned at zero.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceWarning, LineSearchFailed, ZeroDiagonal
from .symcore import as_sym, offdiag_mask, power_iteration_norm

TAU_MIN = 1e-14
RESYNC_EVERY = 100


@dataclass(frozen=True)
class Problem:
    S: np.ndarray
    n: int
    lambda1: float
    lambda2: float

    def __post_init__(self):
        S = as_sym(self.S)
        S.flags.writeable = False
        object.__setattr__(self, "S", S)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be positive")
        if not self.lambda2 >= 0:
            raise ValueError("lambda2 must be nonnegative")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def p(self) -> int:
        return self.S.shape[0]

    @property
    def concord(self) -> bool:
        """True when ``lambda2 == 0`` (non-unique CONCORD baseline)."""
        return self.lambda2 == 0.0

    def with_lambdas(self, lambda1=None, lambda2=None) -> "Problem":
        return Problem(
            self.S,
            self.n,
            self.lambda1 if lambda1 is None else lambda1,
            self.lambda2 if lambda2 is None else lambda2,
        )


@dataclass(frozen=True)
class SolverOptions:
    epsilon: float = 1e-8
    tau_init: float = 1.0
    beta: float = 0.5
    max_iter: int = 50_000
    record_trace: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.tau_init <= 1:
            raise ValueError("tau_init must lie in (0, 1]")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass(frozen=True)
class Estimate:
    omega: np.ndarray
    iterations: int
    kkt_residual: float
    objective_value: float
    objective_trace: Optional[tuple] = None
    residual_trace: Optional[tuple] = None
    converged: bool = True
    lambda1: float = math.nan
    lambda2: float = math.nan
    nonunique: bool = field(default=False, compare=False)

    @property
    def nnz_offdiag(self) -> int:
        """Number of nonzero unordered off-diagonal pairs."""
        return int(np.count_nonzero(np.triu(self.omega, 1)))


# -- objective pieces -------------------------------------------------------

def _check_diag(omega: np.ndarray) -> np.ndarray:
    d = np.diag(omega)
    if np.any(d == 0):
        raise ZeroDiagonal("objective undefined: zero diagonal entry")
    return d


def _smooth_value(problem: Problem, omega: np.ndarray, S_omega: np.ndarray) -> float:
    d = _check_diag(omega)
    return float(
        -np.sum(np.log(np.abs(d)))
        + 0.5 * problem.n * np.sum(S_omega * omega)
        + 0.5 * problem.lambda2 * np.sum(omega * omega)
    )


def _l1_off(omega: np.ndarray) -> float:
    return float(np.sum(np.abs(omega)) - np.sum(np.abs(np.diag(omega))))


def smooth_value(problem: Problem, omega) -> float:
    """``g(Omega)``: everything except the l1 term."""
    omega = np.asarray(omega, dtype=np.float64)
    return _smooth_value(problem, omega, problem.S @ omega)


def objective(problem: Problem, omega) -> float:
    omega = np.asarray(omega, dtype=np.float64)
    return smooth_value(problem, omega) + problem.lambda1 * _l1_off(omega)


def _gradient(problem: Problem, omega: np.ndarray, S_omega: np.ndarray) -> np.ndarray:
    d = _check_diag(omega)
    G = 0.5 * problem.n * (S_omega + S_omega.T) + problem.lambda2 * omega
    G[np.diag_indices_from(G)] -= 1.0 / d
    return G


def smooth_gradient(problem: Problem, omega) -> np.ndarray:
    """``-diag(1/Omega_ii) + (n/2)(S Omega + Omega S) + lambda2 Omega``."""
    omega = np.asarray(omega, dtype=np.float64)
    return _gradient(problem, omega, problem.S @ omega)


def prox_offdiag_l1(V, t: float, free: Optional[np.ndarray] = None) -> np.ndarray:
    """Soft-threshold the off-diagonal entries of ``V`` at ``t``.

    The diagonal passes through unchanged.  Entries outside ``free`` are set
    to zero.
    """
    if not t > 0:
        raise ValueError("threshold t must be positive")
    V = np.asarray(V, dtype=np.float64)
    out = np.sign(V) * np.maximum(np.abs(V) - t, 0.0)
    np.fill_diagonal(out, np.diag(V))
    if free is not None:
        out[~free] = 0.0
    return out


def _min_norm_subgradient(problem: Problem, omega, G, free):
    lam = problem.lambda1
    off = offdiag_mask(omega.shape[0])
    z = np.where(omega != 0, lam * np.sign(omega), np.clip(-G, -lam, lam))
    z[~off] = 0.0
    if free is not None:
        z[~free] = -G[~free]  # pinned coordinates carry no optimality condition
    return z


def _kkt(problem, omega, G, free) -> float:
    z = _min_norm_subgradient(problem, omega, G, free)
    return float(np.linalg.norm(G + z) / np.linalg.norm(omega))


def kkt_residual(problem: Problem, omega, free: Optional[np.ndarray] = None) -> float:
    """``||grad g + z||_F / ||Omega||_F`` with ``z`` the minimum-norm subgradient."""
    omega = np.asarray(omega, dtype=np.float64)
    return _kkt(problem, omega, smooth_gradient(problem, omega), free)


# -- proximal gradient --------------------------------------------------------

@dataclass
class StepResult:
    tau: float
    omega_next: np.ndarray
    S_omega_next: np.ndarray
    backtracks: int


def backtracking_step(
    problem: Problem,
    omega,
    grad,
    options: SolverOptions = SolverOptions(),
    free: Optional[np.ndarray] = None,
    S_omega: Optional[np.ndarray] = None,
) -> StepResult:
    """One proximal gradient step with backtracking on ``tau``.

    ``tau = tau_init * beta**k`` for the smallest ``k >= 0`` such that the
    candidate has a positive diagonal and satisfies::

        g(new) <= g(old) + <grad, new - old> + ||new - old||^2 / (2 tau)

    The test is evaluated in the algebraically equivalent form
    ``sum(d - log1p(d)) + (n/2)<S D, D> + (lambda2/2)||D||^2 <= ||D||^2/(2 tau)``
    with ``D = new - old`` and ``d = diag(D)/diag(old)``, which avoids
    cancellation between two large objective values near convergence.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if S_omega is None:
        S_omega = problem.S @ omega
    diag = np.diag(omega)
    tau = options.tau_init
    k = 0
    while tau >= TAU_MIN:
        cand = prox_offdiag_l1(omega - tau * grad, problem.lambda1 * tau, free)
        D = cand - omega
        rel = np.diag(D) / diag
        if np.all(1.0 + rel > 0) and np.all(np.diag(cand) > 0):
            SD = problem.S @ D
            dd = float(np.sum(D * D))
            excess = (
                float(np.sum(rel - np.log1p(rel)))
                + 0.5 * problem.n * float(np.sum(SD * D))
                + 0.5 * problem.lambda2 * dd
            )
            if excess <= dd / (2.0 * tau):
                return StepResult(tau, cand, S_omega + SD, k)
        tau *= options.beta
        k += 1
    raise LineSearchFailed(f"no acceptable step with tau >= {TAU_MIN}")


def default_start(problem: Problem) -> np.ndarray:
    """``diag(1/sqrt(n S_ii + lambda2))``, the exact solution for diagonal ``S``."""
    s = np.diag(problem.S)
    denom = problem.n * s + problem.lambda2
    if np.any(s <= 0) or np.any(denom <= 0):
        return np.eye(problem.p)
    return np.diag(1.0 / np.sqrt(denom))


def solve(
    problem: Problem,
    options: SolverOptions = SolverOptions(),
    omega0=None,
    free: Optional[np.ndarray] = None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> Estimate:
    """Proximal gradient with backtracking until the KKT residual is ``<= epsilon``.

    ``callback(i, omega)`` is invoked on the starting point (``i = 0``) and on
    every accepted iterate.  When ``max_iter`` is exhausted the last iterate
    is returned with ``converged=False`` and a :class:`ConvergenceWarning`.
    """
    if omega0 is None:
        omega = default_start(problem)
    else:
        omega = as_sym(omega0)
        if omega.shape != problem.S.shape:
            raise ValueError("omega0 has the wrong shape")
        if np.any(np.diag(omega) <= 0):
            raise ValueError("omega0 must have a strictly positive diagonal")
    if free is not None:
        free = np.asarray(free, dtype=bool) | np.eye(problem.p, dtype=bool)
        omega = np.where(free, omega, 0.0)

    S_omega = problem.S @ omega
    g_val = _smooth_value(problem, omega, S_omega)
    trace = [g_val + problem.lambda1 * _l1_off(omega)] if options.record_trace else None
    res_trace = [] if options.record_trace else None
    if callback is not None:
        callback(0, omega)

    it = 0
    converged = False
    while True:
        G = _gradient(problem, omega, S_omega)
        res = _kkt(problem, omega, G, free)
        if res_trace is not None:
            res_trace.append(res)
        if res <= options.epsilon:
            converged = True
            break
        if it >= options.max_iter:
            break
        step = backtracking_step(problem, omega, G, options, free, S_omega)
        omega, S_omega = step.omega_next, step.S_omega_next
        it += 1
        if it % RESYNC_EVERY == 0:
            S_omega = problem.S @ omega  # drop accumulated rounding from S @ D updates
        if trace is not None:
            trace.append(_smooth_value(problem, omega, S_omega) + problem.lambda1 * _l1_off(omega))
        if callback is not None:
            callback(it, omega)

    if not converged:
        warnings.warn(
            f"max_iter={options.max_iter} reached with KKT residual {res:.3e} > {options.epsilon:.1e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    value = _smooth_value(problem, omega, S_omega) + problem.lambda1 * _l1_off(omega)
    return Estimate(
        omega=omega,
        iterations=it,
        kkt_residual=res,
        objective_value=value,
        objective_trace=tuple(trace) if trace is not None else None,
        residual_trace=tuple(res_trace) if res_trace is not None else None,
        converged=converged,
        lambda1=problem.lambda1,
        lambda2=problem.lambda2,
        nonunique=problem.concord,
    )


def solve_concord_baseline(problem: Problem, options: SolverOptions = SolverOptions(), omega0=None) -> Estimate:
    """Same proximal loop with ``lambda2 = 0``; the result may be one of many minimizers."""
    if not problem.concord:
        raise ValueError("CONCORD baseline requires lambda2 == 0")
    return solve(problem, options, omega0)


def lipschitz_bound(problem: Problem, diag_min: float) -> float:
    """Gradient Lipschitz constant ``1/l^2 + n ||S||_2 + lambda2`` on ``{Omega_ii >= l}``."""
    if not diag_min > 0:
        raise ValueError("diag_min must be positive")
    return 1.0 / diag_min**2 + problem.n * power_iteration_norm(problem.S) + problem.lambda2


def write_trace_csv(path, estimate: Estimate) -> None:
    """Dump ``(iteration, objective, kkt_residual)`` rows for a traced solve."""
    if estimate.objective_trace is None:
        raise ValueError("estimate was computed without record_trace")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "kkt_residual"])
        for i, (f, r) in enumerate(zip(estimate.objective_trace, estimate.residual_trace)):
            w.writerow([i, repr(f), repr(r)])
