"""Two-step estimator for the diagonal of a precision matrix.

For each variable ``j`` a lasso regression of ``X_j`` on the other columns
picks a neighborhood ``A_j``; the estimate of ``Omega_jj`` is then the entry
for ``j`` of ``inv(S[B, B])`` with ``B = A_j + {j}``.

The lasso objective is ``(1/n) ||y - Z b||^2 + lam ||b||_1``, which is the
covariance form ``(b', -1) S (b', -1)' + lam ||b||_1`` when ``S = [Z y]' [Z y] / n``.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConvergenceWarning, NotPositiveDefinite, SingularRestrictedCovariance
from .symcore import _values, center_columns, sample_covariance, spd_inverse

LASSO_TOL = 1e-10
LASSO_MAX_SWEEPS = 100_000
DEFAULT_C = 0.5


def _soft(x: float, t: float) -> float:
    return math.copysign(max(abs(x) - t, 0.0), x)


def lasso_coordinate_descent(y, Z, lam: float, tol: float = LASSO_TOL, max_sweeps: int = LASSO_MAX_SWEEPS, beta0=None) -> np.ndarray:
    """Cyclic coordinate descent for ``(1/n) ||y - Z b||^2 + lam ||b||_1``.

    The coordinate update is ``b_k = soft(z_k' r / n, lam / 2) / (||z_k||^2 / n)``
    with ``r`` the partial residual (tracked through the Gram matrix).  After
    each full sweep the solver cycles over the current nonzeros only until
    they settle, then does another full sweep; it stops when a full sweep moves no coefficient by more than
    ``tol``.  Columns with zero norm get coefficient zero.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    y = np.asarray(y, dtype=np.float64).ravel()
    Z = _values(Z)
    n, m = Z.shape
    if y.shape[0] != n:
        raise ValueError("y and Z have different numbers of rows")
    beta = np.zeros(m) if beta0 is None else np.array(beta0, dtype=np.float64)
    if m == 0:
        return beta
    # covariance updates: c = Z' r / n is kept current, so each coordinate
    # step costs O(m) instead of O(n)
    G = Z.T @ Z / n
    sq = np.diag(G).copy()
    c = Z.T @ y / n - G @ beta
    half = lam / 2.0

    def sweep(idx) -> float:
        biggest = 0.0
        for k in idx:
            if sq[k] == 0.0:
                continue
            old = beta[k]
            new = _soft(c[k] + sq[k] * old, half) / sq[k]
            if new != old:
                c[:] -= (new - old) * G[:, k]
                beta[k] = new
                biggest = max(biggest, abs(new - old))
        return biggest

    everything = range(m)
    for _ in range(max_sweeps):
        if sweep(everything) <= tol:
            return beta
        active = np.flatnonzero(beta)
        for _ in range(max_sweeps):
            if sweep(active) <= tol:
                break
    warnings.warn("lasso coordinate descent hit the sweep limit", ConvergenceWarning, stacklevel=2)
    return beta


def null_threshold(y, Z) -> float:
    """Smallest ``lam`` for which the lasso solution is all zeros."""
    Z = _values(Z)
    if Z.shape[1] == 0:
        return 0.0
    return float(2.0 * np.max(np.abs(Z.T @ np.asarray(y, dtype=np.float64))) / Z.shape[0])


def default_lambda(n: int, p: int, c: float = DEFAULT_C) -> float:
    return c * math.sqrt(math.log(p) / n)


def _zero_variance(v: np.ndarray) -> np.ndarray:
    return np.ptp(v, axis=0) == 0.0


def neighborhood(j: int, X, lam: float, exclude=()) -> frozenset:
    """Support of the lasso of column ``j`` on the others, as original indices.

    Columns in ``exclude`` (and ``j`` itself) never enter the neighborhood.
    """
    v = _values(X)
    p = v.shape[1]
    if not 0 <= j < p:
        raise IndexError(f"column {j} out of range for p={p}")
    banned = set(exclude) | {j}
    others = np.array([k for k in range(p) if k not in banned], dtype=int)
    beta = lasso_coordinate_descent(v[:, j], v[:, others], lam)
    return frozenset(others[beta != 0].tolist())


@dataclass(frozen=True)
class DiagonalEstimate:
    omega_diag_hat: np.ndarray
    supports: tuple
    lasso_lambda: float
    zero_variance: tuple = ()


def _restricted_diag(S: np.ndarray, j: int, support) -> float:
    B = sorted(set(support) | {j})
    try:
        inv = spd_inverse(S[np.ix_(B, B)])
    except NotPositiveDefinite:
        raise SingularRestrictedCovariance(j) from None
    return float(inv[B.index(j), B.index(j)])


def two_step_diagonal(X, lam: float | None = None, jobs: int = 1) -> DiagonalEstimate:
    """Estimate ``diag(Omega)`` from data ``X`` (rows are samples).

    ``X`` is centered first.  ``lam`` defaults to ``0.5 * sqrt(log p / n)``.
    Zero-variance columns are kept out of every neighborhood and reported in
    ``zero_variance``; their own restricted covariance is singular, so
    estimating their diagonal raises :class:`SingularRestrictedCovariance`.
    """
    Xc = center_columns(X)
    v = Xc.values
    n, p = v.shape
    if lam is None:
        lam = default_lambda(n, max(p, 2))
    if lam <= 0:
        raise ValueError("lam must be positive")
    dead = tuple(int(k) for k in np.flatnonzero(_zero_variance(v)))
    S = sample_covariance(Xc)

    def one(j):
        supp = neighborhood(j, v, lam, exclude=dead)
        if len(supp) + 1 > n:
            raise SingularRestrictedCovariance(j)
        return supp, _restricted_diag(S, j, supp)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            res = list(pool.map(one, range(p)))
    else:
        res = [one(j) for j in range(p)]
    diag = np.array([d for _, d in res])
    return DiagonalEstimate(diag, tuple(s for s, _ in res), float(lam), dead)


def write_diag_csv(path, est: DiagonalEstimate) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "omega_diag_hat", "support_size", "support_indices"])
        for j, (d, s) in enumerate(zip(est.omega_diag_hat, est.supports)):
            w.writerow([j, repr(float(d)), len(s), *sorted(s)])
