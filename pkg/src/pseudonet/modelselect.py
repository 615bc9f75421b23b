"""Tuning-parameter selection with a BIC-like score.

For variable ``j``::

    rss_j = sum_i (X_ij - sum_{k != j} (Omega_jk / Omega_jj) X_ik)^2
    Bic_j = n log(rss_j) + log(n) * #{k != j : Omega_jk != 0}

``sign="verbatim"`` uses the residual exactly as above.  The regression
implied by the pseudolikelihood predicts ``X_j`` by
``-sum (Omega_jk / Omega_jj) X_k``; ``sign="regression"`` uses that residual
instead.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateRss
from .screening import LambdaGrid, PathResult, solve_path
from .solver import Estimate, SolverOptions
from .symcore import DataMatrix, _values, center_columns, sample_covariance

RSS_FLOOR = 1e-300
SIGNS = ("verbatim", "regression")


@dataclass(frozen=True)
class BicBreakdown:
    per_variable: np.ndarray
    total: float
    rss: np.ndarray
    df: np.ndarray
    degenerate: tuple = ()


def _omega(estimate) -> np.ndarray:
    return estimate.omega if isinstance(estimate, Estimate) else np.asarray(estimate, dtype=np.float64)


def residuals(X, estimate, sign: str = "verbatim") -> np.ndarray:
    if sign not in SIGNS:
        raise ValueError(f"sign must be one of {SIGNS}")
    omega = _omega(estimate)
    d = np.diag(omega)
    if np.any(d <= 0):
        raise ValueError("estimate must have a strictly positive diagonal")
    B = omega / d[:, None]
    np.fill_diagonal(B, 0.0)
    v = _values(X)
    pred = v @ B.T
    return v - pred if sign == "verbatim" else v + pred


def bic_score(X, estimate, lambda1=None, lambda2=None, sign: str = "verbatim", strict: bool = True) -> BicBreakdown:
    """Per-variable and total BIC-like score of ``estimate`` on data ``X``.

    ``lambda1``/``lambda2`` are carried for bookkeeping only.  With
    ``strict=False`` a zero residual sum of squares is floored at 1e-300
    and the column is reported in ``degenerate`` instead of raising.
    """
    v = _values(X)
    omega = _omega(estimate)
    n, p = v.shape
    if omega.shape != (p, p):
        raise ValueError(f"estimate is {omega.shape}, data has {p} columns")
    R = residuals(v, omega, sign)
    rss = np.sum(R * R, axis=0)
    bad = tuple(int(j) for j in np.nonzero(rss <= 0)[0])
    if bad and strict:
        raise DegenerateRss(bad)
    rss_safe = np.maximum(rss, RSS_FLOOR)
    off = omega != 0
    np.fill_diagonal(off, False)
    df = off.sum(axis=1)
    per = n * np.log(rss_safe) + math.log(n) * df
    return BicBreakdown(per, float(per.sum()), rss, df, bad)


@dataclass
class Selection:
    best_lambda1: float
    best_lambda2: float
    best_index: tuple
    scores: np.ndarray  # scores[k, l]
    path: PathResult

    @property
    def best_estimate(self) -> Estimate:
        k, l = self.best_index
        return self.path.estimates[k][l]


def _argmin_sparse_first(scores: np.ndarray) -> tuple:
    # grid sequences are decreasing, so scanning k then l in order visits
    # larger lambda1 first, then larger lambda2; strict < keeps the first tie
    best, idx = math.inf, (0, 0)
    r, s = scores.shape
    for k in range(r):
        for l in range(s):
            if scores[k, l] < best:
                best, idx = scores[k, l], (k, l)
    return idx


def _fit_path(Xc: DataMatrix, grid, options, jobs):
    return solve_path(sample_covariance(Xc), Xc.n, grid, options, jobs=jobs)


def select_by_bic(X, grid: LambdaGrid, options: SolverOptions = SolverOptions(), sign: str = "verbatim", jobs: int = 1) -> Selection:
    Xc = center_columns(X)
    path = _fit_path(Xc, grid, options, jobs)
    scores = np.empty(grid.shape)
    for k, l, est in path.cells():
        scores[k, l] = bic_score(Xc, est, sign=sign, strict=False).total
    k, l = _argmin_sparse_first(scores)
    return Selection(grid.lambda1_seq[k], grid.lambda2_seq[l], (k, l), scores, path)


def fold_bounds(n: int, K: int) -> list:
    """Contiguous row blocks ``[(start, stop), ...]`` of near-equal size."""
    if K < 2:
        raise ValueError("K must be at least 2")
    if n < K:
        raise ValueError(f"need at least K={K} rows, got {n}")
    edges = [round(i * n / K) for i in range(K + 1)]
    return list(zip(edges[:-1], edges[1:]))


def kfold_cv_select(X, grid: LambdaGrid, K: int, options: SolverOptions = SolverOptions(), sign: str = "verbatim", jobs: int = 1) -> Selection:
    """Contiguous-fold cross-validation of the BIC-like score.

    Each fold fits the path on the remaining rows (centered by their own
    means) and scores every cell on the held-out rows, centered by the same
    training means.  The returned ``path`` is refit on all rows.
    """
    v = _values(X)
    n = v.shape[0]
    scores = np.zeros(grid.shape)
    for a, b in fold_bounds(n, K):
        train = np.concatenate([v[:a], v[b:]])
        test = v[a:b]
        mu = train.mean(axis=0)
        Xtr = DataMatrix(train - mu, centered=True)
        path = _fit_path(Xtr, grid, options, jobs)
        for k, l, est in path.cells():
            scores[k, l] += bic_score(test - mu, est, sign=sign, strict=False).total
    k, l = _argmin_sparse_first(scores)
    full = _fit_path(center_columns(v), grid, options, jobs)
    return Selection(grid.lambda1_seq[k], grid.lambda2_seq[l], (k, l), scores, full)


def write_scores_csv(path, selection: Selection) -> None:
    g = selection.path.grid
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda1", "lambda2", "bic_total", "nnz"])
        for k, l, est in selection.path.cells():
            w.writerow([repr(g.lambda1_seq[k]), repr(g.lambda2_seq[l]), repr(float(selection.scores[k, l])), est.nnz_offdiag])


def write_selection_json(path, selection: Selection, **extra) -> None:
    est = selection.best_estimate
    report = {
        "best_lambda1": selection.best_lambda1,
        "best_lambda2": selection.best_lambda2,
        "best_index": list(selection.best_index),
        "best_score": float(selection.scores[selection.best_index]),
        "nnz": est.nnz_offdiag,
        "kkt_residual": est.kkt_residual,
        **extra,
    }
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
