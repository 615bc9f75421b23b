"""Dense symmetric-matrix helpers used throughout the package.

Symmetric matrices are plain ``float64`` numpy arrays of shape ``(p, p)``;
:func:`as_sym` validates and exactly symmetrizes an input.  Data matrices are
wrapped in :class:`DataMatrix` so the centering state travels with the values.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DataError, NotPositiveDefinite

SYM_TOL = 1e-10


def as_sym(M, tol: float = SYM_TOL) -> np.ndarray:
    """Return ``M`` as a float64 symmetric array.

    Raises ``ValueError`` if ``M`` is not square or is asymmetric beyond
    ``tol`` relative to its largest entry.  The result is exactly symmetric.
    """
    A = np.array(M, dtype=np.float64, copy=True)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x p`` sample matrix (one sample per row)."""

    values: np.ndarray
    centered: bool = False
    names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DataError(f"data matrix must be n x p with n, p >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("data matrix contains NaN or Inf")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def _values(X) -> np.ndarray:
    if isinstance(X, DataMatrix):
        return X.values
    return np.asarray(X, dtype=np.float64)


def center_columns(X) -> DataMatrix:
    """Subtract column means; returns a :class:`DataMatrix` flagged centered."""
    names = X.names if isinstance(X, DataMatrix) else None
    v = _values(X)
    return DataMatrix(v - v.mean(axis=0), centered=True, names=names)


def _is_centered(v: np.ndarray) -> bool:
    scale = np.maximum(np.max(np.abs(v), axis=0), 1.0)
    return bool(np.all(np.abs(v.mean(axis=0)) <= 1e-12 * scale))


def sample_covariance(X) -> np.ndarray:
    """``S = X^T X / n``.  Warns (but still computes) if ``X`` is not centered."""
    v = _values(X)
    if not (isinstance(X, DataMatrix) and X.centered) and not _is_centered(v):
        warnings.warn("sample_covariance called on uncentered data", stacklevel=2)
    S = v.T @ v / v.shape[0]
    return 0.5 * (S + S.T)


def half_vectorize(M) -> np.ndarray:
    """Strictly-lower-triangular entries, column by column.

    For ``p = 3`` the order is ``(1,0), (2,0), (2,1)``.
    """
    A = np.asarray(M, dtype=np.float64)
    p = A.shape[0]
    cols, rows = np.triu_indices(p, k=1)  # rows > cols after the swap
    return A[rows, cols]


def unhalf_vectorize(v, p: int) -> np.ndarray:
    """Inverse of :func:`half_vectorize` with a zero diagonal."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (p * (p - 1) // 2,):
        raise ValueError("length does not match p(p-1)/2")
    A = np.zeros((p, p))
    cols, rows = np.triu_indices(p, k=1)
    A[rows, cols] = v
    A[cols, rows] = v
    return A


def cardinality(v, tol: float = 0.0) -> int:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return int(np.count_nonzero(np.abs(np.asarray(v)) > tol))


def offdiag_mask(p: int) -> np.ndarray:
    return ~np.eye(p, dtype=bool)


def power_iteration_norm(M, rtol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest absolute eigenvalue of a symmetric matrix by power iteration.

    The estimate is ``||M v||`` for the normalized iterate ``v``; this
    converges to ``max |eig|`` even when ``+lam`` and ``-lam`` are both
    eigenvalues (where the iterate itself oscillates).  Iteration stops when
    ``v`` is an approximate eigenvector of ``M^2``, i.e. the residual
    ``||M^2 v - theta v||`` with ``theta = ||M v||^2`` is at most ``rtol * theta``.
    Unlike a test on successive estimates, this is not fooled by the slow
    creep that nearly equal top eigenvalues produce.
    """
    A = np.asarray(M, dtype=np.float64)
    if not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)

    def fresh():
        v = rng.standard_normal(A.shape[0])
        return v / np.linalg.norm(v)

    v = fresh()
    w = A @ v
    nw = float(np.linalg.norm(w))
    for _ in range(max_iter):
        if nw == 0.0:
            # v landed in the null space; restart from a fresh direction
            v = fresh()
            w = A @ v
            nw = float(np.linalg.norm(w))
            continue
        u = A @ w  # M^2 v
        theta = nw * nw
        if np.linalg.norm(u - theta * v) <= rtol * theta:
            return nw
        v, w = w / nw, u / nw
        nw = float(np.linalg.norm(w))
    warnings.warn("power iteration did not reach the requested tolerance", stacklevel=2)
    return nw


@dataclass(frozen=True)
class MatrixNorms:
    frobenius: float
    frobenius_squared: float
    op2: float
    elem_l1: float
    elem_linf: float


def matrix_norms(M) -> MatrixNorms:
    A = np.asarray(M, dtype=np.float64)
    fro2 = float(np.sum(A * A))
    return MatrixNorms(
        frobenius=math.sqrt(fro2),
        frobenius_squared=fro2,
        op2=power_iteration_norm(A),
        elem_l1=float(np.sum(np.abs(A))),
        elem_linf=float(np.max(np.abs(A))),
    )


def cholesky_spd(M) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == M``."""
    A = np.asarray(M, dtype=np.float64)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def spd_inverse(M) -> np.ndarray:
    L = cholesky_spd(M)
    inv = scipy.linalg.cho_solve((L, True), np.eye(L.shape[0]))
    return 0.5 * (inv + inv.T)


def _parses(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_data_csv(path) -> DataMatrix:
    """Read an ``n x p`` sample matrix.

    The first row is treated as a header when none of its cells parses as a
    number.  NaN/Inf and unparsable cells raise :class:`DataError`
    naming the (1-based) row and column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    names = None
    start = 0
    if not any(_parses(c) for c in rows[0]):
        names = tuple(c.strip() for c in rows[0])
        start = 1
    width = len(rows[start]) if start < len(rows) else 0
    out = []
    for r_idx in range(start, len(rows)):
        row = rows[r_idx]
        if len(row) != width:
            raise DataError(f"{path}: row {r_idx + 1} has {len(row)} columns, expected {width}")
        vals = []
        for c_idx, cell in enumerate(row):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {r_idx + 1}, column {c_idx + 1}: cannot parse {cell!r}") from None
            if not math.isfinite(x):
                raise DataError(f"{path}: row {r_idx + 1}, column {c_idx + 1}: non-finite value {cell!r}")
            vals.append(x)
        out.append(vals)
    if not out:
        raise DataError(f"{path}: no data rows")
    return DataMatrix(np.array(out), names=names)


def write_matrix_csv(path, M) -> None:
    A = np.asarray(M, dtype=np.float64)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        for row in A:
            w.writerow([repr(float(x)) for x in row])
