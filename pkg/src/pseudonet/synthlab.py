"""Synthetic ground truth, sampling, support-recovery metrics and the simulation study.

Randomness comes from numpy's ``Generator`` with the PCG64 bit generator,
seeded explicitly everywhere; per-trial seeds are derived with
``SeedSequence([seed, trial, ...])`` so trials are independent and
reproducible.
"""
from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import annotate
from .screening import LambdaGrid, lambda1_max, solve_path
from .solver import Estimate, SolverOptions
from .symcore import (
    DataMatrix,
    MatrixNorms,
    cardinality,
    center_columns,
    cholesky_spd,
    half_vectorize,
    matrix_norms,
    sample_covariance,
    spd_inverse,
)

OFFDIAG_LOW, OFFDIAG_HIGH = 0.5, 1.0
DOMINANCE = 1.25
DIAG_OFFSET = 0.5


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class GroundTruth:
    omega0: np.ndarray
    sigma0: np.ndarray
    support: frozenset
    seed: int

    @property
    def p(self) -> int:
        return self.omega0.shape[0]

    def support_mask(self) -> np.ndarray:
        m = self.omega0 != 0
        np.fill_diagonal(m, False)
        return m


def _regular_edges(p: int, degree: int, rng) -> np.ndarray:
    """Random graph with every vertex degree <= ``degree`` (greedy over shuffled pairs)."""
    iu, ju = np.triu_indices(p, k=1)
    order = rng.permutation(iu.size)
    deg = np.zeros(p, dtype=int)
    keep = np.zeros(iu.size, dtype=bool)
    for e in order:
        i, j = iu[e], ju[e]
        if deg[i] < degree and deg[j] < degree:
            keep[e] = True
            deg[i] += 1
            deg[j] += 1
    return keep


def generate_ground_truth(p: int, sparsity: float = 0.05, seed: int = 0, degree: Optional[int] = None) -> GroundTruth:
    """Random sparse, strictly diagonally dominant precision matrix.

    Each unordered off-diagonal pair is nonzero with probability
    ``sparsity`` (or, with ``degree``, pairs are added greedily in random
    order until no vertex can take another edge).  Nonzero values are
    uniform on ``[-1, -0.5] U [0.5, 1]``; each diagonal entry is
    ``1.25 * (row absolute off-diagonal sum) + 0.5``.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    if degree is None and not 0 < sparsity < 1:
        raise ValueError("sparsity must lie in (0, 1)")
    rng = _rng(seed)
    iu, ju = np.triu_indices(p, k=1)
    if degree is None:
        keep = rng.random(iu.size) < sparsity
    else:
        keep = _regular_edges(p, degree, rng)
    mags = rng.uniform(OFFDIAG_LOW, OFFDIAG_HIGH, iu.size)
    signs = np.where(rng.random(iu.size) < 0.5, -1.0, 1.0)
    vals = np.where(keep, mags * signs, 0.0)
    omega = np.zeros((p, p))
    omega[iu, ju] = vals
    omega[ju, iu] = vals
    np.fill_diagonal(omega, DOMINANCE * np.abs(omega).sum(axis=1) + DIAG_OFFSET)
    sigma = spd_inverse(omega)
    support = frozenset(zip(iu[keep].tolist(), ju[keep].tolist()))
    omega.flags.writeable = False
    sigma.flags.writeable = False
    return GroundTruth(omega, sigma, support, seed)


def sample_mvn(sigma0, n: int, seed: int = 0) -> DataMatrix:
    """``n`` rows ``L z`` with ``L = chol(sigma0)`` and ``z`` standard normal."""
    L = cholesky_spd(sigma0)
    Z = _rng(seed).standard_normal((n, L.shape[0]))
    return DataMatrix(Z @ L.T)


@dataclass(frozen=True)
class RecoveryMetrics:
    fpr: float
    tpr: float
    errors: MatrixNorms
    nnz_offdiag: int
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


def recovery_metrics(truth: GroundTruth, estimate, tol: float = 0.0) -> RecoveryMetrics:
    omega = estimate.omega if isinstance(estimate, Estimate) else np.asarray(estimate, dtype=np.float64)
    if omega.shape != truth.omega0.shape:
        raise ValueError("dimension mismatch between truth and estimate")
    iu, ju = np.triu_indices(truth.p, k=1)
    true_nz = truth.omega0[iu, ju] != 0
    est_nz = np.abs(omega[iu, ju]) > tol
    tp = int(np.sum(est_nz & true_nz))
    fp = int(np.sum(est_nz & ~true_nz))
    fn = int(np.sum(~est_nz & true_nz))
    tn = int(np.sum(~est_nz & ~true_nz))
    fpr = fp / (fp + tn) if fp + tn else 0.0
    tpr = tp / (tp + fn) if tp + fn else 0.0
    return RecoveryMetrics(fpr, tpr, matrix_norms(truth.omega0 - omega), int(est_nz.sum()), tp, fp, tn, fn)


def auc(points) -> float:
    """Area under the ROC staircase through ``points``.

    ``(0, 0)`` and ``(1, 1)`` are added, points sharing an fpr keep their
    largest tpr, tpr is made nondecreasing by a running maximum, and the
    resulting curve is integrated with the trapezoid rule.
    """
    pts = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 1:
        raise ValueError("need at least one ROC point")
    pts = np.vstack([pts, [[0.0, 0.0], [1.0, 1.0]]])
    fprs = np.unique(pts[:, 0])
    tprs = np.array([pts[pts[:, 0] == f, 1].max() for f in fprs])
    tprs = np.maximum.accumulate(tprs)
    return float(np.sum(np.diff(fprs) * (tprs[1:] + tprs[:-1]) / 2.0))


@dataclass(frozen=True)
class Saturation:
    nnz_vech: int
    bound_np: int
    bound_total: int
    saturated: bool


def saturation_count(estimate, n: int, p: int, tol: float = 0.0) -> Saturation:
    omega = estimate.omega if isinstance(estimate, Estimate) else np.asarray(estimate, dtype=np.float64)
    nnz = cardinality(half_vectorize(omega), tol)
    return Saturation(nnz, n * p, p * (p - 1) // 2, nnz <= n * p)


# -- simulation study ---------------------------------------------------------

@dataclass(frozen=True)
class StudyConfig:
    p: int = 100
    n_list: tuple = (20,)
    trials: int = 10
    seed: int = 0
    sparsity: float = 0.01
    degree: Optional[int] = None
    lambda2_seq: tuple = (4.0, 1.0, 0.25, 0.0625)
    n_lambda1: int = 8
    lambda1_min_ratio: float = 0.05
    epsilon: float = 1e-6
    max_iter: int = 20_000
    tol_nnz: float = 0.0
    methods: tuple = ("pseudonet", "concord")
    record_wallclock: bool = False

    def __post_init__(self):
        errs = []
        if self.p < 2:
            errs.append("p must be >= 2")
        if not self.n_list or any(int(n) < 1 for n in self.n_list):
            errs.append("n_list must hold positive integers")
        if self.trials < 1:
            errs.append("trials must be >= 1")
        if any(l <= 0 for l in self.lambda2_seq):
            errs.append("lambda2_seq must be positive (CONCORD runs at lambda2 = 0 separately)")
        if self.n_lambda1 < 1:
            errs.append("n_lambda1 must be >= 1")
        if not 0 < self.lambda1_min_ratio <= 1:
            errs.append("lambda1_min_ratio must lie in (0, 1]")
        unknown = set(self.methods) - {"pseudonet", "concord"}
        if unknown:
            errs.append(f"unknown methods {sorted(unknown)}")
        if errs:
            raise ValueError("; ".join(errs))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "lambda2_seq", tuple(sorted((float(x) for x in self.lambda2_seq), reverse=True)))


@dataclass
class StudyRow:
    trial: int
    method: str
    p: int
    n: int
    auc: float
    fro2: float
    op2: float
    l1: float
    linf: float
    wallclock_s: float


@dataclass
class StudyReport:
    config: StudyConfig
    rows: list = field(default_factory=list)

    def values(self, method: str, n: int, key: str) -> np.ndarray:
        return np.array([getattr(r, key) for r in self.rows if r.method == method and r.n == n])

    def summary(self) -> list:
        out = []
        for n in self.config.n_list:
            for m in self.config.methods:
                rec = {"method": m, "p": self.config.p, "n": n}
                for key in ("auc", "fro2", "op2", "l1", "linf", "wallclock_s"):
                    v = self.values(m, n, key)
                    q1, med, q3 = np.percentile(v, [25, 50, 75]) if v.size else (math.nan,) * 3
                    rec[f"{key}_median"] = float(med)
                    rec[f"{key}_iqr"] = float(q3 - q1)
                out.append(rec)
        return out


def method_grid(S, n: int, cfg: StudyConfig, method: str) -> LambdaGrid:
    """lambda1 runs from the CONCORD ``lambda1_max`` (the largest over all
    lambda2 >= 0) down by ``lambda1_min_ratio``; both methods share it."""
    top = lambda1_max(S, n, 0.0)
    l1 = tuple(top * np.geomspace(1.0, cfg.lambda1_min_ratio, cfg.n_lambda1)) if cfg.n_lambda1 > 1 else (top,)
    l2 = cfg.lambda2_seq if method == "pseudonet" else (0.0,)
    return LambdaGrid(l1, l2)


def evaluate_path(truth: GroundTruth, path, tol: float = 0.0):
    metrics = [recovery_metrics(truth, est, tol) for _, _, est in path.cells()]
    a = auc([(m.fpr, m.tpr) for m in metrics])
    med = lambda key: float(np.median([getattr(m.errors, key) for m in metrics]))
    return a, med("frobenius_squared"), med("op2"), med("elem_l1"), med("elem_linf"), metrics


def run_trial(cfg: StudyConfig, trial: int, n: int, truth: Optional[GroundTruth] = None) -> list:
    if truth is None:
        truth = generate_ground_truth(cfg.p, cfg.sparsity, seed=_trial_seed(cfg.seed, trial), degree=cfg.degree)
    X = center_columns(sample_mvn(truth.sigma0, n, seed=_trial_seed(cfg.seed, trial, n)))
    S = sample_covariance(X)
    opts = SolverOptions(epsilon=cfg.epsilon, max_iter=cfg.max_iter)
    rows = []
    for method in cfg.methods:
        grid = method_grid(S, n, cfg, method)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            path = solve_path(S, n, grid, opts)
        wall = time.perf_counter() - t0
        a, fro2, op2, l1, linf, _ = evaluate_path(truth, path, cfg.tol_nnz)
        rows.append(StudyRow(trial, method, cfg.p, n, a, fro2, op2, l1, linf, wall if cfg.record_wallclock else math.nan))
    return rows


def _trial_seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def _run_one_trial(cfg: StudyConfig, trial: int) -> list:
    truth = generate_ground_truth(cfg.p, cfg.sparsity, seed=_trial_seed(cfg.seed, trial), degree=cfg.degree)
    rows = []
    for n in cfg.n_list:
        try:
            rows.extend(run_trial(cfg, trial, n, truth))
        except Exception as exc:
            annotate(exc, f"trial {trial}, n={n}, seed={cfg.seed}")
            raise
    return rows


def run_simulation_study(cfg: StudyConfig, jobs: int = 1) -> StudyReport:
    """Run every trial; rows are merged in (trial, n, method) order whatever ``jobs`` is."""
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda t: _run_one_trial(cfg, t), range(cfg.trials)))
    else:
        chunks = [_run_one_trial(cfg, t) for t in range(cfg.trials)]
    report = StudyReport(cfg)
    for rows in chunks:
        report.rows.extend(rows)
    return report


STUDY_COLUMNS = ("trial", "method", "p", "n", "auc", "fro2", "op2", "l1", "linf", "wallclock_s")


def write_study_csv(path, report: StudyReport) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STUDY_COLUMNS)
        for r in sorted(report.rows, key=lambda r: (r.trial, r.n, r.method)):
            d = asdict(r)
            w.writerow([d[c] if isinstance(d[c], (int, str)) else repr(float(d[c])) for c in STUDY_COLUMNS])


def write_summary_csv(path, report: StudyReport) -> None:
    summary = report.summary()
    if not summary:
        return
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        cols = list(summary[0])
        w.writerow(cols)
        for rec in summary:
            w.writerow([rec[c] if isinstance(rec[c], (int, str)) else repr(rec[c]) for c in cols])
