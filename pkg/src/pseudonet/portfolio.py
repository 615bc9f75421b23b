"""Minimum-variance portfolio backtests driven by precision-matrix estimates.

Conventions
-----------
* Daily price changes are simple returns ``(P_t - P_{t-1}) / P_{t-1}``.
* The return of asset ``i`` over a holding period is the compounded simple
  return ``prod(1 + r) - 1`` over the period's days, and the portfolio return
  is ``x_t' p_t`` with the weights fixed at the start of the period.
* The annual risk-free rate is converted to a per-period rate by dividing by
  ``periods_per_year`` (default ``261 / period_length``, 261 trading days).
* Costs, when enabled, are charged per period as fractions of wealth:
  ``borrow_apr * period_length / 365 * sum(|min(x, 0)|)`` for the short side
  plus ``txn_rate * ||x_t - x_{t-1}||_1`` for turnover, starting from an
  all-cash position ``x_0 = 0``.
* Before a regularized estimate, the window's returns are divided by their
  root-mean-square entry.  One scalar for the whole window keeps relative
  variances and correlations intact, and puts ``n S`` on the same footing
  as the ``lambda2`` grid (daily returns of ~1% would otherwise make any
  ``lambda2`` near 1 swamp the data and slow the solver).
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    DataError,
    DegenerateAllocation,
    InsufficientHistory,
    ZeroPortfolio,
    ZeroRisk,
    annotate,
)
from .modelselect import kfold_cv_select
from .screening import LambdaGrid, geometric_grid
from .solver import SolverOptions
from .symcore import center_columns, sample_covariance, spd_inverse

TRADING_DAYS = 261
CALENDAR_DAYS = 365
STRATEGIES = ("pseudonet", "concord", "sample", "identity")


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple
    prices: np.ndarray
    asset_names: tuple

    def __post_init__(self):
        P = np.array(self.prices, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] < 1 or P.shape[1] < 1:
            raise DataError(f"prices must be a T x p array, got shape {P.shape}")
        if len(self.dates) != P.shape[0]:
            raise DataError("number of dates does not match number of price rows")
        names = tuple(self.asset_names) if self.asset_names is not None else tuple(f"asset{i}" for i in range(P.shape[1]))
        if len(names) != P.shape[1]:
            raise DataError("number of asset names does not match number of price columns")
        if not np.all(np.isfinite(P)) or np.any(P <= 0):
            bad = np.argwhere(~np.isfinite(P) | (P <= 0))[0]
            raise DataError(f"price at row {bad[0] + 1}, column {bad[1] + 1} is not a positive number")
        dates = tuple(self.dates)
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise DataError(f"dates must be strictly increasing ({a!r} then {b!r})")
        P.flags.writeable = False
        object.__setattr__(self, "prices", P)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "asset_names", names)

    @property
    def p(self) -> int:
        return self.prices.shape[1]


def simple_returns(prices) -> np.ndarray:
    P = prices.prices if isinstance(prices, PriceSeries) else np.asarray(prices, dtype=np.float64)
    return P[1:] / P[:-1] - 1.0


def prices_from_returns(returns, start: float = 100.0, first_date=_dt.date(2000, 1, 3), names=None) -> PriceSeries:
    """Build a price series whose simple returns are ``returns`` (one row per day)."""
    R = np.asarray(returns, dtype=np.float64)
    P = start * np.vstack([np.ones(R.shape[1]), np.cumprod(1.0 + R, axis=0)])
    dates = tuple(first_date + _dt.timedelta(days=i) for i in range(P.shape[0]))
    return PriceSeries(dates, P, names)


@dataclass(frozen=True)
class CostModel:
    borrow_apr: float = 0.08
    txn_rate: float = 0.005

    def __post_init__(self):
        if self.borrow_apr < 0 or self.txn_rate < 0:
            raise ValueError("cost rates must be nonnegative")


@dataclass(frozen=True)
class BacktestConfig:
    horizon: int
    period_length: int = 20
    risk_free_rate: float = 0.05
    grid: Optional[LambdaGrid] = None
    cv_folds: int = 10
    cost_model: Optional[CostModel] = None
    periods_per_year: Optional[float] = None
    lambda2_seq: tuple = (1.0, 0.1)
    n_lambda1: int = 8
    lambda1_min_ratio: float = 0.1
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(epsilon=1e-6, max_iter=20_000))

    def __post_init__(self):
        errs = []
        if self.horizon < 2:
            errs.append("horizon must be at least 2 days")
        if self.period_length < 1:
            errs.append("period_length must be positive")
        if self.cv_folds < 2:
            errs.append("cv_folds must be at least 2")
        if self.cv_folds > self.horizon:
            errs.append("cv_folds cannot exceed horizon")
        if self.periods_per_year is not None and self.periods_per_year <= 0:
            errs.append("periods_per_year must be positive")
        if errs:
            raise ValueError("; ".join(errs))

    @property
    def per_period_risk_free(self) -> float:
        ppy = self.periods_per_year or TRADING_DAYS / self.period_length
        return self.risk_free_rate / ppy


@dataclass(frozen=True)
class RealizedStats:
    p_bar: float
    r: float
    sharpe: float


@dataclass
class BacktestReport:
    strategy: str
    weights: np.ndarray  # T x p
    period_returns: np.ndarray  # net of costs when a cost model is set
    gross_returns: np.ndarray
    realized_return: float
    realized_risk: float
    sharpe: float  # nan when the realized risk is zero
    short_side: np.ndarray
    cumulative_wealth: np.ndarray  # length T + 1, starting at 1
    selected: list = field(default_factory=list)  # (lambda1, lambda2) per period, if any


def min_variance_weights(sigma_hat_inverse) -> np.ndarray:
    """``x = Sigma^{-1} 1 / (1' Sigma^{-1} 1)``."""
    K = np.asarray(sigma_hat_inverse, dtype=np.float64)
    u = K @ np.ones(K.shape[0])
    total = float(u.sum())
    if abs(total) < 1e-12:
        raise DegenerateAllocation(f"normalizer 1' K 1 = {total:.3g} is too close to zero")
    return u / total


def realized_statistics(weights, price_changes, p_free: float, sharpe: bool = True) -> RealizedStats:
    """Mean period return, population standard deviation and Sharpe ratio.

    ``weights`` and ``price_changes`` are ``T x p``; period ``t`` earns
    ``weights[t] @ price_changes[t]``.  With ``sharpe=False`` a zero risk
    gives ``sharpe = nan`` instead of raising :class:`ZeroRisk`.
    """
    X = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    Pc = np.atleast_2d(np.asarray(price_changes, dtype=np.float64))
    return statistics_from_returns(np.einsum("ij,ij->i", X, Pc), p_free, sharpe)


def statistics_from_returns(period_returns, p_free: float, sharpe: bool = True) -> RealizedStats:
    ret = np.asarray(period_returns, dtype=np.float64).ravel()
    if ret.size < 1:
        raise ValueError("need at least one period")
    p_bar = float(ret.mean())
    r = float(np.sqrt(np.mean((ret - p_bar) ** 2)))
    if r == 0.0:
        if sharpe:
            raise ZeroRisk("realized risk is zero; Sharpe ratio undefined")
        return RealizedStats(p_bar, r, math.nan)
    return RealizedStats(p_bar, r, (p_bar - p_free) / r)


def short_side_size(x) -> float:
    """Short exposure as a percentage of gross exposure."""
    x = np.asarray(x, dtype=np.float64)
    gross = float(np.abs(x).sum())
    if gross == 0.0:
        raise ZeroPortfolio("portfolio has no positions")
    return 100.0 * float(np.abs(np.minimum(x, 0.0)).sum()) / gross


def period_bounds(n_returns: int, horizon: int, period_length: int) -> list:
    """``(window_start, period_start, period_end)`` in return-row indices."""
    count = (n_returns - horizon) // period_length
    if count < 1:
        raise InsufficientHistory(
            f"{n_returns} daily returns cannot cover a {horizon}-day horizon plus one {period_length}-day period"
        )
    out = []
    for t in range(count):
        s = horizon + t * period_length
        out.append((s - horizon, s, s + period_length))
    return out


def _window_grid(X, config: BacktestConfig, strategy: str) -> LambdaGrid:
    if config.grid is not None:
        if strategy == "concord":
            return LambdaGrid(config.grid.lambda1_seq, (0.0,))
        return config.grid
    S = sample_covariance(X)
    l2 = (0.0,) if strategy == "concord" else config.lambda2_seq
    g = geometric_grid(S, X.n, l2, num=config.n_lambda1, min_ratio=config.lambda1_min_ratio)
    return g


def estimate_precision(window, config: BacktestConfig, strategy: str):
    """Precision-matrix estimate from one window of daily returns.

    Returns ``(K, (lambda1, lambda2) or None)``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    X = center_columns(window)
    p = X.p
    if strategy == "identity":
        return np.eye(p), None
    if strategy == "sample":
        return spd_inverse(sample_covariance(X)), None
    rms = float(np.sqrt(np.mean(X.values ** 2)))
    if rms > 0:
        X = center_columns(X.values / rms)
    grid = _window_grid(X, config, strategy)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sel = kfold_cv_select(X, grid, config.cv_folds, config.solver)
    return sel.best_estimate.omega, (sel.best_lambda1, sel.best_lambda2)


def run_backtest(prices: PriceSeries, config: BacktestConfig, strategy: str = "pseudonet") -> BacktestReport:
    R = simple_returns(prices)
    bounds = period_bounds(R.shape[0], config.horizon, config.period_length)
    T, p = len(bounds), prices.p
    W = np.empty((T, p))
    gross = np.empty(T)
    net = np.empty(T)
    shorts = np.empty(T)
    selected = []
    prev = np.zeros(p)
    cm = config.cost_model
    for t, (w0, s, e) in enumerate(bounds):
        try:
            K, lams = estimate_precision(R[w0:s], config, strategy)
            x = min_variance_weights(K)
        except Exception as exc:
            annotate(exc, f"period {t} (return rows {s}..{e - 1})")
            raise
        selected.append(lams)
        period_change = np.prod(1.0 + R[s:e], axis=0) - 1.0
        W[t] = x
        gross[t] = float(x @ period_change)
        cost = 0.0
        if cm is not None:
            short = float(np.abs(np.minimum(x, 0.0)).sum())
            cost = cm.borrow_apr * config.period_length / CALENDAR_DAYS * short + cm.txn_rate * float(np.abs(x - prev).sum())
        net[t] = gross[t] - cost
        shorts[t] = short_side_size(x)
        prev = x
    wealth = np.concatenate([[1.0], np.cumprod(1.0 + net)])
    stats = statistics_from_returns(net, config.per_period_risk_free, sharpe=False)
    return BacktestReport(strategy, W, net, gross, stats.p_bar, stats.r, stats.sharpe, shorts, wealth, selected)


def _parse_date(cell: str):
    cell = cell.strip()
    try:
        return _dt.date.fromisoformat(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return None


def read_price_csv(path) -> PriceSeries:
    """Closing prices: a header row, then ``date, price_1, ..., price_p`` per day.

    Dates are ISO ``YYYY-MM-DD`` or plain numbers (day indices).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one price row")
    header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}: need a date column and at least one asset column")
    names = tuple(h.strip() for h in header[1:])
    dates, vals = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} columns, expected {len(header)}")
        d = _parse_date(row[0])
        if d is None:
            raise DataError(f"{path}: row {i}, column 1: cannot parse date {row[0]!r}")
        dates.append(d)
        out = []
        for j, cell in enumerate(row[1:], start=2):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {j}: cannot parse {cell!r}") from None
            if not math.isfinite(x) or x <= 0:
                raise DataError(f"{path}: row {i}, column {j}: price must be positive and finite, got {cell!r}")
            out.append(x)
        vals.append(out)
    if len({type(d) for d in dates}) > 1:
        raise DataError(f"{path}: mixed date formats")
    try:
        return PriceSeries(tuple(dates), np.array(vals), names)
    except DataError as exc:
        annotate(exc, str(path))
        raise


def write_price_csv(path, prices: PriceSeries) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *prices.asset_names])
        for d, row in zip(prices.dates, prices.prices):
            w.writerow([d.isoformat() if hasattr(d, "isoformat") else repr(d), *(repr(float(x)) for x in row)])


def write_report_csv(path, report: BacktestReport) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "return", "short_side", "wealth"])
        for t in range(len(report.period_returns)):
            w.writerow([t, repr(float(report.period_returns[t])), repr(float(report.short_side[t])), repr(float(report.cumulative_wealth[t + 1]))])


def write_summary_json(path, report: BacktestReport, **extra) -> None:
    def num(x):
        return None if not math.isfinite(x) else float(x)

    summary = {
        "strategy": report.strategy,
        "periods": int(len(report.period_returns)),
        "p_bar": num(report.realized_return),
        "r": num(report.realized_risk),
        "sharpe": num(report.sharpe),
        "final_wealth": num(float(report.cumulative_wealth[-1])),
        **extra,
    }
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
