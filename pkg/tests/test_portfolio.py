import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pseudonet.errors import DataError, DegenerateAllocation, InsufficientHistory, ZeroPortfolio, ZeroRisk
from pseudonet.portfolio import (
    BacktestConfig,
    CostModel,
    PriceSeries,
    min_variance_weights,
    period_bounds,
    prices_from_returns,
    read_price_csv,
    realized_statistics,
    run_backtest,
    short_side_size,
    simple_returns,
    statistics_from_returns,
    write_price_csv,
    write_report_csv,
    write_summary_json,
)

from conftest import random_spd
from oracles import naive_realized_risk


def test_weight_examples():
    np.testing.assert_array_equal(min_variance_weights(np.eye(4)), [0.25] * 4)
    np.testing.assert_allclose(min_variance_weights(np.diag([1.0, 0.25])), [0.8, 0.2], rtol=1e-15)


def test_degenerate_allocation():
    with pytest.raises(DegenerateAllocation):
        min_variance_weights(np.array([[1.0, -1.0], [-1.0, 1.0]]))


@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
@settings(max_examples=50)
def test_weights_sum_to_one_and_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    K = random_spd(rng, int(rng.integers(2, 12)))
    x = min_variance_weights(K)
    assert abs(x.sum() - 1.0) < 1e-10
    np.testing.assert_allclose(min_variance_weights(c * K), x, rtol=1e-9, atol=1e-12)


def test_realized_examples():
    s = realized_statistics([[1.0], [1.0]], [[1.0], [-1.0]], 0.05)
    assert (s.p_bar, s.r, s.sharpe) == (0.0, 1.0, -0.05)
    with pytest.raises(ZeroRisk):
        statistics_from_returns([0.3, 0.3, 0.3], 0.01)
    one = statistics_from_returns([0.2], 0.0, sharpe=False)
    assert one.r == 0.0 and np.isnan(one.sharpe)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=40))
@settings(max_examples=100)
def test_realized_risk_matches_naive(rets):
    got = statistics_from_returns(rets, 0.0, sharpe=False).r
    assert got == pytest.approx(naive_realized_risk(rets), abs=1e-12)


def test_short_side():
    assert short_side_size([0.5, 0.5]) == 0.0
    assert short_side_size([1.5, -0.5]) == 25.0
    assert short_side_size([-0.5, 1.5]) == 25.0
    with pytest.raises(ZeroPortfolio):
        short_side_size([0.0, 0.0])


def test_period_bounds():
    assert period_bounds(50, 10, 20) == [(0, 10, 30), (20, 30, 50)]
    with pytest.raises(InsufficientHistory):
        period_bounds(25, 10, 20)


def test_returns_roundtrip(rng):
    R = rng.normal(0, 0.01, (30, 3))
    np.testing.assert_allclose(simple_returns(prices_from_returns(R)), R, atol=1e-14)


# -- backtests ---------------------------------------------------------------------

def fast_config(**kw):
    base = dict(horizon=40, period_length=10, cv_folds=4, n_lambda1=3, lambda2_seq=(1.0,))
    base.update(kw)
    return BacktestConfig(**base)


def test_zero_returns_constant_wealth():
    prices = prices_from_returns(np.zeros((80, 3)))
    for strategy in ("identity", "pseudonet"):
        rep = run_backtest(prices, fast_config(), strategy)
        np.testing.assert_array_equal(rep.cumulative_wealth, np.ones(5))


@pytest.mark.parametrize("strategy", ["identity", "sample", "pseudonet", "concord"])
def test_wealth_equals_product_and_weights_sum(strategy, rng):
    R = rng.normal(0.0005, 0.01, (100, 4))
    rep = run_backtest(prices_from_returns(R), fast_config(), strategy)
    naive = [1.0]
    for r in rep.period_returns:
        naive.append(naive[-1] * (1.0 + r))
    np.testing.assert_array_equal(rep.cumulative_wealth, naive)
    assert np.all(np.abs(rep.weights.sum(axis=1) - 1.0) < 1e-10)
    assert np.all(np.isfinite(rep.period_returns)) and np.isfinite(rep.realized_risk)
    if strategy == "identity":
        assert np.all(rep.short_side == 0.0)


def test_gross_return_formula(rng):
    R = rng.normal(0.0, 0.01, (60, 3))
    rep = run_backtest(prices_from_returns(R), fast_config(), "sample")
    t0 = 40
    period = np.prod(1 + R[t0:t0 + 10], axis=0) - 1
    assert rep.gross_returns[0] == pytest.approx(rep.weights[0] @ period, abs=1e-15)


def test_costs(rng):
    R = rng.normal(0.0, 0.01, (60, 3))
    prices = prices_from_returns(R)
    free = run_backtest(prices, fast_config(), "identity")
    costly = run_backtest(prices, fast_config(cost_model=CostModel()), "identity")
    # equal weights are all long and never change: only the opening trade costs
    assert costly.period_returns[0] == pytest.approx(free.period_returns[0] - 0.005, abs=1e-15)
    assert costly.period_returns[1] == pytest.approx(free.period_returns[1], abs=1e-15)


@pytest.mark.parametrize("strategy", ["sample", "pseudonet"])
def test_iid_identity_gives_near_equal_weights(strategy):
    R = np.random.default_rng(8).normal(0.0, 0.01, (560, 5))
    rep = run_backtest(prices_from_returns(R), BacktestConfig(horizon=500, period_length=20, cv_folds=5, n_lambda1=4, lambda2_seq=(1.0,)), strategy)
    assert np.max(np.abs(rep.weights - 0.2)) < 0.1


def test_insufficient_history(rng):
    with pytest.raises(InsufficientHistory):
        run_backtest(prices_from_returns(rng.normal(0, 0.01, (45, 3))), fast_config(), "identity")


def test_unknown_strategy(rng):
    with pytest.raises(ValueError):
        run_backtest(prices_from_returns(rng.normal(0, 0.01, (80, 3))), fast_config(), "oracle")


def test_config_validation():
    with pytest.raises(ValueError):
        BacktestConfig(horizon=10, cv_folds=20)
    assert BacktestConfig(horizon=60).per_period_risk_free == pytest.approx(0.05 * 20 / 261)


# -- files --------------------------------------------------------------------------

def test_price_series_validation():
    with pytest.raises(DataError):
        PriceSeries((1.0, 1.0), np.ones((2, 2)), ("a", "b"))
    with pytest.raises(DataError):
        PriceSeries((1.0, 2.0), np.array([[1.0, -1.0], [1.0, 1.0]]), ("a", "b"))


def test_price_csv_roundtrip_and_errors(tmp_path, rng):
    prices = prices_from_returns(rng.normal(0, 0.01, (5, 2)), names=("AAA", "BBB"))
    write_price_csv(tmp_path / "p.csv", prices)
    back = read_price_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(back.prices, prices.prices)
    assert back.dates == prices.dates and back.asset_names == ("AAA", "BBB")

    bad = tmp_path / "bad.csv"
    bad.write_text("date,a,b\n2020-01-01,1,2\n2020-01-02,1,oops\n")
    with pytest.raises(DataError, match="row 3, column 3"):
        read_price_csv(bad)
    bad.write_text("date,a\n2020-01-01,-4\n")
    with pytest.raises(DataError, match="positive"):
        read_price_csv(bad)


def test_report_writers(tmp_path, rng):
    rep = run_backtest(prices_from_returns(rng.normal(0, 0.01, (60, 3))), fast_config(), "identity")
    write_report_csv(tmp_path / "r.csv", rep)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "period,return,short_side,wealth"
    write_summary_json(tmp_path / "s.json", rep)
    rec = json.loads((tmp_path / "s.json").read_text())
    assert rec["final_wealth"] == pytest.approx(rep.cumulative_wealth[-1])
