import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from physmom.analytics import (
    benchmark_window,
    capm,
    curve_report,
    max_drawdown,
    monthly_returns,
    risk_report,
    sharpe_ratio,
    value_at_risk,
)
from physmom.backtest import run_backtest
from physmom.data import TradingCalendar, benchmark_series
from physmom.errors import BacktestError
from physmom.portfolio import StrategyConfig
from physmom.synthetic import business_days


def brute_mdd(w):
    worst = 0.0
    for t in range(len(w)):
        for s in range(t + 1):
            worst = min(worst, (w[t] - w[s]) / w[s])
    return worst


def days(n, start=date(2014, 1, 1)):
    return np.array(business_days(start, n), dtype="datetime64[D]")


def test_flat_wealth_has_zero_monthly_returns():
    d = days(100)
    _, r = monthly_returns(d, np.ones(100))
    assert np.all(r == 0.0) and len(r) == 4


def test_doubling_each_month():
    d = days(130)
    months = d.astype("datetime64[M]")
    w = 2.0 ** (months - months[0]).astype(int)
    # W doubles at each month's first day; month-end to month-end is exactly x2
    _, r = monthly_returns(d, w)
    assert np.all(r == 1.0)


def test_geometric_path_matches_closed_form():
    d = days(300)
    g = 0.001
    w = np.exp(g * np.arange(300))
    m, r = monthly_returns(d, w)
    ends = [np.flatnonzero(d.astype("datetime64[M]") == x)[-1] for x in np.unique(d.astype("datetime64[M]"))]
    expect = [math.exp(g * (b - a)) - 1 for a, b in zip(ends, ends[1:])]
    np.testing.assert_allclose(r, expect, rtol=1e-12)
    assert len(m) == len(expect)


def test_single_month_is_an_error():
    with pytest.raises(BacktestError):
        monthly_returns(days(10), np.ones(10))


def test_mdd_examples():
    assert max_drawdown([1, 1.1, 1.2, 1.5]) == 0.0
    assert max_drawdown([1, 1.2, 0.9, 1.1]) == pytest.approx(-0.25, abs=1e-15)
    assert max_drawdown([1, 1.2, 0.9, 1.1]) == pytest.approx(brute_mdd([1, 1.2, 0.9, 1.1]), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=40))
def test_mdd_matches_brute_force(rets):
    w = np.cumprod(np.concatenate([[1.0], 1 + np.array(rets)]))
    assert max_drawdown(w) == pytest.approx(brute_mdd(w), abs=1e-12)


def test_var_nearest_rank():
    r = np.arange(1, 21) / 100 - 0.05  # -0.04 .. 0.15
    assert value_at_risk(r) == pytest.approx(0.04)
    r = np.linspace(-0.1, 0.1, 21)
    # k = ceil(1.05) = 2
    assert value_at_risk(r) == pytest.approx(0.09)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=60), st.floats(0.1, 10))
def test_scaling_properties(rets, c):
    r = np.array(rets)
    sr = sharpe_ratio(r)
    assert value_at_risk(c * r) == pytest.approx(c * value_at_risk(r), rel=1e-9, abs=1e-12)
    if sr is not None and r.std(ddof=1) > 1e-9:
        assert sharpe_ratio(c * r) == pytest.approx(sr, rel=1e-9)


def test_sharpe_undefined_for_constant_returns():
    assert sharpe_ratio([0.01, 0.01, 0.01]) is None
    assert sharpe_ratio([0.01]) is None
    assert sharpe_ratio([0.01, 0.03], rf=0.01) == pytest.approx(0.01 / math.sqrt(2e-4))


def test_capm_exact_linear_model():
    rng = np.random.default_rng(0)
    b = rng.normal(0.01, 0.05, 50)
    alpha, beta = capm(2 * b, b)
    assert beta == pytest.approx(2.0, abs=1e-12) and alpha == pytest.approx(0.0, abs=1e-12)
    alpha, beta = capm(0.003 + 0.7 * (b - 0.001) + 0.001, b, rf=0.001)
    assert alpha == pytest.approx(0.003, abs=1e-12) and beta == pytest.approx(0.7, abs=1e-12)


def test_capm_residuals_orthogonal():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=40), rng.normal(size=40)
    a, b = capm(y, x)
    resid = y - a - b * x
    assert abs(resid @ x) < 1e-8 and abs(resid.sum()) < 1e-8
    with pytest.raises(BacktestError):
        capm(y, np.ones(40))


def test_benchmark_windows():
    cal = TradingCalendar(business_days(date(2014, 1, 1), 8 * 261))
    assert benchmark_window("month", cal)[0] == date(2015, 1, 1)
    assert benchmark_window("year", cal)[0] == date(2017, 1, 2)
    assert benchmark_window("day", cal) == (cal.dates[0], cal.dates[-1])
    assert benchmark_window("week", cal)[1] == cal.dates[-1]
    c = StrategyConfig("p1", "turnover", "year", 2, 1)
    assert benchmark_window(c, cal)[0].year == 2017


def test_curve_report_known_path():
    d = days(70)
    w = np.concatenate([np.full(23, 1.0), np.full(22, 1.2), np.full(25, 0.9)])
    rep = curve_report(d, w)
    assert rep.mdd == pytest.approx(-25.0)
    assert rep.final_wealth == pytest.approx(0.9)
    assert rep.n_months == 3
    assert rep.capm_alpha is None


def test_risk_report_on_backtest(long_dataset):
    panel = long_dataset[2]
    c = StrategyConfig("p2", "turnover", "month", 3, 2, groups=5)
    res = run_backtest(panel, c)
    bd, bc = benchmark_series(panel)
    window = benchmark_window(c, panel.calendar)
    rep = risk_report(res, bd, bc, window=window)
    assert rep.window_start >= window[0]
    assert rep.mdd <= 0 and rep.final_wealth > 0
    assert rep.capm_beta is not None
    keep = res.wealth_dates >= np.datetime64(rep.window_start)
    assert rep.final_wealth == pytest.approx(res.wealth[-1] / res.wealth[keep][0], rel=1e-12)
    d = rep.to_dict()
    assert d["window_start"] == rep.window_start.isoformat()
    per = risk_report(res, bd, bc, window=window, sharpe_mode="period")
    assert per.sharpe != rep.sharpe and per.monthly_mean == rep.monthly_mean
