"""Monthly statistics, risk measures and CAPM fit for backtest results.

Reports carry percentages (monthly mean, std, VaR, drawdown, alpha) the
way the result tables are laid out; the helper functions below work in
plain fractions.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from datetime import date
from typing import Sequence

import numpy as np

from .backtest import BacktestResult
from .data import TradingCalendar
from .errors import BacktestError
from .portfolio import StrategyConfig, Timescale

# years dropped from the start of the data for each timescale family
WARMUP_YEARS = {Timescale.DAY: 0, Timescale.WEEK: 0, Timescale.MONTH: 1, Timescale.YEAR: 3}


def monthly_returns(dates, wealth) -> tuple[np.ndarray, np.ndarray]:
    """Calendar-month returns from a wealth curve.

    Each month's return is the last wealth in the month over the last
    wealth of the previous month, minus one. The first month has no base and
    is dropped. Returns (months as datetime64[M], returns).
    """
    days = np.asarray(dates, dtype="datetime64[D]")
    w = np.asarray(wealth, dtype=float)
    if len(days) != len(w) or len(w) == 0:
        raise ValueError("dates and wealth must be equal-length and non-empty")
    months = days.astype("datetime64[M]")
    last = np.flatnonzero(np.append(months[1:] != months[:-1], True))
    if len(last) < 2:
        raise BacktestError("need at least two calendar months of wealth")
    ends = w[last]
    return months[last][1:], ends[1:] / ends[:-1] - 1.0


def max_drawdown(wealth) -> float:
    """Most negative (W_t - running peak) / running peak, as a fraction <= 0."""
    w = np.asarray(wealth, dtype=float)
    if len(w) == 0:
        raise ValueError("empty wealth curve")
    peak = np.maximum.accumulate(w)
    return float(min(0.0, ((w - peak) / peak).min()))


def value_at_risk(returns, level: float = 0.95) -> float:
    """Historical VaR as a positive loss: minus the nearest-rank lower quantile.

    With n returns the k-th smallest is used, k = ceil((1 - level) * n).
    """
    r = np.sort(np.asarray(returns, dtype=float))
    if len(r) == 0:
        raise ValueError("no returns")
    # round away float noise such as (1 - 0.95) * 20 = 1.0000000000000009
    k = max(1, math.ceil(round((1.0 - level) * len(r), 9)))
    return float(-r[k - 1])


def sharpe_ratio(returns, rf: float = 0.0) -> float | None:
    """(mean - rf) / sample std of per-period returns, unannualised. None if std is zero."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 2:
        return None
    sd = r.std(ddof=1)
    if sd == 0:
        return None
    return float((r.mean() - rf) / sd)


def capm(portfolio, benchmark, rf: float = 0.0) -> tuple[float, float]:
    """OLS of excess portfolio returns on excess benchmark returns -> (alpha, beta)."""
    y = np.asarray(portfolio, dtype=float) - rf
    x = np.asarray(benchmark, dtype=float) - rf
    if len(x) != len(y) or len(x) < 2:
        raise BacktestError("CAPM needs two or more aligned observations")
    if np.ptp(x) == 0:
        raise BacktestError("benchmark returns are constant; beta undefined")
    design = np.column_stack([np.ones_like(x), x])
    (alpha, beta), *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(alpha), float(beta)


def benchmark_window(config: StrategyConfig | Timescale | str, calendar: TradingCalendar) -> tuple[date, date]:
    """Evaluation window for a timescale family.

    Monthly strategies skip the first year of data and yearly strategies the
    first three, so every lookback has been filled before evaluation starts.
    """
    ts = config.timescale if isinstance(config, StrategyConfig) else Timescale(config)
    dates = calendar.dates
    first_year = dates[0].year + WARMUP_YEARS[ts]
    start = next((d for d in dates if d.year >= first_year), dates[-1])
    return start, dates[-1]


@dataclass(frozen=True)
class RiskReport:
    """Statistics over one window. Percent fields are already multiplied by 100."""

    monthly_mean: float
    monthly_std: float
    final_wealth: float
    sharpe: float | None
    var95: float
    mdd: float
    capm_alpha: float | None
    capm_beta: float | None
    window_start: date
    window_end: date
    n_months: int
    winner_mean: float | None = None
    winner_std: float | None = None
    loser_mean: float | None = None
    loser_std: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window_start"] = self.window_start.isoformat()
        d["window_end"] = self.window_end.isoformat()
        return d


def _clip(dates, values, start: date, end: date):
    days = np.asarray(dates, dtype="datetime64[D]")
    keep = (days >= np.datetime64(start, "D")) & (days <= np.datetime64(end, "D"))
    return days[keep], np.asarray(values, dtype=float)[keep]


def _mean_std(r: np.ndarray) -> tuple[float, float]:
    return float(100 * r.mean()), float(100 * r.std(ddof=1)) if len(r) > 1 else float("nan")


def curve_report(
    dates,
    wealth,
    benchmark_dates=None,
    benchmark_values=None,
    rf: float = 0.0,
    window: tuple[date, date] | None = None,
    period_returns=None,
) -> RiskReport:
    """RiskReport for any wealth curve, optionally against a benchmark curve.

    ``period_returns`` switches the Sharpe ratio from monthly returns to the
    supplied per-period returns.
    """
    days = np.asarray(dates, dtype="datetime64[D]")
    if window is None:
        window = (days[0].item(), days[-1].item())
    start = max(window[0], days[0].item())
    end = min(window[1], days[-1].item())
    d, w = _clip(days, wealth, start, end)
    if len(d) == 0:
        raise BacktestError(f"no wealth observations inside {window[0]}..{window[1]}")
    months, r = monthly_returns(d, w)
    mean, sd = _mean_std(r)
    sharpe = sharpe_ratio(r if period_returns is None else period_returns, rf)
    alpha = beta = None
    if benchmark_dates is not None:
        bd, bw = _clip(benchmark_dates, benchmark_values, start, end)
        ok = np.isfinite(bw)
        if ok.sum() >= 1:
            try:
                bm, br = monthly_returns(bd[ok], bw[ok])
                common, ip, ib = np.intersect1d(months, bm, return_indices=True)
                a, b = capm(r[ip], br[ib], rf)
                alpha, beta = 100 * a, b
            except BacktestError:
                pass
    return RiskReport(
        monthly_mean=mean,
        monthly_std=sd,
        final_wealth=float(w[-1] / w[0]),
        sharpe=sharpe,
        var95=100 * value_at_risk(r),
        mdd=100 * max_drawdown(w),
        capm_alpha=alpha,
        capm_beta=beta,
        window_start=d[0].item(),
        window_end=d[-1].item(),
        n_months=len(r),
    )


def risk_report(
    result: BacktestResult,
    benchmark_dates: Sequence | np.ndarray,
    benchmark_values: Sequence[float] | np.ndarray,
    rf: float = 0.0,
    window: tuple[date, date] | None = None,
    sharpe_mode: str = "monthly",
) -> RiskReport:
    """Reduce a backtest to its RiskReport over ``window`` (default: whole result).

    ``sharpe_mode`` is ``"monthly"`` (Sharpe of monthly returns) or
    ``"period"`` (Sharpe of the per-grid-date zero-cost returns). Drawdown
    uses the daily-marked curve.
    """
    if sharpe_mode not in ("monthly", "period"):
        raise ValueError("sharpe_mode must be 'monthly' or 'period'")
    period = None
    if sharpe_mode == "period":
        lo = np.datetime64(window[0], "D") if window else result.period_dates[0]
        hi = np.datetime64(window[1], "D") if window else result.period_dates[-1]
        keep = (result.period_dates > lo) & (result.period_dates <= hi)
        period = result.period_returns[keep]
    rep = curve_report(result.daily_dates, result.daily_wealth, benchmark_dates,
                       benchmark_values, rf, window, period)
    span = (rep.window_start, rep.window_end)
    extra = {}
    for side, curve in (("winner", result.daily_winner), ("loser", result.daily_loser)):
        d, w = _clip(result.daily_dates, curve, *span)
        _, r = monthly_returns(d, w)
        extra[f"{side}_mean"], extra[f"{side}_std"] = _mean_std(r)
    return RiskReport(**{**asdict(rep), **extra})
