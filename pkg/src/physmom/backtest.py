"""Overlapping-cohort accounting and zero-cost return series.

Timing
------
A cohort formed at grid position ``n`` is entered at the open (daily) or
close (other timescales) of ``grid[n]`` and is marked to the close of every
calendar day until ``grid[n + K]``, where it is liquidated. Period ``t``
runs from the close of ``grid[t-1]`` to the close of ``grid[t]``; its
zero-cost return is the mean over active cohorts of (long leg return -
short leg return) over the period, each leg valued on its own drifted
weights. If data continues past the last formation date, one terminal
period ends on the final calendar date.

A symbol whose bars stop mid-hold is closed at its last available close;
the proceeds sit in cash for the rest of the holding period.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import date
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .data import AssetPanel
from .errors import BacktestError, ConfigError
from .portfolio import (
    Cohort,
    Direction,
    StrategyConfig,
    formation_scores,
    liquidation_index,
    rank_order,
)

log = logging.getLogger(__name__)


@lru_cache(maxsize=16)
def _next_missing(panel: AssetPanel) -> np.ndarray:
    """(T+1, S) array: first calendar index >= t whose bar is missing (T if none)."""
    t, s = panel.present.shape
    out = np.full((t + 1, s), t, dtype=np.int64)
    for i in range(t - 1, -1, -1):
        out[i] = np.where(panel.present[i], out[i + 1], i)
    return out


@dataclass(frozen=True, eq=False)
class Basket:
    """One leg of a cohort, valued relative to its entry (value 1 at entry)."""

    idx: np.ndarray
    weight: np.ndarray
    entry: np.ndarray
    cut: np.ndarray
    frozen: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_scale", self.weight / self.entry)
        object.__setattr__(self, "_first_cut", int(self.cut.min()))

    def values(self, close: np.ndarray, days: np.ndarray) -> np.ndarray:
        px = close[days[:, None], self.idx]
        if days[-1] >= self._first_cut:
            px = np.where(days[:, None] < self.cut, px, self.frozen)
        return px @ self._scale


def open_basket(panel: AssetPanel, idx, weight, entry_index: int, price_field: str) -> Basket:
    idx = np.asarray(idx, dtype=np.int64)
    weight = np.abs(np.asarray(weight, dtype=float))
    weight = weight / weight.sum()
    prices = panel.open if price_field == "open" else panel.close
    entry = prices[entry_index, idx]
    if not np.all(np.isfinite(entry)):
        raise BacktestError("basket symbol has no entry price")
    cut = _next_missing(panel)[entry_index + 1, idx]
    frozen = panel.close[cut - 1, idx]
    return Basket(idx, weight, entry, cut, frozen)


@dataclass(frozen=True, eq=False)
class OpenCohort:
    formation: int
    liquidation: int
    long: Basket
    short: Basket
    long_is_winner: bool
    long_value: float = 1.0
    short_value: float = 1.0


def open_cohort(panel: AssetPanel, cohort: Cohort) -> OpenCohort:
    """Capture entry prices for a :class:`Cohort`."""
    cal = panel.calendar
    e = cal.index_of(cohort.formation_date)
    pos = {s: j for j, s in enumerate(panel.symbols)}

    def leg(basket):
        return open_basket(panel, [pos[s] for s, _ in basket], [float(w) for _, w in basket],
                           e, cohort.entry_price_field)

    return OpenCohort(e, cal.index_of(cohort.liquidation_date), leg(cohort.long_basket),
                      leg(cohort.short_basket), cohort.direction is Direction.TRADITIONAL)


@dataclass(frozen=True)
class CohortLedger:
    """Cohorts held at the last mark (calendar index ``mark``)."""

    mark: int
    cohorts: tuple[OpenCohort, ...] = ()

    def __len__(self) -> int:
        return len(self.cohorts)


@dataclass(frozen=True, eq=False)
class PeriodMark:
    """Marks of one period, one entry per calendar day after the previous mark.

    Paths are returns accumulated since the previous mark, averaged over the
    ``active`` cohorts; the last element is the period return.
    """

    days: np.ndarray
    active: int
    path: np.ndarray
    winner_path: np.ndarray
    loser_path: np.ndarray

    @property
    def period_return(self) -> float:
        return float(self.path[-1])

    @property
    def winner_return(self) -> float:
        return float(self.winner_path[-1])

    @property
    def loser_return(self) -> float:
        return float(self.loser_path[-1])


def _step(ledger: CohortLedger, new: OpenCohort | None, panel: AssetPanel, idx: int):
    if idx < ledger.mark:
        raise BacktestError("marks must move forward in time")
    mark = None
    kept = ledger.cohorts
    if idx > ledger.mark:
        days = np.arange(ledger.mark + 1, idx + 1)
        n = len(days)
        acc = np.zeros(n)
        acc_w = np.zeros(n)
        acc_l = np.zeros(n)
        kept = []
        for c in ledger.cohorts:
            lv = c.long.values(panel.close, days)
            sv = c.short.values(panel.close, days)
            lr = lv / c.long_value - 1.0
            sr = sv / c.short_value - 1.0
            acc += lr - sr
            if c.long_is_winner:
                acc_w += lr
                acc_l += sr
            else:
                acc_w += sr
                acc_l += lr
            if c.liquidation > idx:
                kept.append(replace(c, long_value=float(lv[-1]), short_value=float(sv[-1])))
        active = len(ledger.cohorts)
        if active:
            acc /= active
            acc_w /= active
            acc_l /= active
        mark = PeriodMark(days, active, acc, acc_w, acc_l)
    if new is not None:
        kept = (*kept, new)
    return CohortLedger(idx, tuple(kept)), mark


def step_ledger(
    ledger: CohortLedger,
    new_cohort: Cohort | OpenCohort | None,
    panel: AssetPanel,
    grid_date: date,
) -> tuple[CohortLedger, PeriodMark | None]:
    """Mark open cohorts to ``grid_date``, close those due, then add ``new_cohort``.

    Returns the new ledger and the period's marks (None when no time has
    passed since the previous mark).
    """
    if isinstance(new_cohort, Cohort):
        new_cohort = open_cohort(panel, new_cohort)
    return _step(ledger, new_cohort, panel, panel.calendar.index_of(grid_date))


def basket_return(
    basket: Iterable[tuple[str, float]],
    panel: AssetPanel,
    from_date: date,
    to_date: date,
    price_field: str = "close",
) -> float:
    """Weighted simple return from ``price_field`` at ``from_date`` to the close at ``to_date``.

    Weights enter by absolute value, normalised to sum to one. Symbols
    without an entry price are left out.
    """
    pos = {s: j for j, s in enumerate(panel.symbols)}
    items = [(pos[s], abs(float(w))) for s, w in basket]
    e = panel.calendar.index_of(from_date)
    t = panel.calendar.index_of(to_date)
    if t < e:
        raise BacktestError("to_date precedes from_date")
    prices = panel.open if price_field == "open" else panel.close
    items = [(j, w) for j, w in items if np.isfinite(prices[e, j])]
    if not items:
        raise BacktestError(f"no basket symbol has a price on {from_date}")
    b = open_basket(panel, [j for j, _ in items], [w for _, w in items], e, price_field)
    return float(b.values(panel.close, np.array([t]))[0] - 1.0)


@dataclass(frozen=True, eq=False)
class BacktestResult:
    """Zero-cost return series and wealth curves for one configuration.

    ``wealth`` is indexed like ``wealth_dates``: the start date (first
    formation, wealth 1) followed by each period end. ``daily_*`` curves mark
    every calendar day and coincide with the period curves on period ends.
    """

    config: StrategyConfig
    period_dates: np.ndarray
    period_returns: np.ndarray
    winner_returns: np.ndarray
    loser_returns: np.ndarray
    active: np.ndarray
    wealth_dates: np.ndarray
    wealth: np.ndarray
    daily_dates: np.ndarray
    daily_wealth: np.ndarray
    daily_winner: np.ndarray
    daily_loser: np.ndarray
    skipped: tuple[date, ...] = ()
    halted: bool = False
    cohorts: tuple[Cohort, ...] = ()

    @property
    def final_wealth(self) -> float:
        return float(self.wealth[-1])


def _materialize(panel, config, date_idx, liq, long_idx, short_idx) -> Cohort:
    def side(idx, sign):
        w = Fraction(sign, len(idx))
        return tuple(sorted((panel.symbols[j], w) for j in idx))

    cal = panel.calendar
    return Cohort(cal.dates[date_idx], cal.dates[liq], side(long_idx, 1), side(short_idx, -1),
                  config.entry_field, config.direction)


def run_backtest(panel: AssetPanel, config: StrategyConfig, keep_cohorts: bool = False) -> BacktestResult:
    """Run one configuration over the whole panel.

    Raises ConfigError when the panel is too short for the lookback, and
    BacktestError when no formation date has at least ``config.groups``
    eligible symbols.
    """
    grid, scores = formation_scores(panel, config)
    n_dates = panel.n_dates
    first = config.J + config.lag
    marks = [int(g) for g in grid]
    if marks and marks[-1] < n_dates - 1:
        marks.append(n_dates - 1)
    if first >= len(grid) or first + 1 >= len(marks):
        raise ConfigError(
            f"insufficient history: {len(grid)} {config.timescale.value} formation dates "
            f"for J={config.J}"
        )
    order, counts = rank_order(scores)
    G = config.groups
    start = next((n for n in range(first, len(grid)) if counts[n] >= G), None)
    if start is None:
        raise BacktestError(f"no formation date has {G} eligible symbols")

    traditional = config.direction is Direction.TRADITIONAL
    cal = panel.calendar
    ledger = CohortLedger(marks[start])
    skipped: list[date] = []
    cohorts: list[Cohort] = []
    periods: list[PeriodMark] = []
    halted = False
    for n in range(start, len(marks)):
        new = None
        if n < len(grid):
            cnt = int(counts[n])
            if cnt >= G:
                base, extra = divmod(cnt, G)
                losers = order[n, : base + (extra > 0)]
                winners = order[n, cnt - base: cnt]
                long_idx, short_idx = (winners, losers) if traditional else (losers, winners)
                liq = liquidation_index(grid, n, config.K, n_dates)
                e = marks[n]
                new = OpenCohort(
                    e, liq,
                    open_basket(panel, long_idx, np.ones(len(long_idx)), e, config.entry_field),
                    open_basket(panel, short_idx, np.ones(len(short_idx)), e, config.entry_field),
                    traditional,
                )
                if keep_cohorts:
                    cohorts.append(_materialize(panel, config, e, liq, long_idx, short_idx))
            else:
                skipped.append(cal.dates[marks[n]])
                log.info("%s: formation on %s skipped (%d eligible < %d groups)",
                         config.slug, cal.dates[marks[n]], cnt, G)
        ledger, mark = _step(ledger, new, panel, marks[n])
        if mark is not None:
            periods.append(mark)
            if mark.period_return <= -1.0:
                log.warning("%s: period ending %s lost %.1f%%, run halted",
                            config.slug, cal.dates[marks[n]], -100 * mark.period_return)
                halted = True
                break
    if not periods:
        raise ConfigError(f"insufficient history after the first formation for {config.slug}")
    return _assemble(panel, config, marks[start], periods, tuple(skipped), halted, tuple(cohorts))


def _assemble(panel, config, start, periods, skipped, halted, cohorts) -> BacktestResult:
    days = panel.calendar.days
    ends = np.array([p.days[-1] for p in periods])
    r_p = np.array([p.period_return for p in periods])
    r_w = np.array([p.winner_return for p in periods])
    r_l = np.array([p.loser_return for p in periods])
    curves = []
    for attr in ("path", "winner_path", "loser_path"):
        level = 1.0
        pieces = [np.ones(1)]
        for p in periods:
            piece = level * (1.0 + getattr(p, attr))
            pieces.append(piece)
            level = float(piece[-1])
        curves.append(np.concatenate(pieces))
    daily_idx = np.concatenate([[start]] + [p.days for p in periods])
    wealth = np.concatenate([[1.0], np.cumprod(1.0 + r_p)])
    return BacktestResult(
        config=config,
        period_dates=days[ends],
        period_returns=r_p,
        winner_returns=r_w,
        loser_returns=r_l,
        active=np.array([p.active for p in periods]),
        wealth_dates=days[np.concatenate([[start], ends])],
        wealth=wealth,
        daily_dates=days[daily_idx],
        daily_wealth=curves[0],
        daily_winner=curves[1],
        daily_loser=curves[2],
        skipped=skipped,
        halted=halted,
        cohorts=cohorts,
    )
