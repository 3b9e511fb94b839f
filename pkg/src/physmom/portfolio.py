"""Strategy configuration, formation schedule, ranking and cohort construction."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .data import AssetPanel, TradingCalendar
from .errors import ConfigError, InsufficientUniverse
from .signals import MassKind, MomentumKind, StepFrame, check_pairing, step_frame, window_scores

log = logging.getLogger(__name__)


class Timescale(str, Enum):
    DAY = "day"
    WEEK = "week"
    MONTH = "month"
    YEAR = "year"


class Direction(str, Enum):
    TRADITIONAL = "traditional"
    CONTRARIAN = "contrarian"


LOOKBACKS = {
    Timescale.DAY: range(1, 8),
    Timescale.WEEK: range(2, 9),
    Timescale.MONTH: range(3, 13),
    Timescale.YEAR: range(2, 6),
}
HOLDINGS = {
    Timescale.DAY: range(1, 8),
    Timescale.WEEK: range(1, 9),
    Timescale.MONTH: range(1, 13),
    Timescale.YEAR: range(1, 4),
}
MAX_YEAR_SPAN = 8

# (momentum, mass) pairs tested on every timescale
SIGNAL_PAIRS = (
    (MomentumKind.P1, MassKind.TURNOVER),
    (MomentumKind.P1, MassKind.INV_TURNOVER),
    (MomentumKind.P2, MassKind.TURNOVER),
    (MomentumKind.P2, MassKind.INV_TURNOVER),
    (MomentumKind.P3, MassKind.INV_VOL),
)

# Portfolio count stated for the daily grid; the ranges enumerate 238.
REPORTED_DAY_COUNT = 237

DEFAULT_GROUPS = 50

_MASS_LABEL = {MassKind.TURNOVER: "υ", MassKind.INV_TURNOVER: "1/υ", MassKind.INV_VOL: "1/σ"}


@dataclass(frozen=True)
class StrategyConfig:
    momentum: MomentumKind
    mass: MassKind
    timescale: Timescale
    J: int
    K: int
    direction: Direction = Direction.TRADITIONAL
    groups: int = DEFAULT_GROUPS

    def __post_init__(self):
        try:
            for name, kind in (("momentum", MomentumKind), ("mass", MassKind),
                               ("timescale", Timescale), ("direction", Direction)):
                object.__setattr__(self, name, kind(getattr(self, name)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        check_pairing(self.momentum, self.mass)
        ts = self.timescale
        lookbacks = range(2, 8) if (ts is Timescale.DAY and self.momentum is MomentumKind.P3) else LOOKBACKS[ts]
        if self.J not in lookbacks:
            raise ConfigError(f"J={self.J} outside {lookbacks.start}..{lookbacks.stop - 1} for {ts.value}")
        if self.K not in HOLDINGS[ts]:
            raise ConfigError(f"K={self.K} outside {HOLDINGS[ts].start}..{HOLDINGS[ts].stop - 1} for {ts.value}")
        if ts is Timescale.YEAR and self.J + self.K > MAX_YEAR_SPAN:
            raise ConfigError(f"J+K={self.J + self.K} exceeds {MAX_YEAR_SPAN} years")
        if self.groups < 2:
            raise ConfigError("need at least 2 groups")

    @property
    def lag(self) -> int:
        """Grid steps between the last signal close and entry.

        Daily cohorts enter at the open, before that day's close is known.
        """
        return 1 if self.timescale is Timescale.DAY else 0

    @property
    def entry_field(self) -> str:
        return "open" if self.timescale is Timescale.DAY else "close"

    @property
    def slug(self) -> str:
        return (f"{self.timescale.value}-{self.momentum.value}-{self.mass.value}"
                f"-J{self.J}-K{self.K}-{self.direction.value}")

    @property
    def label(self) -> str:
        """Portfolio name in the p^n(mass,R) notation; * marks contrarian."""
        star = "*" if self.direction is Direction.CONTRARIAN else ""
        return f"p{star}{self.momentum.value[1]}({_MASS_LABEL[self.mass]},R)"

    def flipped(self) -> "StrategyConfig":
        other = Direction.CONTRARIAN if self.direction is Direction.TRADITIONAL else Direction.TRADITIONAL
        return StrategyConfig(self.momentum, self.mass, self.timescale, self.J, self.K, other, self.groups)


def enumerate_grid(
    timescale: Timescale | str,
    direction: Direction | str = Direction.TRADITIONAL,
    groups: int = DEFAULT_GROUPS,
) -> list[StrategyConfig]:
    """Every valid (momentum, mass, J, K) cell of one timescale, one direction."""
    ts = Timescale(timescale)
    out = []
    for momentum, mass in SIGNAL_PAIRS:
        for J in LOOKBACKS[ts]:
            if ts is Timescale.DAY and momentum is MomentumKind.P3 and J < 2:
                continue
            for K in HOLDINGS[ts]:
                if ts is Timescale.YEAR and J + K > MAX_YEAR_SPAN:
                    continue
                out.append(StrategyConfig(momentum, mass, ts, J, K, Direction(direction), groups))
    return out


def formation_indices(calendar: TradingCalendar, timescale: Timescale | str) -> np.ndarray:
    """Calendar indices of formation dates: every day, or the first trading day of each week/month/year."""
    return calendar.first_of(Timescale(timescale).value)


def formation_dates(calendar: TradingCalendar, timescale: Timescale | str) -> list[date]:
    return [calendar.dates[i] for i in formation_indices(calendar, timescale)]


@lru_cache(maxsize=16)
def _frame(panel: AssetPanel, timescale: Timescale) -> StepFrame:
    return step_frame(panel, formation_indices(panel.calendar, timescale))


def formation_scores(panel: AssetPanel, config: StrategyConfig) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices and an (N, S) score matrix, NaN where a symbol is ineligible.

    Eligible means: complete lookback window, no exclusion signal, a bar on
    the entry date, and universe membership on the formation date when a
    membership file was loaded.
    """
    frame = _frame(panel, config.timescale)
    scores = window_scores(frame, config.momentum, config.mass, config.J, config.lag)
    eligible = np.isfinite(scores) & panel.present[frame.grid]
    if panel.membership is not None:
        eligible &= panel.membership.mask(panel.symbols, panel.calendar.days[frame.grid])
    return frame.grid, np.where(eligible, scores, np.nan)


def group_bounds(n: int, groups: int) -> list[tuple[int, int]]:
    """Slice bounds of ``groups`` near-equal groups over ``n`` sorted items.

    The first ``n % groups`` groups take one extra member.
    """
    if n < groups:
        raise InsufficientUniverse(f"{n} eligible symbols for {groups} groups")
    base, extra = divmod(n, groups)
    bounds, start = [], 0
    for g in range(groups):
        stop = start + base + (1 if g < extra else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def rank_order(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending score order per row (ties by symbol position) and eligible counts."""
    keyed = np.where(np.isnan(scores), np.inf, scores)
    order = np.argsort(keyed, axis=-1, kind="stable")
    return order, np.isfinite(scores).sum(axis=-1)


@dataclass(frozen=True)
class RankedGroups:
    """Groups R1 (lowest scores, losers) through RG (highest, winners)."""

    formation_date: date
    groups: tuple[tuple[str, ...], ...]

    @property
    def loser(self) -> tuple[str, ...]:
        return self.groups[0]

    @property
    def winner(self) -> tuple[str, ...]:
        return self.groups[-1]


def rank_universe(panel: AssetPanel, config: StrategyConfig, formation_date: date) -> RankedGroups:
    """Rank the eligible universe at one formation date into ``config.groups`` groups."""
    grid, scores = formation_scores(panel, config)
    idx = panel.calendar.index_of(formation_date)
    pos = np.searchsorted(grid, idx)
    if pos >= len(grid) or grid[pos] != idx:
        raise ConfigError(f"{formation_date} is not a {config.timescale.value} formation date")
    order, counts = rank_order(scores[pos])
    bounds = group_bounds(int(counts), config.groups)
    ranked = [panel.symbols[j] for j in order[: int(counts)]]
    return RankedGroups(formation_date, tuple(tuple(ranked[a:b]) for a, b in bounds))


@dataclass(frozen=True)
class Cohort:
    """A dated dollar-neutral position set.

    Weights are exact fractions: +1/n on each long name, -1/m on each short.
    """

    formation_date: date
    liquidation_date: date
    long_basket: tuple[tuple[str, Fraction], ...]
    short_basket: tuple[tuple[str, Fraction], ...]
    entry_price_field: str
    direction: Direction = Direction.TRADITIONAL

    @property
    def weights(self) -> dict[str, Fraction]:
        return dict(self.long_basket + self.short_basket)


def _equal(symbols, sign: int) -> tuple[tuple[str, Fraction], ...]:
    w = Fraction(sign, len(symbols))
    return tuple((s, w) for s in sorted(symbols))


def liquidation_index(grid: np.ndarray, position: int, K: int, n_dates: int) -> int:
    """Calendar index at which a cohort formed at grid ``position`` is closed.

    Cohorts whose holding period runs past the last formation date are
    marked until the final calendar date.
    """
    target = position + K
    return int(grid[target]) if target < len(grid) else n_dates - 1


def build_cohort(groups: RankedGroups, config: StrategyConfig, calendar: TradingCalendar) -> Cohort:
    """Long winners / short losers (traditional) or the reverse (contrarian)."""
    if len(groups.groups) < 2 or not groups.winner or not groups.loser:
        raise ConfigError("need at least two non-empty groups")
    if set(groups.winner) & set(groups.loser):
        raise ConfigError("winner and loser groups overlap")
    if config.direction is Direction.TRADITIONAL:
        long, short = groups.winner, groups.loser
    else:
        long, short = groups.loser, groups.winner
    grid = formation_indices(calendar, config.timescale)
    pos = int(np.searchsorted(grid, calendar.index_of(groups.formation_date)))
    liq = liquidation_index(grid, pos, config.K, len(calendar))
    return Cohort(
        groups.formation_date,
        calendar.dates[liq],
        _equal(long, +1),
        _equal(short, -1),
        config.entry_field,
        config.direction,
    )
