"""Grid sweeps over every configuration of a timescale and the best-of tables."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .analytics import RiskReport, benchmark_window, risk_report
from .backtest import BacktestResult, _next_missing, run_backtest
from .data import AssetPanel, benchmark_series
from .errors import PhysmomError
from .portfolio import SIGNAL_PAIRS, Direction, StrategyConfig, Timescale, _frame, enumerate_grid

log = logging.getLogger(__name__)

GRID_COLUMNS = (
    "timescale", "momentum", "mass", "J", "K", "direction", "portfolio",
    "monthly_mean", "monthly_std", "final_wealth", "sharpe", "var95", "mdd",
    "capm_alpha", "capm_beta", "winner_mean", "winner_std", "loser_mean", "loser_std",
    "window_start", "window_end", "n_months", "halted", "error",
)
BEST_COLUMNS = ("Portfolio", "Strategy", "J-K", "Basket", "Mean", "Std. Dev.",
                "Fin. Wealth", "Sharpe", "VaR95", "MDD")


@dataclass(frozen=True)
class GridRow:
    """One configuration's outcome. ``report`` is None when the run failed."""

    config: StrategyConfig
    report: RiskReport | None
    halted: bool = False
    error: str = ""

    def as_record(self) -> dict:
        c = self.config
        rec = dict.fromkeys(GRID_COLUMNS, "")
        rec.update(timescale=c.timescale.value, momentum=c.momentum.value, mass=c.mass.value,
                   J=c.J, K=c.K, direction=c.direction.value, portfolio=c.label,
                   halted=int(self.halted), error=self.error)
        if self.report is not None:
            for k, v in self.report.to_dict().items():
                rec[k] = "" if v is None else v
        return rec


@dataclass(frozen=True)
class GridSummary:
    """All rows of a sweep plus, per timescale, the best row of each signal pair."""

    rows: tuple[GridRow, ...]
    best: dict[Timescale, tuple[GridRow, ...]] = field(default_factory=dict)

    def rows_for(self, timescale: Timescale | str) -> tuple[GridRow, ...]:
        ts = Timescale(timescale)
        return tuple(r for r in self.rows if r.config.timescale is ts)


def evaluate(panel: AssetPanel, config: StrategyConfig, rf: float = 0.0,
             sharpe_mode: str = "monthly") -> tuple[BacktestResult, RiskReport]:
    """Backtest one configuration and reduce it over its timescale's window."""
    result = run_backtest(panel, config)
    days, closes = benchmark_series(panel)
    window = benchmark_window(config, panel.calendar)
    return result, risk_report(result, days, closes, rf, window, sharpe_mode)


def _row(panel: AssetPanel, config: StrategyConfig, rf: float, sharpe_mode: str) -> GridRow:
    try:
        result, report = evaluate(panel, config, rf, sharpe_mode)
    except PhysmomError as exc:
        log.warning("%s failed: %s", config.slug, exc)
        return GridRow(config, None, error=str(exc))
    if result.halted:
        log.warning("%s halted: wealth exhausted", config.slug)
    return GridRow(config, report, halted=result.halted)


def select_best(rows: Iterable[GridRow]) -> tuple[GridRow, ...]:
    """Highest final wealth for each signal pair; ties go to the earlier row."""
    best = []
    rows = list(rows)
    for momentum, mass in SIGNAL_PAIRS:
        cands = [r for r in rows if r.report is not None and not r.halted
                 and r.config.momentum is momentum and r.config.mass is mass
                 and np.isfinite(r.report.final_wealth)]
        if cands:
            best.append(max(cands, key=lambda r: r.report.final_wealth))
    return tuple(best)


def run_grid(
    panel: AssetPanel,
    timescales: Iterable[Timescale | str],
    groups: int,
    rf: float = 0.0,
    workers: int = 1,
    sharpe_mode: str = "monthly",
    progress: Callable[[GridRow], None] | None = None,
) -> GridSummary:
    """Run both directions of every configuration of each timescale.

    Rows come back in enumeration order regardless of ``workers``.
    """
    timescales = [Timescale(t) for t in timescales]
    configs = [c for ts in timescales for d in Direction for c in enumerate_grid(ts, d, groups)]
    # fill the shared caches once so worker threads only read them
    _next_missing(panel)
    for ts in timescales:
        _frame(panel, ts)

    def task(c):
        row = _row(panel, c, rf, sharpe_mode)
        if progress is not None:
            progress(row)
        return row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(task, configs))
    else:
        rows = tuple(map(task, configs))
    summary = GridSummary(rows)
    best = {ts: select_best(summary.rows_for(ts)) for ts in timescales}
    return GridSummary(rows, best)


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return "" if not np.isfinite(x) else repr(x)
    if isinstance(x, date):
        return x.isoformat()
    return str(x)


def write_grid_csv(rows: Iterable[GridRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for r in rows:
            rec = r.as_record()
            w.writerow([_fmt(rec[k]) for k in GRID_COLUMNS])


def best_table(rows: Iterable[GridRow]) -> list[dict]:
    """Three lines per best row: winner leg, loser leg and the long-short spread."""
    out = []
    for r in rows:
        c, rep = r.config, r.report
        spread = "W - L" if c.direction is Direction.TRADITIONAL else "L - W"
        head = {"Portfolio": c.label, "Strategy": c.direction.value.capitalize(), "J-K": f"{c.J}-{c.K}"}
        for basket, mean, std in (("Winner (W)", rep.winner_mean, rep.winner_std),
                                  ("Loser (L)", rep.loser_mean, rep.loser_std),
                                  (spread, rep.monthly_mean, rep.monthly_std)):
            line = dict.fromkeys(BEST_COLUMNS, "")
            line.update(head, Basket=basket, Mean=mean)
            line["Std. Dev."] = std
            if basket == spread:
                line.update({"Fin. Wealth": rep.final_wealth, "Sharpe": rep.sharpe,
                             "VaR95": rep.var95, "MDD": rep.mdd})
            out.append(line)
    return out


def write_best_csv(rows: Iterable[GridRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BEST_COLUMNS)
        for line in best_table(rows):
            w.writerow([_fmt(line[k]) for k in BEST_COLUMNS])
