"""Command-line entry point.

Modes
-----
single
    Backtest one configuration; writes ``report_<slug>.json``,
    ``wealth_<slug>.csv`` and ``returns_<slug>.csv``.
grid
    Backtest every configuration of the chosen timescales in both
    directions; writes ``grid_<timescale>.csv``, ``best_<timescale>.csv``,
    one report per configuration, wealth files for the best rows and
    ``summary.json``.
synth
    Write a seeded synthetic dataset to ``--out``.

Every long option can also be set in a key-value config file passed with
``--config`` (keys use underscores, e.g. ``data_dir = bars``). Command-line
flags win over the file.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .analytics import RiskReport
from .backtest import BacktestResult
from .data import CALENDAR_POLICIES, load_panel
from .errors import BacktestError, ConfigError, DataError, PhysmomError
from .portfolio import DEFAULT_GROUPS, Direction, StrategyConfig, Timescale
from .signals import MassKind, MomentumKind
from .sweep import evaluate, run_grid, write_best_csv, write_grid_csv
from .synthetic import SynthSpec, synth_panel

log = logging.getLogger("physmom")

EXIT_CODES = ((ConfigError, 1), (DataError, 2), (BacktestError, 3))

DEFAULTS = {
    "mode": "single",
    "benchmark": None,
    "membership": None,
    "out": "out",
    "direction": Direction.TRADITIONAL.value,
    "groups": DEFAULT_GROUPS,
    "rf": 0.0,
    "seed": 0,
    "calendar_policy": "union",
    "sharpe_mode": "monthly",
    "workers": 1,
    "symbols": 100,
    "days": 2000,
    "missing_rate": 0.0,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="physmom", description="Physical-momentum backtester.")
    # defaults live in DEFAULTS so a config file can fill anything left unset
    p.set_defaults(**{k: None for k in DEFAULTS})
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--mode", choices=("single", "grid", "synth"))
    p.add_argument("--data-dir", help="directory of per-symbol CSV files")
    p.add_argument("--benchmark", help="benchmark CSV (date,close); default <data-dir>/benchmark.csv")
    p.add_argument("--membership", help="optional universe membership CSV")
    p.add_argument("--out", help="output directory")
    p.add_argument("--momentum", choices=[m.value for m in MomentumKind])
    p.add_argument("--mass", choices=[m.value for m in MassKind])
    p.add_argument("--timescale", help="day|week|month|year; grid mode takes a comma list or 'all'")
    p.add_argument("--J", type=int, help="lookback in grid steps")
    p.add_argument("--K", type=int, help="holding period in grid steps")
    p.add_argument("--direction", choices=[d.value for d in Direction])
    p.add_argument("--groups", type=int, help=f"ranking groups (default {DEFAULT_GROUPS})")
    p.add_argument("--rf", type=float, help="risk-free rate per month")
    p.add_argument("--seed", type=int, help="synthetic generator seed")
    p.add_argument("--calendar-policy", choices=CALENDAR_POLICIES)
    p.add_argument("--sharpe-mode", choices=("monthly", "period"))
    p.add_argument("--workers", type=int, help="grid worker threads")
    p.add_argument("--symbols", type=int, help="synth: number of symbols")
    p.add_argument("--days", type=int, help="synth: number of trading days")
    p.add_argument("--missing-rate", type=float, help="synth: fraction of bars dropped")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a key = value file; a section header is optional."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep J and K upper-case
    try:
        cp.read_string(text if text.lstrip().startswith("[") else "[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge flags over the config file over built-in defaults."""
    dest = {a.dest: a for a in build_parser()._actions}
    file_values = read_config(args.config) if args.config else {}
    merged = vars(args).copy()
    for key, raw in file_values.items():
        if key not in dest or key in ("config", "help", "verbose"):
            raise ConfigError(f"unknown config key {key!r}")
        if merged.get(key) is not None:
            continue
        action = dest[key]
        try:
            value = action.type(raw) if action.type else raw
        except ValueError:
            raise ConfigError(f"config key {key}: bad value {raw!r}") from None
        if action.choices and value not in action.choices:
            raise ConfigError(f"config key {key}: {raw!r} not in {sorted(action.choices)}")
        merged[key] = value
    for key, value in DEFAULTS.items():
        if merged.get(key) is None:
            merged[key] = value
    return argparse.Namespace(**merged)


def _timescales(text: str | None) -> list[Timescale]:
    if not text:
        raise ConfigError("--timescale is required")
    if text.strip() == "all":
        return list(Timescale)
    try:
        return [Timescale(t.strip()) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _strategy(a: argparse.Namespace) -> StrategyConfig:
    missing = [f"--{k}" for k in ("momentum", "mass", "timescale", "J", "K") if getattr(a, k) is None]
    if missing:
        raise ConfigError("single mode needs " + ", ".join(missing))
    return StrategyConfig(a.momentum, a.mass, a.timescale, a.J, a.K, a.direction, a.groups)


def _load(a: argparse.Namespace):
    if not a.data_dir:
        raise ConfigError("--data-dir is required")
    benchmark = a.benchmark or str(Path(a.data_dir) / "benchmark.csv")
    if not Path(benchmark).is_file():
        raise DataError(f"{benchmark}: benchmark file not found")
    if a.membership and not Path(a.membership).is_file():
        raise DataError(f"{a.membership}: membership file not found")
    return load_panel(a.data_dir, benchmark, a.calendar_policy, a.membership)


def _clean(x):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def config_dict(c: StrategyConfig) -> dict:
    d = asdict(c)
    return {k: (v.value if hasattr(v, "value") else v) for k, v in d.items()}


def report_payload(config: StrategyConfig, report: RiskReport, result: BacktestResult | None = None) -> dict:
    payload = {"config": config_dict(config), "label": config.label, "report": report.to_dict()}
    if result is not None:
        payload["run"] = {
            "first_formation": str(result.wealth_dates[0]),
            "last_date": str(result.wealth_dates[-1]),
            "n_periods": len(result.period_returns),
            "skipped_formations": [d.isoformat() for d in result.skipped],
            "halted": result.halted,
        }
    return payload


def _window_mask(dates: np.ndarray, report: RiskReport) -> np.ndarray:
    lo, hi = np.datetime64(report.window_start, "D"), np.datetime64(report.window_end, "D")
    return (dates >= lo) & (dates <= hi)


def write_curves(result: BacktestResult, report: RiskReport, out: Path) -> None:
    """Wealth (grid dates, rebased to 1 at the window start) and period returns inside the window."""
    slug = result.config.slug
    keep = _window_mask(result.wealth_dates, report)
    dates, wealth = result.wealth_dates[keep], result.wealth[keep]
    wealth = wealth / wealth[0]
    with open(out / f"wealth_{slug}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "wealth"))
        for d, x in zip(dates, wealth):
            w.writerow((str(d), repr(float(x))))
    # period returns whose period ends after the first kept wealth date
    rkeep = (result.period_dates > dates[0]) & (result.period_dates <= dates[-1])
    with open(out / f"returns_{slug}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "return", "winner", "loser", "active"))
        for i in np.flatnonzero(rkeep):
            w.writerow((str(result.period_dates[i]), repr(float(result.period_returns[i])),
                        repr(float(result.winner_returns[i])), repr(float(result.loser_returns[i])),
                        int(result.active[i])))


def run_single(a: argparse.Namespace) -> int:
    config = _strategy(a)
    panel = _load(a)
    result, report = evaluate(panel, config, a.rf, a.sharpe_mode)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(report_payload(config, report, result), out / f"report_{config.slug}.json")
    write_curves(result, report, out)
    print(f"{config.slug}: final wealth {report.final_wealth:.6g}, "
          f"monthly mean {report.monthly_mean:.4g}%, MDD {report.mdd:.4g}%")
    return 0


def run_grid_mode(a: argparse.Namespace) -> int:
    timescales = _timescales(a.timescale)
    if a.workers < 1:
        raise ConfigError("--workers must be at least 1")
    if a.groups < 2:
        raise ConfigError("--groups must be at least 2")
    panel = _load(a)
    summary = run_grid(panel, timescales, a.groups, a.rf, a.workers, a.sharpe_mode)
    if not any(r.report is not None for r in summary.rows):
        raise BacktestError("every configuration failed; see warnings above")
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for ts in timescales:
        rows = summary.rows_for(ts)
        write_grid_csv(rows, out / f"grid_{ts.value}.csv")
        write_best_csv(summary.best[ts], out / f"best_{ts.value}.csv")
        for r in rows:
            if r.report is not None:
                _dump_json(report_payload(r.config, r.report), out / f"report_{r.config.slug}.json")
        for r in summary.best[ts]:
            result, report = evaluate(panel, r.config, a.rf, a.sharpe_mode)
            write_curves(result, report, out)
    _dump_json({
        "timescales": [t.value for t in timescales],
        "groups": a.groups,
        "rf": a.rf,
        "rows": {t.value: len(summary.rows_for(t)) for t in timescales},
        "failed": [r.config.slug for r in summary.rows if r.report is None],
        "halted": [r.config.slug for r in summary.rows if r.halted],
        "best": {t.value: [r.config.slug for r in summary.best[t]] for t in timescales},
    }, out / "summary.json")
    print(f"{len(summary.rows)} configurations written to {out}")
    return 0


def run_synth(a: argparse.Namespace) -> int:
    spec = SynthSpec(n_symbols=a.symbols, n_days=a.days, missing_rate=a.missing_rate)
    bars, bench = synth_panel(spec, a.seed, a.out)
    print(f"wrote {a.symbols} symbols to {bars} and benchmark to {bench}")
    return 0


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        a = resolve(args)
        return {"single": run_single, "grid": run_grid_mode, "synth": run_synth}[a.mode](a)
    except PhysmomError as exc:
        code = next((c for kind, c in EXIT_CODES if isinstance(exc, kind)), 3)
        print(f"physmom: error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"physmom: error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    raise SystemExit(run_cli())


if __name__ == "__main__":
    main()
