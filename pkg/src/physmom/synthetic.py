"""Seeded synthetic panels: geometric random walk prices, lognormal volume."""
from __future__ import annotations

import argparse
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .data import AssetPanel, TradingCalendar, write_panel
from .errors import ConfigError

Range = tuple[float, float]


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters.

    ``drift`` and ``vol`` are per-day log-return mean and standard
    deviation. A (lo, hi) pair draws each symbol's value uniformly from the
    range; a single number applies to every symbol.
    """

    n_symbols: int = 10
    n_days: int = 60
    start: date = date(2014, 1, 1)
    drift: float | Range = (-0.0005, 0.001)
    vol: float | Range = (0.01, 0.03)
    start_price: float | Range = (20.0, 500.0)
    volume_log_mean: float = 13.0
    volume_log_sd: float = 0.6
    shares: float | Range = (5e6, 5e8)
    missing_rate: float = 0.0

    def validate(self) -> None:
        if self.n_symbols < 1 or self.n_days < 2:
            raise ConfigError("need at least 1 symbol and 2 days")
        for name in ("drift", "vol", "start_price", "shares"):
            lo, hi = _bounds(getattr(self, name))
            if lo > hi:
                raise ConfigError(f"{name} range is reversed")
        if _bounds(self.vol)[0] < 0 or self.volume_log_sd < 0:
            raise ConfigError("volatilities must be non-negative")
        if _bounds(self.start_price)[0] <= 0 or _bounds(self.shares)[0] <= 0:
            raise ConfigError("prices and shares must be positive")
        if not 0 <= self.missing_rate < 1:
            raise ConfigError("missing_rate must be in [0, 1)")


def _bounds(x) -> Range:
    if isinstance(x, (tuple, list)):
        return float(x[0]), float(x[1])
    return float(x), float(x)


def _draw(rng: np.random.Generator, x, n: int) -> np.ndarray:
    lo, hi = _bounds(x)
    return rng.uniform(lo, hi, n) if hi > lo else np.full(n, lo)


def business_days(start: date, n: int) -> tuple[date, ...]:
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return tuple(d.item() for d in days)


def generate_panel(spec: SynthSpec = SynthSpec(), seed: int = 0) -> AssetPanel:
    """Build a panel in memory. The same (spec, seed) always gives the same panel."""
    spec.validate()
    rng = np.random.default_rng(seed)
    t, s = spec.n_days, spec.n_symbols
    drift = _draw(rng, spec.drift, s)
    vol = _draw(rng, spec.vol, s)
    p0 = _draw(rng, spec.start_price, s)
    shares = np.round(_draw(rng, spec.shares, s))
    shocks = rng.standard_normal((t, s))
    gaps = rng.standard_normal((t, s))
    log_ret = drift + vol * shocks
    log_ret[0] = 0.0
    close = p0 * np.exp(np.cumsum(log_ret, axis=0))
    prev = np.vstack([p0, close[:-1]])
    # open gaps from the prior close with a fraction of the daily vol
    open_ = prev * np.exp(0.3 * vol * gaps)
    volume = np.round(np.exp(rng.normal(spec.volume_log_mean, spec.volume_log_sd, (t, s))))
    present = np.ones((t, s), dtype=bool)
    if spec.missing_rate > 0:
        present = rng.random((t, s)) >= spec.missing_rate
    width = max(3, len(str(s - 1)))
    symbols = tuple(f"S{j:0{width}d}" for j in range(s))
    # equal-weight index of log returns
    bench = 1000.0 * np.exp(np.cumsum(log_ret.mean(axis=1)))
    cal = TradingCalendar(business_days(spec.start, t))
    return AssetPanel(symbols, cal, open_, close, volume,
                      np.broadcast_to(shares, (t, s)), present, bench)


def synth_panel(spec: SynthSpec, seed: int, out_dir: str | Path) -> tuple[Path, Path]:
    """Write a synthetic dataset; returns (bars directory, benchmark file)."""
    out_dir = Path(out_dir)
    panel = generate_panel(spec, seed)
    bars, bench = out_dir / "bars", out_dir / "benchmark.csv"
    write_panel(panel, bars, bench)
    return bars, bench


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description="Write a seeded synthetic bar dataset.")
    p.add_argument("--out", required=True)
    p.add_argument("--symbols", type=int, default=100)
    p.add_argument("--days", type=int, default=2000)
    p.add_argument("--start", type=date.fromisoformat, default=date(2014, 1, 1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missing-rate", type=float, default=0.0)
    a = p.parse_args(argv)
    spec = SynthSpec(n_symbols=a.symbols, n_days=a.days, start=a.start, missing_rate=a.missing_rate)
    bars, bench = synth_panel(spec, a.seed, a.out)
    print(f"wrote {a.symbols} symbols to {bars} and benchmark to {bench}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
