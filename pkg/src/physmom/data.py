"""Market data ingestion: trading calendar, bars and the aligned asset panel.

File formats
------------
Per-symbol bars, one file per symbol (the file stem is the symbol)::

    date,open,close,volume,shares_outstanding
    2014-01-02,101.5,102.25,1250000,48000000

Benchmark closes::

    date,close

Optional universe membership, applied at formation time::

    date,symbol,action        # action is ADD or DROP
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DomainError

log = logging.getLogger(__name__)

BAR_HEADER = ("date", "open", "close", "volume", "shares_outstanding")
BENCHMARK_HEADER = ("date", "close")
MEMBERSHIP_HEADER = ("date", "symbol", "action")
CALENDAR_POLICIES = ("union", "intersection")


def log_price(s):
    """Natural log of a price (scalar or array). NaN passes through."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr <= 0):
        raise DomainError(f"log price needs positive prices, got {s!r}")
    if arr.ndim == 0:
        return math.log(float(arr))
    return np.log(arr)


@dataclass(frozen=True)
class TradingCalendar:
    """Ordered trading dates with period-start markers."""

    dates: tuple[date, ...]

    def __post_init__(self):
        dates = tuple(self.dates)
        object.__setattr__(self, "dates", dates)
        for a, b in zip(dates, dates[1:]):
            if not a < b:
                raise DataError(f"calendar dates must be strictly increasing ({a} then {b})")

    def __len__(self) -> int:
        return len(self.dates)

    @cached_property
    def days(self) -> np.ndarray:
        return np.array(self.dates, dtype="datetime64[D]")

    @cached_property
    def _position(self) -> dict[date, int]:
        return {d: i for i, d in enumerate(self.dates)}

    def index_of(self, d: date) -> int:
        try:
            return self._position[d]
        except KeyError:
            raise KeyError(f"{d} is not a trading date") from None

    def __contains__(self, d: object) -> bool:
        return d in self._position

    def first_of(self, period: str) -> np.ndarray:
        """Indices of the first trading date of each ISO week, month or year."""
        if period == "day":
            return np.arange(len(self.dates))
        if period == "week":
            key = lambda d: d.isocalendar()[:2]  # noqa: E731
        elif period == "month":
            key = lambda d: (d.year, d.month)  # noqa: E731
        elif period == "year":
            key = lambda d: d.year  # noqa: E731
        else:
            raise ValueError(f"unknown period {period!r}")
        out, last = [], None
        for i, d in enumerate(self.dates):
            k = key(d)
            if k != last:
                out.append(i)
                last = k
        return np.array(out, dtype=np.int64)


@dataclass(frozen=True, slots=True)
class Bar:
    date: date
    open: float
    close: float
    volume: float
    shares_outstanding: float

    def __post_init__(self):
        if not (self.open > 0 and self.close > 0):
            raise ValueError("prices must be positive")
        if not self.shares_outstanding > 0:
            raise ValueError("shares_outstanding must be positive")
        if not self.volume >= 0:
            raise ValueError("volume must be non-negative")


@dataclass(frozen=True)
class Membership:
    """ADD/DROP events per symbol; the latest event on or before a date wins.

    A symbol with no event on or before a date is not a member.
    """

    events: Mapping[str, tuple[tuple[date, str], ...]]

    def mask(self, symbols: Sequence[str], days: np.ndarray) -> np.ndarray:
        """Boolean (len(days), len(symbols)) membership matrix."""
        days = np.asarray(days, dtype="datetime64[D]")
        out = np.zeros((len(days), len(symbols)), dtype=bool)
        for j, sym in enumerate(symbols):
            ev = self.events.get(sym)
            if not ev:
                continue
            when = np.array([d for d, _ in ev], dtype="datetime64[D]")
            added = np.array([a == "ADD" for _, a in ev])
            pos = np.searchsorted(when, days, side="right") - 1
            out[:, j] = (pos >= 0) & added[np.maximum(pos, 0)]
        return out


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AssetPanel:
    """Immutable (dates x symbols) panel with explicit missing markers.

    Numeric arrays hold NaN where ``present`` is False. Symbols are kept in
    lexicographic order, which is also the tie-break order for ranking.
    """

    symbols: tuple[str, ...]
    calendar: TradingCalendar
    open: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    shares: np.ndarray
    present: np.ndarray
    benchmark: np.ndarray
    membership: Membership | None = None

    def __post_init__(self):
        symbols = tuple(self.symbols)
        if list(symbols) != sorted(set(symbols)):
            raise DataError("panel symbols must be unique and sorted")
        if not symbols:
            raise DataError("empty universe")
        shape = (len(self.calendar), len(symbols))
        present = _frozen(self.present, bool)
        arrays = {}
        for name in ("open", "close", "volume", "shares"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if a.shape != shape:
                raise DataError(f"{name} has shape {a.shape}, expected {shape}")
            a[~present] = np.nan
            a.setflags(write=False)
            arrays[name] = a
        if present.shape != shape:
            raise DataError(f"present has shape {present.shape}, expected {shape}")
        o, c, v, s = (arrays[k][present] for k in ("open", "close", "volume", "shares"))
        if not (np.all(o > 0) and np.all(c > 0) and np.all(s > 0) and np.all(v >= 0)):
            raise DataError("present bars must have positive prices and shares, non-negative volume")
        bench = _frozen(self.benchmark, np.float64)
        if bench.shape != shape[:1]:
            raise DataError("benchmark must align with the calendar")
        if np.any(bench[np.isfinite(bench)] <= 0):
            raise DataError("benchmark closes must be positive")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "present", present)
        object.__setattr__(self, "benchmark", bench)
        for k, a in arrays.items():
            object.__setattr__(self, k, a)

    @property
    def n_dates(self) -> int:
        return len(self.calendar)

    @property
    def n_symbols(self) -> int:
        return len(self.symbols)

    def bars(self, symbol: str) -> list[Bar]:
        j = self.symbols.index(symbol)
        rows = np.flatnonzero(self.present[:, j])
        return [
            Bar(self.calendar.dates[i], float(self.open[i, j]), float(self.close[i, j]),
                float(self.volume[i, j]), float(self.shares[i, j]))
            for i in rows
        ]

    @classmethod
    def from_bars(
        cls,
        bars: Mapping[str, Sequence[Bar]],
        benchmark: Mapping[date, float],
        calendar_policy: str = "union",
        membership: Membership | None = None,
    ) -> "AssetPanel":
        if calendar_policy not in CALENDAR_POLICIES:
            raise DataError(f"calendar_policy must be one of {CALENDAR_POLICIES}")
        bars = {s: b for s, b in bars.items() if b}
        if not bars:
            raise DataError("empty universe")
        all_dates = set()
        for rows in bars.values():
            all_dates.update(b.date for b in rows)
        if calendar_policy == "intersection":
            all_dates &= set(benchmark)
        if not all_dates:
            raise DataError("calendar is empty after applying the calendar policy")
        cal = TradingCalendar(tuple(sorted(all_dates)))
        symbols = tuple(sorted(bars))
        shape = (len(cal), len(symbols))
        o, c, v, s = (np.full(shape, np.nan) for _ in range(4))
        present = np.zeros(shape, dtype=bool)
        for j, sym in enumerate(symbols):
            for b in bars[sym]:
                i = cal._position.get(b.date)
                if i is None:
                    continue
                o[i, j], c[i, j], v[i, j], s[i, j] = b.open, b.close, b.volume, b.shares_outstanding
                present[i, j] = True
        bench = np.array([benchmark.get(d, np.nan) for d in cal.dates], dtype=float)
        return cls(symbols, cal, o, c, v, s, present, bench, membership)


# ---------------------------------------------------------------------------
# CSV input / output
# ---------------------------------------------------------------------------

def _rows(path: Path, header: tuple[str, ...]):
    """Yield (line_number, fields) after checking the header."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(h.strip() for h in first) != header:
            raise DataError(f"{path}:1: header must be {','.join(header)}")
        for fields in reader:
            if not fields:
                continue
            if len(fields) != len(header):
                raise DataError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(fields)}")
            yield reader.line_num, fields


def _parse_date(path, line, text) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"{path}:{line}: bad date {text!r} (want YYYY-MM-DD)") from None


def _parse_number(path, line, text) -> float:
    try:
        x = float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: bad number {text!r}") from None
    if not math.isfinite(x):
        raise DataError(f"{path}:{line}: non-finite number {text!r}")
    return x


def read_bars(path: str | Path) -> list[Bar]:
    """Parse one per-symbol file. Rows violating bar invariants are dropped and logged."""
    path = Path(path)
    out: list[Bar] = []
    seen: set[date] = set()
    for line, f in _rows(path, BAR_HEADER):
        d = _parse_date(path, line, f[0])
        nums = [_parse_number(path, line, x) for x in f[1:]]
        if d in seen:
            raise DataError(f"{path}:{line}: duplicate date {d}")
        seen.add(d)
        try:
            out.append(Bar(d, *nums))
        except ValueError as exc:
            log.warning("%s:%d: rejected row (%s)", path, line, exc)
    out.sort(key=lambda b: b.date)
    return out


def read_benchmark(path: str | Path) -> dict[date, float]:
    path = Path(path)
    out: dict[date, float] = {}
    for line, f in _rows(path, BENCHMARK_HEADER):
        d = _parse_date(path, line, f[0])
        x = _parse_number(path, line, f[1])
        if d in out:
            raise DataError(f"{path}:{line}: duplicate date {d}")
        if x <= 0:
            log.warning("%s:%d: rejected row (non-positive close)", path, line)
            continue
        out[d] = x
    if not out:
        raise DataError(f"{path}: benchmark has no rows")
    return out


def read_membership(path: str | Path) -> Membership:
    path = Path(path)
    events: dict[str, list[tuple[date, str]]] = {}
    for line, f in _rows(path, MEMBERSHIP_HEADER):
        d = _parse_date(path, line, f[0])
        sym, action = f[1].strip(), f[2].strip().upper()
        if not sym or action not in ("ADD", "DROP"):
            raise DataError(f"{path}:{line}: need a symbol and ADD or DROP")
        events.setdefault(sym, []).append((d, action))
    # stable sort keeps file order for same-day events
    return Membership({s: tuple(sorted(ev, key=lambda e: e[0])) for s, ev in events.items()})


def load_panel(
    data_dir: str | Path,
    benchmark_file: str | Path,
    calendar_policy: str = "union",
    membership_file: str | Path | None = None,
) -> AssetPanel:
    """Load every ``*.csv`` in ``data_dir`` plus the benchmark into an AssetPanel.

    Under ``union`` the calendar is the union of all symbol dates and gaps
    become missing markers. Under ``intersection`` only dates on which the
    benchmark has a close are kept.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"{data_dir}: not a directory")
    if calendar_policy not in CALENDAR_POLICIES:
        raise DataError(f"calendar_policy must be one of {CALENDAR_POLICIES}")
    skip = {Path(benchmark_file).resolve()}
    if membership_file is not None:
        skip.add(Path(membership_file).resolve())
    files = sorted(p for p in data_dir.glob("*.csv") if p.resolve() not in skip)
    bars = {}
    for p in files:
        rows = read_bars(p)
        if rows:
            bars[p.stem] = rows
        else:
            log.warning("%s: no usable rows, symbol skipped", p)
    if not bars:
        raise DataError(f"{data_dir}: empty universe (no usable symbol files)")
    bench = read_benchmark(benchmark_file)
    membership = read_membership(membership_file) if membership_file is not None else None
    return AssetPanel.from_bars(bars, bench, calendar_policy, membership)


def format_number(x: float) -> str:
    """Shortest text that parses back to the identical float."""
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def write_panel(panel: AssetPanel, data_dir: str | Path, benchmark_file: str | Path) -> None:
    """Write a panel in the loader's format; reloading gives identical arrays."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    dates = panel.calendar.dates
    for j, sym in enumerate(panel.symbols):
        with open(data_dir / f"{sym}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BAR_HEADER)
            for i in np.flatnonzero(panel.present[:, j]):
                w.writerow([dates[i].isoformat()] + [
                    format_number(a[i, j]) for a in (panel.open, panel.close, panel.volume, panel.shares)
                ])
    benchmark_file = Path(benchmark_file)
    benchmark_file.parent.mkdir(parents=True, exist_ok=True)
    with open(benchmark_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCHMARK_HEADER)
        for d, x in zip(dates, panel.benchmark):
            if np.isfinite(x):
                w.writerow([d.isoformat(), format_number(x)])


def write_membership(membership: Membership, path: str | Path) -> None:
    rows = sorted(
        ((d, s, a) for s, ev in membership.events.items() for d, a in ev),
        key=lambda r: (r[0], r[1]),
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEMBERSHIP_HEADER)
        for d, s, a in rows:
            w.writerow([d.isoformat(), s, a])


def benchmark_series(panel: AssetPanel) -> tuple[np.ndarray, np.ndarray]:
    """(days, closes) of the benchmark with missing dates dropped."""
    ok = np.isfinite(panel.benchmark)
    return panel.calendar.days[ok], panel.benchmark[ok]

