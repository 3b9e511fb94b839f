"""Velocity, financial mass and the three physical-momentum scores.

Scalar functions operate on one lookback window and raise
:class:`~physmom.errors.Excluded` when a symbol cannot be scored.
:func:`window_scores` evaluates the same measures for every symbol and
formation date at once, marking exclusions with NaN.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import AssetPanel, log_price
from .errors import ConfigError, DomainError, Excluded


class MomentumKind(str, Enum):
    P1 = "p1"
    P2 = "p2"
    P3 = "p3"


class MassKind(str, Enum):
    TURNOVER = "turnover"
    INV_TURNOVER = "inv_turnover"
    INV_VOL = "inv_vol"


def check_pairing(momentum: MomentumKind, mass: MassKind) -> None:
    if (momentum is MomentumKind.P3) != (mass is MassKind.INV_VOL):
        raise ConfigError(f"{momentum.value} cannot be paired with mass {mass.value}")


def velocity(close_start, close_end):
    """Log-price change over one step: log(close_end) - log(close_start)."""
    return log_price(close_end) - log_price(close_start)


def turnover_rate(volume: float, shares_outstanding: float) -> float:
    if not shares_outstanding > 0:
        raise DomainError("shares_outstanding must be positive")
    if volume < 0:
        raise DomainError("volume must be non-negative")
    return volume / shares_outstanding


def inverse_turnover(turnover: float) -> float:
    if turnover == 0:
        raise Excluded("zero turnover has no inverse")
    if turnover < 0:
        raise DomainError("turnover must be non-negative")
    return 1.0 / turnover


def _check_window(velocities, k: int) -> np.ndarray:
    v = np.asarray(velocities, dtype=float)
    if k < 2:
        raise ConfigError("volatility needs a lookback of at least 2 steps")
    if v.shape != (k,):
        raise ConfigError(f"expected {k} velocities, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("velocities must be finite")
    return v


def rolling_volatility(velocities: Sequence[float], k: int) -> float:
    """Sample standard deviation (divisor k-1) of a k-step velocity window."""
    v = _check_window(velocities, k)
    if v.max() == v.min():
        return 0.0
    return float(np.std(v, ddof=1))


def _pair(masses, velocities) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(masses, dtype=float)
    v = np.asarray(velocities, dtype=float)
    if m.ndim != 1 or m.shape != v.shape or len(m) == 0:
        raise ConfigError("masses and velocities must be equal-length non-empty sequences")
    return m, v


def momentum_p1(masses: Sequence[float], velocities: Sequence[float]) -> float:
    """Mass-weighted sum of velocities over the window."""
    m, v = _pair(masses, velocities)
    return float(np.dot(m, v))


def momentum_p2(masses: Sequence[float], velocities: Sequence[float]) -> float:
    """Mass-weighted mean velocity; invariant to rescaling all masses."""
    m, v = _pair(masses, velocities)
    total = m.sum()
    if total == 0:
        raise Excluded("masses sum to zero")
    return float(np.dot(m, v) / total)


def momentum_p3(velocities: Sequence[float], k: int) -> float:
    """Mean velocity over its sample standard deviation."""
    v = _check_window(velocities, k)
    sigma = rolling_volatility(v, k)
    if sigma == 0:
        raise Excluded("zero volatility")
    return float(v.mean() / sigma)


# ---------------------------------------------------------------------------
# Vectorised scoring on a formation grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StepFrame:
    """Per-step velocity and turnover between consecutive grid dates.

    Row ``n`` describes the step (grid[n-1], grid[n]]: close-to-close
    velocity, volume summed over the step divided by the shares
    outstanding at its end. ``complete[n]`` is True only when every bar in
    [grid[n-1], grid[n]] is present. Row 0 has no predecessor and is never
    complete.
    """

    grid: np.ndarray
    velocity: np.ndarray
    turnover: np.ndarray
    complete: np.ndarray


def step_frame(panel: AssetPanel, grid: np.ndarray) -> StepFrame:
    grid = np.asarray(grid, dtype=np.int64)
    n, s = len(grid), panel.n_symbols
    vel = np.full((n, s), np.nan)
    turn = np.full((n, s), np.nan)
    complete = np.zeros((n, s), dtype=bool)
    if n >= 2:
        missing = np.vstack([np.zeros((1, s), dtype=np.int64), np.cumsum(~panel.present, axis=0)])
        a, b = grid[:-1], grid[1:]
        complete[1:] = (missing[b + 1] - missing[a]) == 0
        vel[1:] = velocity(panel.close[a], panel.close[b])
        if np.all(b - a == 1):
            volume = panel.volume[b]
        else:
            volume = np.add.reduceat(np.nan_to_num(panel.volume[:b[-1] + 1]), a + 1, axis=0)
        turn[1:] = volume / panel.shares[b]
        vel[~complete] = np.nan
        turn[~complete] = np.nan
    return StepFrame(grid, vel, turn, complete)


def window_scores(
    frame: StepFrame,
    momentum: MomentumKind,
    mass: MassKind,
    lookback: int,
    lag: int = 0,
) -> np.ndarray:
    """Momentum score of every symbol at every grid position.

    The score at position ``n`` uses the ``lookback`` steps ending at
    position ``n - lag``. Entries are NaN where the window is incomplete or
    the symbol is excluded (zero turnover under inverse turnover, zero mass
    sum, zero volatility).
    """
    momentum, mass = MomentumKind(momentum), MassKind(mass)
    check_pairing(momentum, mass)
    if lookback < 1 or (momentum is MomentumKind.P3 and lookback < 2):
        raise ConfigError(f"lookback {lookback} too short for {momentum.value}")
    n, s = frame.velocity.shape
    out = np.full((n, s), np.nan)
    first = lookback + lag
    if n <= first:
        return out
    # windows over steps w..w+lookback-1 for w >= 1
    v = sliding_window_view(frame.velocity, lookback, axis=0)[1:]
    ok = sliding_window_view(frame.complete, lookback, axis=0)[1:].all(axis=-1)
    count = n - first
    v, ok = v[:count], ok[:count]
    v = np.where(ok[..., None], v, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if momentum is MomentumKind.P3:
            sigma = v.std(axis=-1, ddof=1)
            sigma[np.ptp(v, axis=-1) == 0] = 0.0
            ok &= sigma > 0
            score = v.mean(axis=-1) / sigma
        else:
            u = sliding_window_view(frame.turnover, lookback, axis=0)[1:][:count]
            u = np.where(ok[..., None], u, 1.0)
            if mass is MassKind.INV_TURNOVER:
                ok &= np.all(u > 0, axis=-1)
                m = 1.0 / u
            else:
                m = u
            weighted = (m * v).sum(axis=-1)
            if momentum is MomentumKind.P1:
                score = weighted
            else:
                total = m.sum(axis=-1)
                ok &= total > 0
                score = weighted / total
    ok &= np.isfinite(score)
    out[first:] = np.where(ok, score, np.nan)
    return out


@dataclass(frozen=True)
class SignalWindow:
    """One symbol's lookback window ending at a formation."""

    symbol: str
    formation_index: int
    lookback: int
    velocities: tuple[float, ...]
    masses: tuple[float, ...]

    def score(self, momentum: MomentumKind) -> float:
        momentum = MomentumKind(momentum)
        if momentum is MomentumKind.P1:
            return momentum_p1(self.masses, self.velocities)
        if momentum is MomentumKind.P2:
            return momentum_p2(self.masses, self.velocities)
        return momentum_p3(self.velocities, self.lookback)


def signal_window(
    panel: AssetPanel,
    grid: Sequence[int],
    position: int,
    symbol: str,
    mass: MassKind,
    lookback: int,
    lag: int = 0,
) -> SignalWindow:
    """Build the window for ``symbol`` at grid ``position`` one step at a time.

    Raises Excluded when a bar is missing inside the window or the mass is
    undefined.
    """
    mass = MassKind(mass)
    j = panel.symbols.index(symbol)
    end = position - lag
    start = end - lookback
    if start < 0:
        raise Excluded("not enough history")
    lo, hi = grid[start], grid[end]
    if not panel.present[lo:hi + 1, j].all():
        raise Excluded("missing bar inside the lookback window")
    vs, us = [], []
    for p in range(start + 1, end + 1):
        a, b = grid[p - 1], grid[p]
        vs.append(velocity(float(panel.close[a, j]), float(panel.close[b, j])))
        vol = math.fsum(float(x) for x in panel.volume[a + 1:b + 1, j])
        us.append(turnover_rate(vol, float(panel.shares[b, j])))
    if mass is MassKind.TURNOVER:
        ms = us
    elif mass is MassKind.INV_TURNOVER:
        ms = [inverse_turnover(u) for u in us]
    else:
        sigma = rolling_volatility(vs, lookback)
        if sigma == 0:
            raise Excluded("zero volatility")
        ms = [1.0 / sigma] * lookback
    return SignalWindow(symbol, int(grid[position]), lookback, tuple(vs), tuple(ms))
