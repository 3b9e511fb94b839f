"""Physical-momentum portfolio backtesting on daily equity bars."""
from .analytics import RiskReport, benchmark_window, capm, max_drawdown, monthly_returns, risk_report, sharpe_ratio, value_at_risk
from .backtest import BacktestResult, run_backtest
from .data import AssetPanel, TradingCalendar, load_panel
from .errors import BacktestError, ConfigError, DataError, DomainError, Excluded, PhysmomError
from .portfolio import Direction, StrategyConfig, Timescale, enumerate_grid
from .signals import MassKind, MomentumKind
from .sweep import GridSummary, run_grid
from .synthetic import SynthSpec, generate_panel, synth_panel

__all__ = [
    "AssetPanel", "BacktestError", "BacktestResult", "ConfigError", "DataError", "Direction",
    "DomainError", "Excluded", "GridSummary", "MassKind", "MomentumKind", "PhysmomError",
    "RiskReport", "StrategyConfig", "SynthSpec", "Timescale", "TradingCalendar",
    "benchmark_window", "capm", "enumerate_grid", "generate_panel", "load_panel",
    "max_drawdown", "monthly_returns", "risk_report", "run_backtest", "run_grid",
    "sharpe_ratio", "synth_panel", "value_at_risk",
]
