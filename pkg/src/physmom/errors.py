"""Exception hierarchy. The CLI maps each family to an exit code."""


class PhysmomError(Exception):
    """Base class for all package errors."""


class ConfigError(PhysmomError):
    """Invalid strategy or run configuration (CLI exit 1)."""


class DataError(PhysmomError):
    """Unreadable, malformed or empty market data (CLI exit 2)."""


class BacktestError(PhysmomError):
    """A run could not be completed (CLI exit 3)."""


class DomainError(PhysmomError, ValueError):
    """A numeric input lies outside the domain of a function."""


class Excluded(PhysmomError):
    """A symbol cannot be scored at this formation and must sit out.

    Raised by the scalar signal functions for zero turnover, zero mass
    sums and zero volatility. It is an exclusion signal, not a failure.
    """


class InsufficientUniverse(PhysmomError):
    """Fewer eligible symbols than groups on a formation date."""
