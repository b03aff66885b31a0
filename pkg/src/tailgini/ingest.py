"""
Daily closing prices to weekly percentage losses.

Price files are delimited text with a ``date,close`` header and ISO-8601
dates. A week is an ISO calendar week; its price is the last close seen in
it. The weekly loss is minus the simple return in percent, so a stock that
falls from 100 to 95 has a loss of +5.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from tailgini.errors import DataFormatError, InvalidSampleError
from tailgini.sample_core import PairedSample

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ("date", "close")


@dataclass(frozen=True, eq=False)
class PriceSeries:
    ticker: str
    dates: pd.DatetimeIndex
    closes: np.ndarray

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise InvalidSampleError(f"{self.ticker}: {len(self.dates)} dates but {len(self.closes)} closes")
        if not self.dates.is_monotonic_increasing or self.dates.has_duplicates:
            raise InvalidSampleError(f"{self.ticker}: dates must be strictly increasing")
        if not np.all(np.isfinite(self.closes)) or np.any(self.closes <= 0):
            bad = int(np.flatnonzero(~(np.isfinite(self.closes) & (self.closes > 0)))[0])
            raise InvalidSampleError(f"{self.ticker}: close on {self.dates[bad].date()} is not a positive price")

    def to_series(self) -> pd.Series:
        return pd.Series(self.closes, index=self.dates, name=self.ticker)


@dataclass(frozen=True, eq=False)
class LossSeries:
    ticker: str
    week_ending: pd.DatetimeIndex
    losses: np.ndarray
    gaps: int = 0
    iso_weeks: tuple[tuple[int, int], ...] = field(default=())

    @property
    def n(self) -> int:
        return int(self.losses.size)

    def to_series(self) -> pd.Series:
        index = pd.MultiIndex.from_tuples(self.iso_weeks, names=["year", "week"])
        return pd.Series(self.losses, index=index, name=self.ticker)


def read_prices(path: str | Path, ticker: str | None = None) -> PriceSeries:
    path = Path(path)
    ticker = ticker or path.stem
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    missing = [c for c in PRICE_COLUMNS if c not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: missing column(s) {missing}; expected header 'date,close'")
    try:
        dates = pd.DatetimeIndex(pd.to_datetime(frame["date"], format="ISO8601"))
        closes = pd.to_numeric(frame["close"], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    return PriceSeries(ticker, dates, closes)


def weekly_return(previous_close: np.ndarray | float, close: np.ndarray | float) -> np.ndarray | float:
    """Simple return in percent."""
    return 100.0 * (close / previous_close - 1.0)


def weekly_losses(prices: PriceSeries) -> LossSeries:
    series = prices.to_series()
    calendar = series.index.isocalendar()
    keys = [calendar["year"].to_numpy(dtype=int), calendar["week"].to_numpy(dtype=int)]
    weekly = series.groupby(keys).last()
    last_date = series.index.to_series().groupby(keys).max()
    if len(weekly) < 2:
        raise InvalidSampleError(f"{prices.ticker}: need at least 2 weeks of prices, got {len(weekly)}")

    mondays = pd.DatetimeIndex(
        [pd.Timestamp.fromisocalendar(int(year), int(week), 1) for year, week in weekly.index]
    )
    step = np.diff(mondays.asi8) // pd.Timedelta(weeks=1).value
    gaps = int(np.sum(step - 1))
    if gaps:
        logger.warning("%s: %d calendar week(s) without prices; returns span the gaps", prices.ticker, gaps)

    closes = weekly.to_numpy(dtype=float)
    losses = -np.asarray(weekly_return(closes[:-1], closes[1:]))
    iso_weeks = tuple((int(y), int(w)) for y, w in weekly.index[1:])
    return LossSeries(
        ticker=prices.ticker,
        week_ending=pd.DatetimeIndex(last_date.to_numpy()[1:]),
        losses=losses,
        gaps=gaps,
        iso_weeks=iso_weeks,
    )


def summary_stats(series: LossSeries | np.ndarray) -> tuple[float, float]:
    """Mean and sample standard deviation (n - 1 denominator), percent units."""
    losses = series.losses if isinstance(series, LossSeries) else np.asarray(series, dtype=float)
    if losses.size < 2:
        raise InvalidSampleError(f"summary statistics need at least 2 losses, got {losses.size}")
    return float(np.mean(losses)), float(np.std(losses, ddof=1))


def align_losses(stock: LossSeries, index: LossSeries) -> PairedSample:
    """Pair the stock's losses (X) with the index losses (Y) over their common ISO weeks."""
    joined = pd.concat([stock.to_series().rename("x"), index.to_series().rename("y")], axis=1, join="inner")
    if len(joined) < 2:
        raise InvalidSampleError(f"{stock.ticker} and {index.ticker} share {len(joined)} weeks; need at least 2")
    dropped = max(stock.n, index.n) - len(joined)
    if dropped:
        logger.info("%s vs %s: %d week(s) without a counterpart dropped", stock.ticker, index.ticker, dropped)
    return PairedSample(joined["x"].to_numpy(), joined["y"].to_numpy())
