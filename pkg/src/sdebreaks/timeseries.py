"""Price series model, return transforms, event calendar rules and window splits.

Timestamps are naive ``datetime`` objects in the exchange's local time zone.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import CalendarError, InsufficientDataError, InvalidInputError

DEFAULT_BAR_INTERVAL = timedelta(minutes=5)
MARKET_OPEN = time(9, 30)
# 78 five-minute bars in a 09:30-16:00 session, five sessions
DEFAULT_BARS_PER_SIDE = 390
SYNTHETIC_START = datetime(2000, 1, 3, 9, 30)

# Longest run of non-trading days tolerated when rolling forward.
_MAX_ROLL_DAYS = 31


@dataclass(frozen=True)
class PricePoint:
    timestamp: datetime
    price: float

    def __post_init__(self):
        if not np.isfinite(self.price) or self.price <= 0:
            raise InvalidInputError(f"price must be positive and finite, got {self.price!r}")


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Ordered, strictly positive price bars.

    Prices are held in a read-only float64 array; timestamps in a tuple of the
    same length.
    """

    timestamps: tuple[datetime, ...]
    prices: np.ndarray
    bar_interval: timedelta = DEFAULT_BAR_INTERVAL

    def __post_init__(self):
        prices = np.array(self.prices, dtype=np.float64)
        if prices.ndim != 1:
            raise InvalidInputError("prices must be one-dimensional")
        stamps = tuple(self.timestamps)
        if len(stamps) != prices.size:
            raise InvalidInputError(
                f"{len(stamps)} timestamps for {prices.size} prices"
            )
        if prices.size and (not np.all(np.isfinite(prices)) or np.any(prices <= 0)):
            raise InvalidInputError("prices must be positive and finite")
        for i in range(1, len(stamps)):
            if not stamps[i] > stamps[i - 1]:
                raise InvalidInputError(
                    f"timestamps not strictly increasing at position {i}"
                )
        prices.setflags(write=False)
        object.__setattr__(self, "timestamps", stamps)
        object.__setattr__(self, "prices", prices)

    @classmethod
    def from_points(cls, points: Iterable[PricePoint], bar_interval=DEFAULT_BAR_INTERVAL):
        points = list(points)
        return cls(
            tuple(p.timestamp for p in points),
            np.array([p.price for p in points], dtype=np.float64),
            bar_interval,
        )

    @classmethod
    def from_prices(
        cls,
        prices: Sequence[float] | np.ndarray,
        start: datetime = SYNTHETIC_START,
        bar_interval: timedelta = DEFAULT_BAR_INTERVAL,
    ) -> PriceSeries:
        """Attach an evenly spaced synthetic timestamp grid to raw prices."""
        prices = np.asarray(prices, dtype=np.float64)
        stamps = tuple(start + i * bar_interval for i in range(prices.size))
        return cls(stamps, prices, bar_interval)

    @property
    def points(self) -> list[PricePoint]:
        return [PricePoint(t, float(p)) for t, p in zip(self.timestamps, self.prices)]

    def __len__(self) -> int:
        return self.prices.size

    def __getitem__(self, key: slice) -> PriceSeries:
        if not isinstance(key, slice):
            raise TypeError("PriceSeries supports slice indexing only")
        return PriceSeries(self.timestamps[key], self.prices[key], self.bar_interval)

    def __eq__(self, other):
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (
            self.timestamps == other.timestamps
            and np.array_equal(self.prices, other.prices)
            and self.bar_interval == other.bar_interval
        )

    __hash__ = None

    def concat(self, other: PriceSeries) -> PriceSeries:
        return PriceSeries(
            self.timestamps + other.timestamps,
            np.concatenate([self.prices, other.prices]),
            self.bar_interval,
        )


def as_prices(series) -> np.ndarray:
    """Return the price vector of a PriceSeries or array-like."""
    if isinstance(series, PriceSeries):
        return series.prices
    prices = np.asarray(series, dtype=np.float64)
    if prices.ndim != 1:
        raise InvalidInputError("price vector must be one-dimensional")
    return prices


def _require_length(prices: np.ndarray, minimum: int, what: str) -> None:
    if prices.size < minimum:
        raise InvalidInputError(
            f"{what} needs at least {minimum} prices, got {prices.size}"
        )


def log_returns(series) -> np.ndarray:
    """Log returns ``ln(p[t] / p[t-1])`` of consecutive bars.

    Bars are treated as adjacent regardless of overnight or weekend gaps.
    """
    prices = as_prices(series)
    _require_length(prices, 2, "log_returns")
    return np.log(prices[1:] / prices[:-1])


def arithmetic_diffs(series) -> np.ndarray:
    """Price differences ``p[t] - p[t-1]``."""
    prices = as_prices(series)
    _require_length(prices, 2, "arithmetic_diffs")
    return np.diff(prices)


class Session(str, enum.Enum):
    PRE_OPEN = "pre_open"
    POST_CLOSE = "post_close"


@dataclass(frozen=True)
class EventSpec:
    ticker: str
    report_time: datetime
    session: Session

    def __post_init__(self):
        if not isinstance(self.session, Session):
            try:
                object.__setattr__(self, "session", Session(self.session))
            except ValueError:
                raise InvalidInputError(f"unknown session {self.session!r}") from None


@dataclass(frozen=True)
class TradingCalendar:
    """Monday-Friday calendar minus a holiday set, optionally bounded.

    ``first``/``last`` bound the range of dates the calendar can resolve;
    anything outside raises CalendarError.
    """

    holidays: frozenset[date] = field(default_factory=frozenset)
    first: date | None = None
    last: date | None = None

    def _check_bounds(self, day: date) -> None:
        if (self.first is not None and day < self.first) or (
            self.last is not None and day > self.last
        ):
            raise CalendarError(f"{day} is outside the trading calendar")

    def is_trading_day(self, day: date) -> bool:
        self._check_bounds(day)
        return day.weekday() < 5 and day not in self.holidays

    def next_trading_day(self, day: date, *, inclusive: bool = False) -> date:
        candidate = day if inclusive else day + timedelta(days=1)
        for _ in range(_MAX_ROLL_DAYS):
            if self.is_trading_day(candidate):
                return candidate
            candidate += timedelta(days=1)
        raise CalendarError(f"no trading day within {_MAX_ROLL_DAYS} days of {day}")


WEEKDAY_CALENDAR = TradingCalendar()


def effective_report_day(event: EventSpec, calendar: TradingCalendar = WEEKDAY_CALENDAR) -> date:
    """First trading day on which the market can react to the report.

    After-close reports move to the next trading day. Pre-open reports keep
    their date, unless that date is not a trading day, in which case they roll
    forward to the next one.
    """
    day = event.report_time.date()
    if event.session is Session.POST_CLOSE:
        return calendar.next_trading_day(day)
    return calendar.next_trading_day(day, inclusive=True)


def exclusion_reason(event: EventSpec, calendar: TradingCalendar = WEEKDAY_CALENDAR) -> str | None:
    """``"effective-monday"``/``"effective-friday"`` for excluded events, else None."""
    weekday = effective_report_day(event, calendar).weekday()
    if weekday == 0:
        return "effective-monday"
    if weekday == 4:
        return "effective-friday"
    return None


def is_admissible_event(event: EventSpec, calendar: TradingCalendar = WEEKDAY_CALENDAR) -> bool:
    return exclusion_reason(event, calendar) is None


def break_time(
    event: EventSpec,
    calendar: TradingCalendar = WEEKDAY_CALENDAR,
    market_open: time = MARKET_OPEN,
) -> datetime:
    """Market-open timestamp of the effective report day."""
    return datetime.combine(effective_report_day(event, calendar), market_open)


@dataclass(frozen=True)
class EventWindow:
    left: PriceSeries
    right: PriceSeries
    break_time: datetime

    def __post_init__(self):
        if len(self.left) == 0 or len(self.right) == 0:
            raise InvalidInputError("both sides of an event window must be non-empty")
        if not self.left.timestamps[-1] < self.break_time <= self.right.timestamps[0]:
            raise InvalidInputError("window sides must straddle the break time")


def split_window(
    series: PriceSeries, at: datetime, bars_per_side: int = DEFAULT_BARS_PER_SIDE
) -> EventWindow:
    """Take ``bars_per_side`` bars strictly before ``at`` and as many at/after it."""
    if bars_per_side < 1:
        raise InvalidInputError("bars_per_side must be positive")
    # first index whose timestamp is >= at
    cut = next((i for i, t in enumerate(series.timestamps) if t >= at), len(series))
    if cut < bars_per_side:
        raise InsufficientDataError("left", bars_per_side, cut)
    if len(series) - cut < bars_per_side:
        raise InsufficientDataError("right", bars_per_side, len(series) - cut)
    return EventWindow(
        series[cut - bars_per_side : cut],
        series[cut : cut + bars_per_side],
        at,
    )
