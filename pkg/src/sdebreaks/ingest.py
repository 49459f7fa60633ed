"""CSV loaders for price bars, events and holiday lists.

Formats:

* bars: header ``timestamp,price``; ISO-8601 timestamps, decimal prices
* events: header ``ticker,report_time,session`` with session ``pre_open`` or
  ``post_close``
* holidays: one ``YYYY-MM-DD`` per line
"""
from __future__ import annotations

import csv
import math
from datetime import date, datetime
from os import PathLike
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .errors import CalendarError, ParseError, ValidationError
from .timeseries import (
    DEFAULT_BAR_INTERVAL,
    EventSpec,
    PriceSeries,
    Session,
    TradingCalendar,
    WEEKDAY_CALENDAR,
    exclusion_reason,
)

BAR_HEADER = ["timestamp", "price"]
EVENT_HEADER = ["ticker", "report_time", "session"]


def _rows(path, header: list[str]):
    """Yield (line_number, fields) after checking the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise ParseError(f"expected header {','.join(header)!r}, got {first!r}", path, 1)
        for fields in reader:
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(fields)}", path, reader.line_num
                )
            yield reader.line_num, [f.strip() for f in fields]


def _parse_time(text: str, path, line: int) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"bad timestamp {text!r}", path, line) from None


def load_bars(path: str | PathLike, bar_interval=DEFAULT_BAR_INTERVAL) -> PriceSeries:
    stamps: list[datetime] = []
    prices: list[float] = []
    for line, (ts_text, price_text) in _rows(path, BAR_HEADER):
        ts = _parse_time(ts_text, path, line)
        try:
            price = float(price_text)
        except ValueError:
            raise ParseError(f"bad price {price_text!r}", path, line) from None
        if not math.isfinite(price) or price <= 0:
            raise ValidationError(f"price must be positive, got {price_text!r}", path, line)
        if stamps and ts <= stamps[-1]:
            raise ValidationError(
                f"timestamp {ts_text} does not increase on previous row", path, line
            )
        stamps.append(ts)
        prices.append(price)
    return PriceSeries(tuple(stamps), np.array(prices, dtype=np.float64), bar_interval)


def write_bars(series: PriceSeries, out: str | PathLike | TextIO) -> None:
    """Write a series in the bars format; ``repr`` keeps full float precision."""
    if isinstance(out, (str, PathLike)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_bars(series, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BAR_HEADER)
    for ts, price in zip(series.timestamps, series.prices):
        writer.writerow([ts.isoformat(), repr(float(price))])


def load_events(path: str | PathLike) -> list[EventSpec]:
    events = []
    for line, (ticker, time_text, session_text) in _rows(path, EVENT_HEADER):
        if not ticker:
            raise ParseError("empty ticker", path, line)
        try:
            session = Session(session_text)
        except ValueError:
            raise ParseError(f"unknown session {session_text!r}", path, line) from None
        events.append(EventSpec(ticker, _parse_time(time_text, path, line), session))
    return events


def load_holidays(path: str | PathLike) -> frozenset[date]:
    days = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.strip()
        if not text:
            continue
        try:
            days.add(date.fromisoformat(text))
        except ValueError:
            raise ParseError(f"bad date {text!r}", path, line_no) from None
    return frozenset(days)


def load_calendar(holidays_path: str | PathLike | None = None) -> TradingCalendar:
    if holidays_path is None:
        return WEEKDAY_CALENDAR
    return TradingCalendar(load_holidays(holidays_path))


def filter_admissible(
    events: Iterable[EventSpec], calendar: TradingCalendar = WEEKDAY_CALENDAR
) -> tuple[list[EventSpec], list[tuple[EventSpec, str]]]:
    """Split events into kept and (dropped, reason) by effective weekday.

    Events whose date cannot be resolved are dropped with reason
    ``calendar-error``.
    """
    kept, dropped = [], []
    for event in events:
        try:
            reason = exclusion_reason(event, calendar)
        except CalendarError:
            reason = "calendar-error"
        if reason is None:
            kept.append(event)
        else:
            dropped.append((event, reason))
    return kept, dropped
