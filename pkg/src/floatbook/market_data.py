"""Daily bar and float-event ingestion.

Bars carry one trading day's average price and traded share volume. Events
carry the free-float mutations (the initial IPO, secondary offerings and
share cancellations). Both are read from header-bound CSV files with
ISO-8601 dates; every error names the file and the line it came from.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from os import PathLike
from typing import IO, Iterable

INITIAL_IPO = "initial_ipo"
SECONDARY_OFFERING = "secondary_offering"
CANCELLATION = "cancellation"
EVENT_KINDS = (INITIAL_IPO, SECONDARY_OFFERING, CANCELLATION)

AVG_PRICE_MODES = ("auto", "explicit", "currency_over_shares", "high_low_mid")

BAR_COLUMNS = ("date", "avg_price", "volume_shares", "volume_currency", "high", "low")
EVENT_COLUMNS = ("date", "kind", "shares", "price")


class DataError(ValueError):
    """Invalid input data. Carries the source name and line when known."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class DailyBar:
    date: date
    avg_price: float | None
    volume_shares: float
    volume_currency: float | None = None
    high: float | None = None
    low: float | None = None


@dataclass(frozen=True)
class FloatEvent:
    date: date
    kind: str
    shares: float
    price: float | None = None


@dataclass(frozen=True)
class InstrumentSeries:
    symbol: str
    bars: tuple[DailyBar, ...]
    events: tuple[FloatEvent, ...] = field(default=())

    @property
    def ipo(self) -> FloatEvent:
        return self.events[0]


def parse_date(text: str) -> date:
    return datetime.strptime(text.strip(), "%Y-%m-%d").date()


def _number(text: str | None) -> float | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value


def _open_text(source) -> tuple[IO[str], bool]:
    """Return (text stream, should_close) for a path, bytes or stream."""
    if isinstance(source, (str, PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), False
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


def _source_name(source, name: str | None) -> str:
    if name is not None:
        return name
    if isinstance(source, (str, PathLike)):
        return str(source)
    return getattr(source, "name", "<stream>")


def _rows(source, name: str | None, required: Iterable[str]):
    label = _source_name(source, name)
    stream, close = _open_text(source)
    try:
        reader = csv.DictReader(stream)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if not header:
            raise DataError("empty file, header row expected", label, 1)
        reader.fieldnames = header
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"missing mandatory column(s): {', '.join(missing)}", label, 1)
        for row in reader:
            if None in row:
                raise DataError("too many fields", label, reader.line_num)
            if all(v is None or not v.strip() for v in row.values()):
                continue
            yield reader.line_num, row, header, label
    finally:
        if close:
            stream.close()


def derive_avg_price(bar: DailyBar, mode: str = "auto") -> DailyBar:
    """Fill in ``avg_price`` from whichever route ``mode`` allows.

    ``auto`` tries, in order: the explicit value, currency volume over share
    volume, and the high/low midpoint. The other modes force one route.
    """
    if mode not in AVG_PRICE_MODES:
        raise ValueError(f"unknown avg_price mode {mode!r}")

    if mode in ("auto", "explicit") and bar.avg_price is not None:
        return bar
    if mode == "explicit":
        raise DataError(f"{bar.date}: avg_price missing and mode is 'explicit'")

    if mode in ("auto", "currency_over_shares") and bar.volume_currency is not None:
        if bar.volume_shares <= 0:
            raise DataError(f"{bar.date}: cannot divide currency volume by zero shares")
        return replace(bar, avg_price=bar.volume_currency / bar.volume_shares)
    if mode == "currency_over_shares":
        raise DataError(f"{bar.date}: volume_currency missing and mode is 'currency_over_shares'")

    if bar.high is not None and bar.low is not None:
        return replace(bar, avg_price=(bar.high + bar.low) / 2)
    raise DataError(f"{bar.date}: no route to an average price (need avg_price, volume_currency or high/low)")


def _check_bar(bar: DailyBar) -> None:
    if bar.volume_shares < 0:
        raise ValueError(f"negative volume_shares {bar.volume_shares}")
    for name in ("avg_price", "high", "low"):
        value = getattr(bar, name)
        if value is not None and value <= 0:
            raise ValueError(f"non-positive {name} {value}")
    if bar.volume_currency is not None and bar.volume_currency < 0:
        raise ValueError(f"negative volume_currency {bar.volume_currency}")
    if bar.high is not None and bar.low is not None and bar.low > bar.high:
        raise ValueError(f"low {bar.low} above high {bar.high}")


def parse_bars(source, name: str | None = None, avg_price_mode: str = "auto") -> list[DailyBar]:
    """Read a bars CSV into date-sorted ``DailyBar`` objects with avg_price derived.

    Zero-volume bars whose price cannot be derived keep ``avg_price=None``.
    """
    if avg_price_mode not in AVG_PRICE_MODES:
        raise ValueError(f"unknown avg_price mode {avg_price_mode!r}")
    bars: list[tuple[DailyBar, int]] = []
    seen: dict[date, int] = {}
    header_checked = False
    for line, row, header, label in _rows(source, name, ("date", "volume_shares")):
        if not header_checked:
            has_route = "avg_price" in header or "volume_currency" in header or (
                "high" in header and "low" in header
            )
            if not has_route:
                raise DataError("need an avg_price, volume_currency or high+low column", label, 1)
            header_checked = True
        try:
            day = parse_date(row["date"] or "")
        except ValueError:
            raise DataError(f"unparsable date {row['date']!r}", label, line) from None
        if day in seen:
            raise DataError(f"duplicate date {day} (first seen on line {seen[day]})", label, line)
        seen[day] = line
        try:
            volume = _number(row.get("volume_shares"))
            if volume is None:
                raise ValueError("volume_shares is empty")
            bar = DailyBar(
                date=day,
                avg_price=_number(row.get("avg_price")),
                volume_shares=volume,
                volume_currency=_number(row.get("volume_currency")),
                high=_number(row.get("high")),
                low=_number(row.get("low")),
            )
            _check_bar(bar)
        except ValueError as exc:
            raise DataError(f"malformed row: {exc}", label, line) from None
        try:
            bar = derive_avg_price(bar, avg_price_mode)
        except DataError as exc:
            if bar.volume_shares > 0:
                raise DataError(str(exc), label, line) from None
        if bar.avg_price is not None and bar.avg_price <= 0:
            raise DataError(f"derived avg_price {bar.avg_price} is not positive", label, line)
        bars.append((bar, line))
    bars.sort(key=lambda item: item[0].date)
    return [bar for bar, _ in bars]


def _event_order(event: FloatEvent) -> tuple[date, int]:
    return event.date, EVENT_KINDS.index(event.kind)


def parse_events(source, name: str | None = None) -> list[FloatEvent]:
    """Read an events CSV. Exactly one ``initial_ipo`` must exist and come first."""
    events: list[FloatEvent] = []
    seen: dict[tuple[date, str], int] = {}
    label = _source_name(source, name)
    for line, row, _, label in _rows(source, name, ("date", "kind", "shares")):
        try:
            day = parse_date(row["date"] or "")
        except ValueError:
            raise DataError(f"unparsable date {row['date']!r}", label, line) from None
        kind = (row["kind"] or "").strip()
        if kind not in EVENT_KINDS:
            raise DataError(f"unknown event kind {kind!r}", label, line)
        if (day, kind) in seen:
            raise DataError(f"duplicate {kind} on {day} (first seen on line {seen[day, kind]})", label, line)
        seen[day, kind] = line
        try:
            shares = _number(row.get("shares"))
            price = _number(row.get("price"))
        except ValueError as exc:
            raise DataError(f"malformed row: {exc}", label, line) from None
        if shares is None or shares <= 0:
            raise DataError(f"shares must be positive, got {row.get('shares')!r}", label, line)
        if kind != CANCELLATION and price is None:
            raise DataError(f"{kind} requires a price", label, line)
        if price is not None and price <= 0:
            raise DataError(f"non-positive price {price}", label, line)
        events.append(FloatEvent(day, kind, shares, price))

    ipos = [e for e in events if e.kind == INITIAL_IPO]
    if len(ipos) != 1:
        raise DataError(f"expected exactly one initial_ipo event, found {len(ipos)}", label)
    events.sort(key=_event_order)
    ipo = ipos[0]
    for event in events:
        if event is not ipo and event.date <= ipo.date:
            raise DataError(f"{event.kind} on {event.date} does not follow the initial_ipo on {ipo.date}", label)
    return events


def assemble_series(bars: Iterable[DailyBar], events: Iterable[FloatEvent], symbol: str) -> InstrumentSeries:
    bars = sorted(bars, key=lambda b: b.date)
    events = sorted(events, key=_event_order)
    if not bars:
        raise DataError(f"{symbol}: no bars")
    for prev, cur in zip(bars, bars[1:]):
        if cur.date <= prev.date:
            raise DataError(f"{symbol}: duplicate bar date {cur.date}")
    for bar in bars:
        try:
            _check_bar(bar)
        except ValueError as exc:
            raise DataError(f"{symbol}: bar {bar.date}: {exc}") from None
        if bar.volume_shares > 0 and (bar.avg_price is None or bar.avg_price <= 0):
            raise DataError(f"{symbol}: bar {bar.date} trades volume without a positive avg_price")
    ipos = [e for e in events if e.kind == INITIAL_IPO]
    if len(ipos) != 1:
        raise DataError(f"{symbol}: expected exactly one initial_ipo event, found {len(ipos)}")
    ipo = ipos[0]
    if events[0] is not ipo:
        raise DataError(f"{symbol}: initial_ipo on {ipo.date} is not the earliest event")
    if ipo.price is None or ipo.price <= 0 or ipo.shares <= 0:
        raise DataError(f"{symbol}: initial_ipo needs positive shares and price")
    if ipo.date >= bars[0].date:
        raise DataError(f"{symbol}: initial_ipo on {ipo.date} is not before the first bar on {bars[0].date}")
    last = bars[-1].date
    for event in events[1:]:
        if not ipo.date < event.date <= last:
            raise DataError(
                f"{symbol}: {event.kind} on {event.date} outside ({ipo.date}, {last}]"
            )
    return InstrumentSeries(symbol, tuple(bars), tuple(events))


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_bars(bars: Iterable[DailyBar], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(BAR_COLUMNS)
    for bar in bars:
        writer.writerow([bar.date.isoformat(), _fmt(bar.avg_price), _fmt(bar.volume_shares),
                         _fmt(bar.volume_currency), _fmt(bar.high), _fmt(bar.low)])


def write_events(events: Iterable[FloatEvent], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EVENT_COLUMNS)
    for event in events:
        writer.writerow([event.date.isoformat(), event.kind, _fmt(event.shares), _fmt(event.price)])


def load_series(bars_path, events_path, symbol: str, avg_price_mode: str = "auto") -> InstrumentSeries:
    bars = parse_bars(bars_path, avg_price_mode=avg_price_mode)
    events = parse_events(events_path)
    return assemble_series(bars, events, symbol)
