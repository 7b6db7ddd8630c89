"""Volume book: who holds the free float, and at what acquisition price.

The book starts with the whole float held at the IPO price. Each trading
day, the shares that changed hands are assumed to come from every current
holder in proportion to their holding, so every entry decays by
``1 - traded / free_float`` and the day's volume is added at the day's
average price. From the book we read the float-weighted mean acquisition
price (``vwap``) and ``rho``, the float fraction held below the current price
minus the fraction held above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from itertools import compress
from typing import Callable

import numpy as np

from .market_data import (
    CANCELLATION,
    INITIAL_IPO,
    SECONDARY_OFFERING,
    DailyBar,
    FloatEvent,
    InstrumentSeries,
)

DEFAULT_TICK = 0.01
PRUNE_RATIO = 1e-12
TURNOVER_MODES = ("error", "clamp")


class BookError(ValueError):
    """An operation would break the book (bad ordering, float exhausted, ...)."""


@dataclass(frozen=True)
class BookEntry:
    price: float
    volume: float
    origin_date: date | None = None


@dataclass(frozen=True)
class IndexPoint:
    date: date
    price: float
    vwap: float
    rho: float
    vdi_fraction: float
    vds_fraction: float


class VolumeBook:
    """Remaining volumes by acquisition price, plus the current free float.

    Volumes are raw share counts; fractions of the float are computed on
    read. Prices are snapped to ``tick`` (``None`` disables snapping) and
    entries at the same tick merge. Entries that decay below
    ``prune_ratio * free_float`` are dropped into ``pruned_mass``, which then
    decays with the book so that ``sum(volumes) + pruned_mass`` tracks the
    float exactly.
    """

    def __init__(self, free_float: float, *, tick: float | None = DEFAULT_TICK,
                 turnover_mode: str = "error", prune_ratio: float = PRUNE_RATIO):
        if not free_float > 0:
            raise BookError(f"free float must be positive, got {free_float}")
        if tick is not None and not tick > 0:
            raise BookError(f"tick must be positive, got {tick}")
        if turnover_mode not in TURNOVER_MODES:
            raise BookError(f"unknown turnover mode {turnover_mode!r}")
        self.free_float = float(free_float)
        self.tick = tick
        self.turnover_mode = turnover_mode
        self.prune_ratio = prune_ratio
        self.pruned_mass = 0.0
        self.last_date: date | None = None
        self.event_log: list[tuple[date, str, float, float | None]] = []
        self._keys = np.empty(16)
        self._prices = np.empty(16)
        self._vols = np.empty(16)
        self._live = np.zeros(16, dtype=bool)
        self._dates: list[date | None] = []
        self._slot: dict[float, int] = {}
        self._n = 0
        # pruned slots stay in the arrays with zero volume until compaction
        self._dead = 0
        # lower bound on the smallest live entry; lets _prune skip the scan
        self._floor = math.inf

    @classmethod
    def from_entries(cls, entries, free_float: float | None = None, **kwargs) -> "VolumeBook":
        """Build a book from ``(price, volume)`` pairs; the float defaults to their sum."""
        entries = [(float(p), float(v)) for p, v in entries]
        book = cls(sum(v for _, v in entries) if free_float is None else free_float, **kwargs)
        for price, volume in entries:
            if not price > 0 or volume < 0:
                raise BookError(f"bad entry ({price}, {volume})")
            book._add(price, volume, None)
        return book

    # -- price snapping -------------------------------------------------

    def price_key(self, price: float) -> float:
        if self.tick is None:
            return float(price)
        return float(round(price / self.tick))

    def _key_price(self, key: float) -> float:
        if self.tick is None:
            return key
        return round(key * self.tick, 12)

    # -- storage --------------------------------------------------------

    def _add(self, price: float, volume: float, origin: date | None) -> None:
        key = self.price_key(price)
        slot = self._slot.get(key)
        if slot is not None:
            self._vols[slot] += volume
            return
        self._floor = min(self._floor, volume)
        if self._n == len(self._vols):
            size = 2 * len(self._vols)
            for name in ("_keys", "_prices", "_vols", "_live"):
                old = getattr(self, name)
                grown = np.zeros(size, dtype=old.dtype)
                grown[: self._n] = old[: self._n]
                setattr(self, name, grown)
        n = self._n
        self._keys[n] = key
        self._prices[n] = self._key_price(key)
        self._vols[n] = volume
        self._live[n] = True
        self._dates.append(origin)
        self._slot[key] = n
        self._n += 1

    def _decay(self, factor: float) -> None:
        self._vols[: self._n] *= factor
        self.pruned_mass *= factor
        self._floor *= factor

    def _prune(self) -> None:
        threshold = self.prune_ratio * self.free_float
        if self._floor >= threshold:
            return
        live = self._live[: self._n]
        vols = self._vols[: self._n]
        small = live & (vols < threshold)
        if small.any():
            self.pruned_mass += float(vols[small].sum())
            vols[small] = 0.0
            live[small] = False
            for key in self._keys[: self._n][small].tolist():
                del self._slot[key]
            self._dead += int(small.sum())
            if 2 * self._dead > self._n:
                self._compact()
        live_vols = self._vols[: self._n][self._live[: self._n]]
        self._floor = float(live_vols.min()) if len(live_vols) else math.inf

    def _compact(self) -> None:
        keep = self._live[: self._n].copy()
        m = int(keep.sum())
        for name in ("_keys", "_prices", "_vols", "_live"):
            arr = getattr(self, name)
            arr[:m] = arr[: self._n][keep]
        self._dates = list(compress(self._dates, keep.tolist()))
        self._n = m
        self._dead = 0
        self._slot = dict(zip(self._keys[:m].tolist(), range(m)))

    def _reset(self, price: float, origin: date | None) -> None:
        self._n = 0
        self._dead = 0
        self._dates = []
        self._slot = {}
        self._floor = math.inf
        self.pruned_mass = 0.0
        self._add(price, self.free_float, origin)

    def _live_index(self) -> np.ndarray:
        return np.flatnonzero(self._live[: self._n])

    # -- views ----------------------------------------------------------

    def __len__(self) -> int:
        return self._n - self._dead

    @property
    def entries(self) -> list[BookEntry]:
        return [BookEntry(float(self._prices[i]), float(self._vols[i]), self._dates[i])
                for i in self._live_index().tolist()]

    @property
    def prices(self) -> np.ndarray:
        return self._prices[self._live_index()]

    @property
    def volumes(self) -> np.ndarray:
        return self._vols[self._live_index()]

    def volume_at(self, price: float) -> float:
        slot = self._slot.get(self.price_key(price))
        return 0.0 if slot is None else float(self._vols[slot])

    def total_volume(self) -> float:
        return float(self._vols[: self._n].sum())

    def conservation_error(self) -> float:
        """Relative gap between the float and held plus pruned volume."""
        return abs(self.total_volume() + self.pruned_mass - self.free_float) / self.free_float

    def copy(self) -> "VolumeBook":
        other = VolumeBook.__new__(VolumeBook)
        other.__dict__.update(self.__dict__)
        for name in ("_keys", "_prices", "_vols", "_live"):
            setattr(other, name, getattr(self, name).copy())
        other._dates = list(self._dates)
        other._slot = dict(self._slot)
        other.event_log = list(self.event_log)
        return other

    # -- updates --------------------------------------------------------

    def apply_trading_day(self, bar: DailyBar) -> "VolumeBook":
        if self.last_date is not None and bar.date <= self.last_date:
            raise BookError(f"{bar.date}: bar is not after the book date {self.last_date}")
        traded = float(bar.volume_shares)
        if traded < 0:
            raise BookError(f"{bar.date}: negative traded volume {traded}")
        if traded == 0:
            self.last_date = bar.date
            return self
        if bar.avg_price is None or not bar.avg_price > 0:
            raise BookError(f"{bar.date}: traded volume without a positive average price")
        if traded >= self.free_float:
            if self.turnover_mode == "error":
                raise BookError(
                    f"{bar.date}: traded volume {traded:g} reaches the free float {self.free_float:g}"
                )
            self._reset(bar.avg_price, bar.date)
        else:
            self._decay(1.0 - traded / self.free_float)
            self._add(bar.avg_price, traded, bar.date)
            self._prune()
        self.last_date = bar.date
        return self

    def apply_float_event(self, event: FloatEvent, current_price: float | None = None) -> "VolumeBook":
        """Apply an offering or a cancellation.

        A cancellation removes shares from every holder proportionally and
        adds nothing; ``current_price`` is only logged.
        """
        if self.last_date is not None and event.date < self.last_date:
            raise BookError(f"{event.date}: event precedes the book date {self.last_date}")
        if event.kind == SECONDARY_OFFERING:
            if event.price is None or not event.price > 0 or not event.shares > 0:
                raise BookError(f"{event.date}: offering needs positive shares and price")
            self.free_float += event.shares
            self._add(event.price, float(event.shares), event.date)
            self.event_log.append((event.date, event.kind, event.shares, event.price))
        elif event.kind == CANCELLATION:
            if not 0 < event.shares < self.free_float:
                raise BookError(
                    f"{event.date}: cancelling {event.shares:g} shares of a {self.free_float:g} float"
                )
            self._decay(1.0 - event.shares / self.free_float)
            self.free_float -= event.shares
            self.event_log.append((event.date, event.kind, event.shares, current_price))
        elif event.kind == INITIAL_IPO:
            raise BookError(f"{event.date}: initial_ipo can only seed a new book")
        else:
            raise BookError(f"{event.date}: unknown event kind {event.kind!r}")
        self._prune()
        return self

    # -- statistics -----------------------------------------------------

    def vwap(self) -> float:
        if len(self) == 0:
            raise BookError("vwap of an empty book")
        n = self._n
        return float(np.dot(self._prices[:n], self._vols[:n])) / self.free_float

    def rho(self, current_price: float) -> tuple[float, float, float]:
        """Return ``(rho, vdi_fraction, vds_fraction)`` at ``current_price``.

        Volume at the current price's tick counts on neither side.
        """
        if len(self) == 0:
            raise BookError("rho of an empty book")
        if not current_price > 0:
            raise BookError(f"current price must be positive, got {current_price}")
        key = self.price_key(current_price)
        keys = self._keys[: self._n]
        vols = self._vols[: self._n]
        below = min(float(np.dot(vols, keys < key)) / self.free_float, 1.0)
        above = min(float(np.dot(vols, keys > key)) / self.free_float, 1.0)
        return below - above, below, above

    def weighted_median(self) -> float:
        """Price with at least half of the held volume at or below it."""
        if len(self) == 0:
            raise BookError("median of an empty book")
        live = self._live_index()
        order = live[np.argsort(self._keys[live], kind="stable")]
        cum = np.cumsum(self._vols[order])
        idx = int(np.searchsorted(cum, 0.5 * cum[-1]))
        return float(self._prices[order[min(idx, len(order) - 1)]])

    def histogram(self, bin_width: float) -> list[tuple[float, float]]:
        """Float fraction per price bin, ``[(bin_low, fraction), ...]`` ascending."""
        if not bin_width > 0:
            raise BookError(f"bin width must be positive, got {bin_width}")
        bins: dict[int, float] = {}
        for price, vol in zip(self.prices.tolist(), self.volumes.tolist()):
            # the epsilon keeps tick-aligned prices out of the bin below
            b = math.floor(price / bin_width + 1e-9)
            bins[b] = bins.get(b, 0.0) + vol
        return [(round(b * bin_width, 12), bins[b] / self.free_float) for b in sorted(bins)]


def init_book(ipo: FloatEvent, *, tick: float | None = DEFAULT_TICK,
              turnover_mode: str = "error", prune_ratio: float = PRUNE_RATIO) -> VolumeBook:
    if ipo.kind != INITIAL_IPO:
        raise BookError(f"a book starts from an initial_ipo, got {ipo.kind}")
    if ipo.price is None or not ipo.price > 0:
        raise BookError(f"{ipo.date}: initial_ipo needs a positive price")
    if not ipo.shares > 0:
        raise BookError(f"{ipo.date}: initial_ipo needs positive shares")
    book = VolumeBook(ipo.shares, tick=tick, turnover_mode=turnover_mode, prune_ratio=prune_ratio)
    book._add(ipo.price, float(ipo.shares), ipo.date)
    book.last_date = ipo.date
    return book


Observer = Callable[[date, VolumeBook, "IndexPoint | None"], None]


def run_series(series: InstrumentSeries, *, tick: float | None = DEFAULT_TICK,
               turnover_mode: str = "error", prune_ratio: float = PRUNE_RATIO,
               observer: Observer | None = None) -> list[IndexPoint]:
    """Replay a series from its IPO and return one ``IndexPoint`` per bar.

    On each calendar day: offerings, then the bar, then cancellations. The
    point is read after the bar using the bar's own price; zero-volume bars
    without a price reuse the last known price. ``observer`` (if given) is
    called after every processed day with the live book.
    """
    book = init_book(series.ipo, tick=tick, turnover_mode=turnover_mode, prune_ratio=prune_ratio)
    price = float(series.ipo.price)
    by_day: dict[date, list[FloatEvent]] = {}
    for event in series.events[1:]:
        by_day.setdefault(event.date, []).append(event)
    bars = {bar.date: bar for bar in series.bars}
    points: list[IndexPoint] = []

    for day in sorted(set(bars) | set(by_day)):
        todays = by_day.get(day, [])
        bar = bars.get(day)
        try:
            for event in todays:
                if event.kind != CANCELLATION:
                    book.apply_float_event(event, price)
            if bar is not None:
                book.apply_trading_day(bar)
                if bar.avg_price is not None:
                    price = float(bar.avg_price)
            for event in todays:
                if event.kind == CANCELLATION:
                    book.apply_float_event(event, price)
        except BookError as exc:
            message = str(exc)
            if not message.startswith(str(day)):
                message = f"{day}: {message}"
            raise BookError(f"{series.symbol}: {message}") from None
        point = None
        if bar is not None:
            rho, below, above = book.rho(price)
            point = IndexPoint(day, price, book.vwap(), rho, below, above)
            points.append(point)
        if observer is not None:
            observer(day, book, point)
    return points


def book_as_of(series: InstrumentSeries, as_of: date, **kwargs) -> VolumeBook:
    """The book at the close of ``as_of`` (which must lie within the bar range)."""
    first, last = series.bars[0].date, series.bars[-1].date
    if not first <= as_of <= last:
        raise BookError(f"{as_of} outside the bar range {first}..{last}")
    truncated = InstrumentSeries(
        series.symbol,
        tuple(b for b in series.bars if b.date <= as_of),
        tuple(e for e in series.events if e.date <= as_of),
    )
    live: list[VolumeBook] = []

    def grab(day, book, point):
        if not live:
            live.append(book)

    run_series(truncated, observer=grab, **kwargs)
    return live[0]
