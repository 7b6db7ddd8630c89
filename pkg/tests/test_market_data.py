import io
from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floatbook.market_data import (
    CANCELLATION,
    INITIAL_IPO,
    SECONDARY_OFFERING,
    DailyBar,
    DataError,
    FloatEvent,
    assemble_series,
    derive_avg_price,
    parse_bars,
    parse_events,
    write_bars,
    write_events,
)

D = date(2007, 4, 2)


def bars_csv(text: str, **kw):
    return parse_bars(io.StringIO(text), name="bars.csv", **kw)


def events_csv(text: str):
    return parse_events(io.StringIO(text), name="events.csv")


class TestParseBars:
    def test_single_row(self):
        bars = bars_csv("date,avg_price,volume_shares\n2007-04-02,8.00,1000000\n")
        assert bars == [DailyBar(D, 8.0, 1_000_000.0)]

    def test_sorted_ascending(self):
        bars = bars_csv("date,avg_price,volume_shares\n2007-04-03,9,10\n2007-04-02,8,10\n")
        assert [b.date for b in bars] == [D, D + timedelta(days=1)]

    def test_negative_volume_names_line(self):
        with pytest.raises(DataError, match=r"bars\.csv:3:"):
            bars_csv("date,avg_price,volume_shares\n2007-04-02,8,10\n2007-04-03,8,-5\n")

    def test_bytes_input(self):
        bars = parse_bars(b"date,avg_price,volume_shares\n2007-04-02,8.00,1000000\n")
        assert bars[0].avg_price == 8.0

    def test_columns_bound_by_name(self):
        bars = bars_csv("volume_shares,date,avg_price\n1000,2007-04-02,8.5\n")
        assert bars == [DailyBar(D, 8.5, 1000.0)]

    @pytest.mark.parametrize("text, message", [
        ("date,avg_price,volume_shares\n2007-04-02,8,1\n2007-04-02,9,1\n", "duplicate date"),
        ("date,avg_price\n2007-04-02,8\n", "missing mandatory column"),
        ("date,volume_shares\n2007-04-02,8\n", "avg_price, volume_currency or high"),
        ("date,avg_price,volume_shares\n02/04/2007,8,1\n", "unparsable date"),
        ("date,avg_price,volume_shares\n2007-04-02,0,1\n", "non-positive avg_price"),
        ("date,avg_price,volume_shares\n2007-04-02,abc,1\n", "malformed row"),
        ("date,avg_price,volume_shares,high,low\n2007-04-02,8,1,7,9\n", "low 9.0 above high"),
        ("date,avg_price,volume_shares\n2007-04-02,8,1,7\n", "too many fields"),
    ])
    def test_rejects(self, text, message):
        with pytest.raises(DataError, match=message):
            bars_csv(text)

    def test_derives_from_currency_volume(self):
        bars = bars_csv("date,volume_shares,volume_currency\n2007-04-02,1000,12000\n")
        assert bars[0].avg_price == 12.0

    def test_zero_volume_day_without_price_is_kept(self):
        bars = bars_csv("date,volume_shares,volume_currency\n2007-04-02,0,0\n")
        assert bars[0].avg_price is None and bars[0].volume_shares == 0

    def test_forced_mode(self):
        text = "date,avg_price,volume_shares,high,low\n2007-04-02,7.42,10,10,8\n"
        assert bars_csv(text)[0].avg_price == 7.42
        assert bars_csv(text, avg_price_mode="high_low_mid")[0].avg_price == 9.0


class TestDeriveAvgPrice:
    def test_currency_over_shares(self):
        bar = DailyBar(D, None, 1000, volume_currency=12_000)
        assert derive_avg_price(bar).avg_price == 12.0

    def test_high_low_midpoint(self):
        bar = DailyBar(D, None, 1000, high=10, low=8)
        assert derive_avg_price(bar).avg_price == 9.0

    def test_explicit_wins(self):
        bar = DailyBar(D, 7.42, 1000, volume_currency=12_000, high=10, low=8)
        assert derive_avg_price(bar).avg_price == 7.42

    def test_currency_preferred_to_midpoint(self):
        bar = DailyBar(D, None, 1000, volume_currency=11_000, high=10, low=8)
        assert derive_avg_price(bar).avg_price == 11.0

    def test_no_route(self):
        with pytest.raises(DataError, match="no route"):
            derive_avg_price(DailyBar(D, None, 1000, high=10))

    def test_zero_shares_with_currency(self):
        with pytest.raises(DataError, match="zero shares"):
            derive_avg_price(DailyBar(D, None, 0, volume_currency=100))

    @given(
        avg=st.one_of(st.none(), st.floats(0.01, 1e4)),
        cur=st.one_of(st.none(), st.floats(0.0, 1e9)),
        hl=st.one_of(st.none(), st.tuples(st.floats(0.01, 1e4), st.floats(0.01, 1e4))),
    )
    def test_idempotent_and_keeps_explicit(self, avg, cur, hl):
        high, low = (max(hl), min(hl)) if hl else (None, None)
        bar = DailyBar(D, avg, 1000.0, cur, high, low)
        try:
            once = derive_avg_price(bar)
        except DataError:
            return
        assert derive_avg_price(once) == once
        if avg is not None:
            assert once.avg_price == avg


class TestParseEvents:
    def test_ipo_row(self):
        events = events_csv("date,kind,shares,price\n2007-04-01,initial_ipo,5000000,8.00\n")
        assert events == [FloatEvent(date(2007, 4, 1), INITIAL_IPO, 5_000_000.0, 8.0)]

    def test_cancellation_without_price(self):
        events = events_csv(
            "date,kind,shares,price\n2007-04-01,initial_ipo,5000000,8.00\n2007-05-20,cancellation,1000,\n"
        )
        assert events[1] == FloatEvent(date(2007, 5, 20), CANCELLATION, 1000.0, None)

    @pytest.mark.parametrize("text, message", [
        ("date,kind,shares,price\n2007-05-20,cancellation,1000,\n", "exactly one initial_ipo"),
        ("date,kind,shares,price\n2007-04-01,initial_ipo,5,8\n2007-04-02,initial_ipo,5,8\n",
         "exactly one initial_ipo"),
        ("date,kind,shares,price\n2007-04-01,initial_ipo,5,8\n2007-04-02,split,5,8\n", "unknown event kind"),
        ("date,kind,shares,price\n2007-04-01,initial_ipo,5,8\n2007-04-02,secondary_offering,5,\n",
         "requires a price"),
        ("date,kind,shares,price\n2007-04-01,initial_ipo,0,8\n", "shares must be positive"),
        ("date,kind,shares,price\n2007-04-05,initial_ipo,5,8\n2007-04-02,cancellation,1,\n",
         "does not follow the initial_ipo"),
        ("date,kind,shares,price\n2007-04-01,initial_ipo,5,8\n2007-04-02,cancellation,1,\n"
         "2007-04-02,cancellation,2,\n", "duplicate cancellation"),
    ])
    def test_rejects(self, text, message):
        with pytest.raises(DataError, match=message):
            events_csv(text)


class TestAssembleSeries:
    ipo = FloatEvent(date(2007, 4, 1), INITIAL_IPO, 1000.0, 10.0)
    bars = [DailyBar(D + timedelta(days=i), 10.0, 10.0) for i in range(3)]

    def test_valid(self):
        series = assemble_series(self.bars, [self.ipo], "JBSS3")
        assert series.symbol == "JBSS3" and series.ipo == self.ipo and len(series.bars) == 3

    def test_ipo_after_first_bar(self):
        late = FloatEvent(D + timedelta(days=1), INITIAL_IPO, 1000.0, 10.0)
        with pytest.raises(DataError, match="not before the first bar"):
            assemble_series(self.bars, [late], "X")

    def test_event_after_last_bar(self):
        cancel = FloatEvent(D + timedelta(days=10), CANCELLATION, 5.0)
        with pytest.raises(DataError, match="outside"):
            assemble_series(self.bars, [self.ipo, cancel], "X")

    def test_duplicate_bars(self):
        with pytest.raises(DataError, match="duplicate bar date"):
            assemble_series(self.bars + self.bars[:1], [self.ipo], "X")


# -- round trips ------------------------------------------------------------

positive = st.floats(0.01, 1e5, allow_nan=False)


@st.composite
def bar_lists(draw):
    n = draw(st.integers(1, 20))
    offsets = sorted(draw(st.sets(st.integers(0, 5000), min_size=n, max_size=n)))
    bars = []
    for off in offsets:
        high = draw(st.one_of(st.none(), positive))
        low = None if high is None else draw(st.floats(0.01, high))
        bars.append(DailyBar(
            D + timedelta(days=off),
            draw(positive),
            draw(st.floats(0, 1e9)),
            draw(st.one_of(st.none(), st.floats(0, 1e12))),
            high,
            low,
        ))
    return bars


@st.composite
def event_lists(draw):
    ipo = FloatEvent(D, INITIAL_IPO, draw(st.floats(1, 1e9)), draw(positive))
    events = [ipo]
    for off in sorted(draw(st.sets(st.integers(1, 5000), max_size=10))):
        kind = draw(st.sampled_from([SECONDARY_OFFERING, CANCELLATION]))
        price = draw(positive) if kind == SECONDARY_OFFERING else draw(st.one_of(st.none(), positive))
        events.append(FloatEvent(D + timedelta(days=off), kind, draw(st.floats(1, 1e6)), price))
    return events


@given(bar_lists())
def test_bars_round_trip(bars):
    buf = io.StringIO()
    write_bars(bars, buf)
    again = parse_bars(io.StringIO(buf.getvalue()))
    assert again == bars
    buf2 = io.StringIO()
    write_bars(again, buf2)
    assert buf2.getvalue() == buf.getvalue()


@given(event_lists())
def test_events_round_trip(events):
    buf = io.StringIO()
    write_events(events, buf)
    assert parse_events(io.StringIO(buf.getvalue())) == events


@settings(max_examples=200)
@given(bar_lists(), event_lists())
def test_assembled_series_satisfies_invariants(bars, events):
    ipo = events[0]
    bars = [b for b in bars if b.date > ipo.date]
    try:
        series = assemble_series(bars, events, "X")
    except DataError:
        return
    dates = [b.date for b in series.bars]
    assert dates == sorted(set(dates))
    assert series.ipo.kind == INITIAL_IPO
    assert sum(e.kind == INITIAL_IPO for e in series.events) == 1
    assert all(ipo.date < e.date <= dates[-1] for e in series.events[1:])
    for b in series.bars:
        assert b.volume_shares >= 0
        assert b.low is None or b.high is None or b.low <= b.high
        if b.volume_shares > 0:
            assert b.avg_price is not None and b.avg_price > 0
