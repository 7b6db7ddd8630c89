"""Volume-weighted historical price book, the rho index, and threshold agents."""

from .backtest import (
    AgentParams,
    AgentResult,
    SummaryRow,
    TradeRecord,
    compound,
    default_agent_grid,
    run_backtest,
    step_agent,
    summarize,
)
from .book import BookEntry, BookError, IndexPoint, VolumeBook, book_as_of, init_book, run_series
from .market_data import (
    DailyBar,
    DataError,
    FloatEvent,
    InstrumentSeries,
    assemble_series,
    derive_avg_price,
    load_series,
    parse_bars,
    parse_events,
)

__all__ = [
    "AgentParams", "AgentResult", "BookEntry", "BookError", "DailyBar", "DataError",
    "FloatEvent", "IndexPoint", "InstrumentSeries", "SummaryRow", "TradeRecord", "VolumeBook",
    "assemble_series", "book_as_of", "compound", "default_agent_grid", "derive_avg_price",
    "init_book", "load_series", "parse_bars", "parse_events", "run_backtest", "run_series",
    "step_agent", "summarize",
]
