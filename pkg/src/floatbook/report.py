"""Plot-ready CSV/JSON writers and matching readers.

Numbers are written with at most 12 significant digits, dates as ISO-8601,
LF line endings. Output is a pure function of the inputs so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from typing import IO, Iterable, Sequence

from .backtest import AgentResult, SummaryRow, TradeRecord
from .book import IndexPoint
from .market_data import parse_date

INDEX_COLUMNS = ("date", "price", "vwap", "rho", "vdi_fraction", "vds_fraction")
HISTOGRAM_COLUMNS = ("bin_low", "fraction")
AGENT_COLUMNS = ("theta", "n_operations", "total_return")


def fmt(x: float) -> str:
    text = f"{float(x):.12g}"
    return "0" if text == "-0" else text


def _writer(stream: IO[str]):
    return csv.writer(stream, lineterminator="\n")


def write_index(points: Iterable[IndexPoint], stream: IO[str]) -> None:
    w = _writer(stream)
    w.writerow(INDEX_COLUMNS)
    for p in points:
        w.writerow([p.date.isoformat(), fmt(p.price), fmt(p.vwap), fmt(p.rho),
                    fmt(p.vdi_fraction), fmt(p.vds_fraction)])


def read_index(stream: IO[str]) -> list[IndexPoint]:
    return [
        IndexPoint(parse_date(r["date"]), float(r["price"]), float(r["vwap"]), float(r["rho"]),
                   float(r["vdi_fraction"]), float(r["vds_fraction"]))
        for r in csv.DictReader(stream)
    ]


def write_histogram(bins: Iterable[tuple[float, float]], stream: IO[str]) -> None:
    w = _writer(stream)
    w.writerow(HISTOGRAM_COLUMNS)
    for low, fraction in bins:
        w.writerow([fmt(low), fmt(fraction)])


def read_histogram(stream: IO[str]) -> list[tuple[float, float]]:
    return [(float(r["bin_low"]), float(r["fraction"])) for r in csv.DictReader(stream)]


def write_agents(rows: Iterable[SummaryRow], stream: IO[str]) -> None:
    w = _writer(stream)
    w.writerow(AGENT_COLUMNS)
    for row in rows:
        w.writerow([fmt(row.theta), row.n_operations, fmt(row.total_return)])


def read_agents(stream: IO[str]) -> list[SummaryRow]:
    return [SummaryRow(float(r["theta"]), int(r["n_operations"]), float(r["total_return"]))
            for r in csv.DictReader(stream)]


def _trade_json(trade: TradeRecord) -> dict:
    d = asdict(trade)
    d["buy_date"] = trade.buy_date.isoformat()
    d["sell_date"] = trade.sell_date.isoformat()
    d["buy_price"] = float(fmt(trade.buy_price))
    d["sell_price"] = float(fmt(trade.sell_price))
    return d


def write_trades(symbol: str, results: Sequence[AgentResult], stream: IO[str]) -> None:
    doc = {
        "symbol": symbol,
        "agents": [
            {
                "theta": float(fmt(r.theta)),
                "n_operations": r.n_operations,
                "total_return": float(fmt(r.total_return)),
                "trades": [_trade_json(t) for t in r.trades],
            }
            for r in sorted(results, key=lambda r: r.theta)
        ],
    }
    json.dump(doc, stream, indent=2, sort_keys=True)
    stream.write("\n")


def read_trades(stream: IO[str]) -> tuple[str, list[AgentResult]]:
    doc = json.load(stream)
    results = []
    for agent in doc["agents"]:
        trades = [
            TradeRecord(parse_date(t["buy_date"]), t["buy_price"], parse_date(t["sell_date"]),
                        t["sell_price"], t["forced_close"])
            for t in agent["trades"]
        ]
        results.append(AgentResult(agent["theta"], trades))
    return doc["symbol"], results
