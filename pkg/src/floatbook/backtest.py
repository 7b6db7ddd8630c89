"""Threshold agents trading on the rho index.

An agent with parameter ``theta`` buys when rho <= -theta and sells when
rho >= +theta. It is either flat or fully invested, trades at the day's
average price, and any position still open on the last day is closed at
that day's price. Returns compound across trades.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

from .book import IndexPoint

GRID_STEP = 0.025
GRID_SIZE = 39


@dataclass(frozen=True)
class AgentParams:
    theta: float

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")


@dataclass(frozen=True)
class TradeRecord:
    buy_date: date
    buy_price: float
    sell_date: date
    sell_price: float
    forced_close: bool = False

    @property
    def gross(self) -> float:
        return self.sell_price / self.buy_price


@dataclass(frozen=True)
class Position:
    buy_date: date
    buy_price: float


@dataclass
class AgentResult:
    theta: float
    trades: list[TradeRecord] = field(default_factory=list)

    @property
    def n_operations(self) -> int:
        # an open position closed by the simulation does not count as an operation
        return sum(1 for t in self.trades if not t.forced_close)

    @property
    def total_return(self) -> float:
        return compound(self.trades)


@dataclass(frozen=True)
class SummaryRow:
    theta: float
    n_operations: int
    total_return: float


def compound(trades: Sequence[TradeRecord]) -> float:
    """Compounded return of a sequence of round trips (3.37 means +337%)."""
    return math.prod(t.sell_price / t.buy_price for t in trades) - 1.0


def default_agent_grid() -> list[AgentParams]:
    return [AgentParams(round(GRID_STEP * k, 3)) for k in range(1, GRID_SIZE + 1)]


def step_agent(position: Position | None, theta: float, point: IndexPoint):
    """Advance one agent by one day.

    Returns ``(position, action, trade)``: action is ``"buy"``, ``"sell"`` or
    ``None``; trade is the completed ``TradeRecord`` on a sell.
    """
    if position is None:
        if point.rho <= -theta:
            return Position(point.date, point.price), "buy", None
        return None, None, None
    if point.rho >= theta:
        trade = TradeRecord(position.buy_date, position.buy_price, point.date, point.price)
        return None, "sell", trade
    return position, None, None


def run_agent(points: Sequence[IndexPoint], theta: float) -> AgentResult:
    result = AgentResult(theta)
    position = None
    for point in points:
        position, _, trade = step_agent(position, theta, point)
        if trade is not None:
            result.trades.append(trade)
    if position is not None:
        last = points[-1]
        result.trades.append(
            TradeRecord(position.buy_date, position.buy_price, last.date, last.price, forced_close=True)
        )
    return result


def run_backtest(points: Sequence[IndexPoint], grid: Sequence[AgentParams] | None = None) -> list[AgentResult]:
    if not points:
        raise ValueError("cannot backtest an empty index series")
    grid = default_agent_grid() if grid is None else grid
    if not grid:
        raise ValueError("agent grid is empty")
    return [run_agent(points, params.theta) for params in grid]


def summarize(results: Sequence[AgentResult]) -> list[SummaryRow]:
    if not results:
        raise ValueError("no agent results to summarize")
    rows = [SummaryRow(r.theta, r.n_operations, r.total_return) for r in results]
    return sorted(rows, key=lambda row: row.theta)
