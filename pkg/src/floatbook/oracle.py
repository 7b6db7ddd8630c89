"""Brute-force replay of a series, used to cross-check ``VolumeBook``.

Every lot (the IPO, each bar, each offering) is kept separately and its
remaining volume is recomputed from scratch as its original size times the
product of every decay factor applied after it was created. No state is
shared with the incremental book.
"""

from __future__ import annotations

import math
from datetime import date

from .market_data import CANCELLATION, InstrumentSeries


def _snap(price: float, tick: float | None) -> float:
    return float(price) if tick is None else float(round(price / tick))


def replay_lots(series: InstrumentSeries, *, tick: float | None = 0.01,
                turnover_mode: str = "error") -> tuple[list[tuple[float, float, date]], float]:
    """Return ``([(price_key, remaining_volume, origin_date), ...], free_float)``."""
    ipo = series.ipo
    lots: list[tuple[float, float, date, int]] = [(_snap(ipo.price, tick), float(ipo.shares), ipo.date, 0)]
    factors: list[float] = []
    free_float = float(ipo.shares)

    timeline: list[tuple[date, int, object]] = []
    for event in series.events[1:]:
        timeline.append((event.date, 2 if event.kind == CANCELLATION else 0, event))
    for bar in series.bars:
        timeline.append((bar.date, 1, bar))
    timeline.sort(key=lambda item: (item[0], item[1]))

    for _, stage, item in timeline:
        if stage == 0:
            free_float += item.shares
            lots.append((_snap(item.price, tick), float(item.shares), item.date, len(factors)))
        elif stage == 2:
            factors.append(1.0 - item.shares / free_float)
            free_float -= item.shares
        else:
            v = float(item.volume_shares)
            if v == 0:
                continue
            if v >= free_float:
                if turnover_mode != "clamp":
                    raise ValueError(f"{item.date}: turnover reaches the float")
                lots = [(_snap(item.avg_price, tick), free_float, item.date, len(factors) + 1)]
                factors.append(0.0)
                continue
            factors.append(1.0 - v / free_float)
            lots.append((_snap(item.avg_price, tick), v, item.date, len(factors)))

    out = []
    for key, v, origin, born in lots:
        out.append((key, v * math.prod(factors[born:]), origin))
    return out, free_float


def replay_levels(series: InstrumentSeries, **kwargs) -> tuple[dict[float, float], float]:
    """Remaining volume summed per price key, plus the final free float."""
    lots, free_float = replay_lots(series, **kwargs)
    levels: dict[float, float] = {}
    for key, v, _ in lots:
        levels[key] = levels.get(key, 0.0) + v
    return levels, free_float


def replay_rho(series: InstrumentSeries, price: float, **kwargs) -> float:
    tick = kwargs.get("tick", 0.01)
    levels, free_float = replay_levels(series, **kwargs)
    key = _snap(price, tick)
    below = sum(v for k, v in levels.items() if k < key)
    above = sum(v for k, v in levels.items() if k > key)
    return (below - above) / free_float
