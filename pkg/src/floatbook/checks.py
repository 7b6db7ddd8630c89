"""Invariant checks run over a whole series (the ``validate`` command)."""

from __future__ import annotations

from dataclasses import dataclass

from .book import DEFAULT_TICK, IndexPoint, VolumeBook, run_series
from .market_data import InstrumentSeries
from .oracle import replay_levels

CONSERVATION_TOL = 1e-9
PRUNED_BOUND = 1e-6
ORACLE_TOL = 1e-9
IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}" + (f": {self.detail}" if self.detail else "")


class _Watcher:
    def __init__(self):
        self.worst_conservation = (0.0, None)
        self.worst_pruned = (0.0, None)
        self.bad_bounds: list[str] = []
        self.bad_vwap: list[str] = []
        self.book: VolumeBook | None = None

    def __call__(self, day, book: VolumeBook, point: IndexPoint | None):
        self.book = book
        err = book.conservation_error()
        if err > self.worst_conservation[0]:
            self.worst_conservation = (err, day)
        pruned = book.pruned_mass / book.free_float
        if pruned > self.worst_pruned[0]:
            self.worst_pruned = (pruned, day)
        if point is None:
            return
        if not (-1.0 <= point.rho <= 1.0
                and abs(point.rho - (point.vdi_fraction - point.vds_fraction)) <= IDENTITY_TOL
                and point.vdi_fraction + point.vds_fraction <= 1.0 + IDENTITY_TOL):
            self.bad_bounds.append(str(day))
        prices = book.prices
        slack = CONSERVATION_TOL * prices.max()
        if not prices.min() - slack <= point.vwap <= prices.max() + slack:
            self.bad_vwap.append(str(day))


def validate_series(series: InstrumentSeries, *, tick: float | None = DEFAULT_TICK,
                    turnover_mode: str = "error") -> list[Check]:
    """Replay ``series`` and check conservation, bounds and the brute-force oracle.

    Errors raised by the replay itself propagate to the caller.
    """
    watch = _Watcher()
    run_series(series, tick=tick, turnover_mode=turnover_mode, observer=watch)
    checks = []

    err, day = watch.worst_conservation
    checks.append(Check("conservation", err <= CONSERVATION_TOL,
                        f"max relative gap {err:.3g}" + (f" on {day}" if day else "")))
    ratio, day = watch.worst_pruned
    checks.append(Check("pruned_mass_bound", ratio <= PRUNED_BOUND,
                        f"max pruned/float {ratio:.3g}" + (f" on {day}" if day else "")))
    checks.append(Check("rho_bounds", not watch.bad_bounds,
                        "" if not watch.bad_bounds else "violated on " + ", ".join(watch.bad_bounds[:5])))
    checks.append(Check("vwap_within_prices", not watch.bad_vwap,
                        "" if not watch.bad_vwap else "violated on " + ", ".join(watch.bad_vwap[:5])))

    book = watch.book
    levels, free_float = replay_levels(series, tick=tick, turnover_mode=turnover_mode)
    worst, where = 0.0, None
    for entry in book.entries:
        expected = levels.get(book.price_key(entry.price), 0.0)
        rel = abs(entry.volume - expected) / max(abs(expected), 1e-300)
        if rel > worst:
            worst, where = rel, entry.price
    float_gap = abs(free_float - book.free_float) / free_float
    ok = worst <= ORACLE_TOL and float_gap <= CONSERVATION_TOL
    detail = f"max relative entry error {worst:.3g}" + (f" at price {where:g}" if where is not None else "")
    checks.append(Check("oracle_replay", ok, detail))
    return checks
