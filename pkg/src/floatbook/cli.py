"""``floatbook`` command line: run | histogram | backtest | validate.

Exit codes: 0 success, 1 input error, 2 invariant violation, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import report
from .backtest import AgentParams, default_agent_grid, run_backtest, summarize
from .book import DEFAULT_TICK, TURNOVER_MODES, BookError, book_as_of, run_series
from .checks import validate_series
from .market_data import AVG_PRICE_MODES, DataError, load_series, parse_date

log = logging.getLogger("floatbook")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT, EXIT_INTERNAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    bars_path: Path
    events_path: Path
    symbol: str
    tick: float = DEFAULT_TICK
    bin_width: float | None = None
    avg_price_mode: str = "auto"
    turnover_mode: str = "error"
    grid: tuple[float, ...] = field(default_factory=lambda: tuple(p.theta for p in default_agent_grid()))
    output_dir: Path = Path(".")
    as_of: date | None = None

    def __post_init__(self):
        if not self.tick > 0:
            raise ConfigError(f"tick must be positive, got {self.tick}")
        if self.bin_width is not None and not self.bin_width > 0:
            raise ConfigError(f"bin width must be positive, got {self.bin_width}")
        if self.avg_price_mode not in AVG_PRICE_MODES:
            raise ConfigError(f"avg price mode must be one of {', '.join(AVG_PRICE_MODES)}")
        if self.turnover_mode not in TURNOVER_MODES:
            raise ConfigError(f"turnover mode must be one of {', '.join(TURNOVER_MODES)}")
        if not self.grid:
            raise ConfigError("agent grid is empty")
        if any(not 0 < t < 1 for t in self.grid):
            raise ConfigError("every agent theta must lie in (0, 1)")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("agent thetas must be strictly increasing")

    @property
    def histogram_bin(self) -> float:
        return self.tick if self.bin_width is None else self.bin_width


# flag name -> RunConfig field
_FIELDS = {
    "bars": "bars_path",
    "events": "events_path",
    "symbol": "symbol",
    "tick": "tick",
    "bin_width": "bin_width",
    "avg_price_mode": "avg_price_mode",
    "turnover_mode": "turnover_mode",
    "grid": "grid",
    "out": "output_dir",
    "as_of": "as_of",
}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in ("bars_path", "events_path", "output_dir"):
        return Path(value)
    if name in ("tick", "bin_width"):
        return float(value)
    if name == "as_of":
        return value if isinstance(value, date) else parse_date(str(value))
    if name == "grid":
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        return tuple(float(v) for v in value)
    return value


def build_configs(args: argparse.Namespace) -> list[RunConfig]:
    """Merge the optional JSON config file with flags (flags win)."""
    base: dict = {}
    instruments: list[dict] = [{}]
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
        instruments = doc.pop("instruments", None) or [{}]
        base = doc
    flags = {k: getattr(args, k) for k in _FIELDS if getattr(args, k, None) is not None}
    configs = []
    for inst in instruments:
        merged = {**base, **inst, **flags}
        unknown = set(merged) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        missing = [k for k in ("bars", "events", "symbol") if merged.get(k) is None]
        if missing:
            raise ConfigError(f"missing required setting(s): {', '.join('--' + m for m in missing)}")
        try:
            kwargs = {_FIELDS[k]: _coerce(_FIELDS[k], v) for k, v in merged.items() if v is not None}
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        configs.append(RunConfig(**kwargs))
    return configs


def _series(config: RunConfig):
    for path in (config.bars_path, config.events_path):
        if not path.is_file():
            raise DataError("file not found", str(path))
    return load_series(config.bars_path, config.events_path, config.symbol, config.avg_price_mode)


def _points(config: RunConfig, series=None):
    series = series or _series(config)
    return run_series(series, tick=config.tick, turnover_mode=config.turnover_mode)


def _open_out(config: RunConfig, name: str):
    config.output_dir.mkdir(parents=True, exist_ok=True)
    return open(config.output_dir / name, "w", encoding="utf-8", newline="")


def cmd_run(config: RunConfig) -> list[str]:
    points = _points(config)
    name = f"{config.symbol}_index.csv"
    with _open_out(config, name) as fh:
        report.write_index(points, fh)
    return [f"wrote {config.output_dir / name} ({len(points)} rows)"]


def cmd_histogram(config: RunConfig) -> list[str]:
    series = _series(config)
    as_of = config.as_of or series.bars[-1].date
    first, last = series.bars[0].date, series.bars[-1].date
    if not first <= as_of <= last:
        raise DataError(f"--as-of {as_of} outside the series range {first}..{last}", config.symbol)
    book = book_as_of(series, as_of, tick=config.tick, turnover_mode=config.turnover_mode)
    name = f"{config.symbol}_hist_{as_of.isoformat()}.csv"
    with _open_out(config, name) as fh:
        report.write_histogram(book.histogram(config.histogram_bin), fh)
    return [f"wrote {config.output_dir / name} (vwap {report.fmt(book.vwap())})"]


def cmd_backtest(config: RunConfig) -> list[str]:
    points = _points(config)
    results = run_backtest(points, [AgentParams(t) for t in config.grid])
    agents = f"{config.symbol}_agents.csv"
    trades = f"{config.symbol}_trades.json"
    with _open_out(config, agents) as fh:
        report.write_agents(summarize(results), fh)
    with _open_out(config, trades) as fh:
        report.write_trades(config.symbol, results, fh)
    return [f"wrote {config.output_dir / agents}", f"wrote {config.output_dir / trades}"]


def cmd_validate(config: RunConfig) -> tuple[list[str], int]:
    lines = []
    try:
        series = _series(config)
    except DataError as exc:
        return [f"FAIL ingestion: {exc}"], EXIT_INPUT
    lines.append(f"PASS ingestion: {len(series.bars)} bars, {len(series.events)} events")
    try:
        checks = validate_series(series, tick=config.tick, turnover_mode=config.turnover_mode)
    except BookError as exc:
        return lines + [f"FAIL replay: {exc}"], EXIT_INPUT
    lines.append("PASS replay")
    lines.extend(c.line() for c in checks)
    return lines, EXIT_OK if all(c.ok for c in checks) else EXIT_INVARIANT


COMMANDS = {"run": cmd_run, "histogram": cmd_histogram, "backtest": cmd_backtest}


def execute(command: str, config: RunConfig) -> tuple[list[str], int]:
    """Run one command for one instrument; never raises."""
    try:
        if command == "validate":
            return cmd_validate(config)
        return COMMANDS[command](config), EXIT_OK
    except (DataError, BookError, ConfigError) as exc:
        return [f"error: {exc}"], EXIT_INPUT
    except OSError as exc:
        return [f"error: {exc}"], EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        return [f"internal error: {exc!r}"], EXIT_INTERNAL


def _execute_star(job):
    return execute(*job)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floatbook", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "histogram", "backtest", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--bars")
        p.add_argument("--events")
        p.add_argument("--symbol")
        p.add_argument("--tick", type=float)
        p.add_argument("--bin-width", dest="bin_width", type=float)
        p.add_argument("--avg-price-mode", dest="avg_price_mode", choices=AVG_PRICE_MODES)
        p.add_argument("--turnover-mode", dest="turnover_mode", choices=TURNOVER_MODES)
        p.add_argument("--grid", help="comma-separated agent thetas")
        p.add_argument("--as-of", dest="as_of")
        p.add_argument("--out")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--parallel", action="store_true",
                       help="process the config file's instruments concurrently")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        configs = build_configs(args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    jobs = [(args.command, c) for c in configs]
    if args.parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            outcomes = list(pool.map(_execute_star, jobs))
    else:
        outcomes = [execute(*job) for job in jobs]

    code = EXIT_OK
    for config, (lines, status) in zip(configs, outcomes):
        stream = sys.stdout if status == EXIT_OK or args.command == "validate" else sys.stderr
        for line in lines:
            print(f"[{config.symbol}] {line}" if len(configs) > 1 else line, file=stream)
        code = max(code, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
