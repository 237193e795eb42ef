from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .approx_dist import HeadConvention
from .config import DayCount, RunConfig, load_config, parse_number
from .errors import NumericalError, PricerError
from .services.desk import PricingDesk
from .storage import CsvSink, format_value

console = Console()

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def get_desk(out_dir: Optional[str] = None) -> PricingDesk:
    # output resolution order: flag > env CONFIDENCE_PRICER_OUT > ./out
    return PricingDesk(CsvSink(out_dir))


def setup_logging(verbose: bool) -> None:
    logger = logging.getLogger("confidence_pricer")
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))


@contextmanager
def handled() -> Iterator[None]:
    """map package errors to the exit code contract (2 usage, 3 numerical)"""
    try:
        yield
    except NumericalError as e:
        console.print(f"error: {e}", style="bold red")
        raise SystemExit(EXIT_NUMERICAL)
    except PricerError as e:
        console.print(f"error: {e}", style="bold red")
        raise SystemExit(EXIT_USAGE)


def _config(path: Optional[str]) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _show(title: str, header: Sequence[str], rows: List[Dict[str, Any]], limit: int = 40) -> None:
    table = Table(title=title)
    for col in header:
        table.add_column(col)
    for r in rows[:limit]:
        table.add_row(*(format_value(r.get(col)) for col in header))
    console.print(table)
    if len(rows) > limit:
        console.print(f"... {len(rows) - limit} more row(s) in the csv", style="dim")


@click.group(help="confidence-driven price model: pricing, tables, simulation and moments")
@click.option("--out", "out_dir", default=None, help="output directory (default: $CONFIDENCE_PRICER_OUT or ./out)")
@click.option("--verbose", is_flag=True, help="debug logging")
@click.pass_context
def cli(ctx: click.Context, out_dir: Optional[str], verbose: bool):
    # attach the desk to context so subcommands can use it
    setup_logging(verbose)
    ctx.obj = {"desk": get_desk(out_dir)}


@cli.command("price", help="price the contracts described by a config file")
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False), help="key = value run config")
@click.pass_context
def price_cmd(ctx: click.Context, config_path: Optional[str]):
    desk: PricingDesk = ctx.obj["desk"]
    with handled():
        rows, path = desk.price(_config(config_path))
    _show("prices", ["kind", "K", "T", "P0", "price", "q1", "q2", "err_estimate"], rows)
    console.print(f"wrote {len(rows)} row(s) to {path}")


@cli.command("table", help="reproduce one of the built-in price tables (1-4)")
@click.argument("which", type=click.IntRange(1, 4))
@click.option("--mc-paths", default=10_000, show_default=True, type=click.IntRange(min=0), help="monte carlo paths per row; 0 disables the mc column")
@click.option("--seed", default=20180101, show_default=True, type=int)
@click.option("--head", type=click.Choice([h.value for h in HeadConvention]), default=HeadConvention.SHIFTED.value, show_default=True, help="how the known history enters the fitted law of X; omitted reproduces the published figures")
@click.option("--week", default=None, help="year fraction of one week (default 5/252)")
@click.option("--month", default=None, help="year fraction of one month (default 21/252)")
@click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1))
@click.pass_context
def table_cmd(ctx: click.Context, which: int, mc_paths: int, seed: int, head: str, week: Optional[str], month: Optional[str], workers: int):
    desk: PricingDesk = ctx.obj["desk"]
    with handled():
        days = DayCount()
        try:
            if week:
                days = DayCount(days.day, parse_number(week), days.month, days.year)
            if month:
                days = DayCount(days.day, days.week, parse_number(month), days.year)
        except ValueError as e:
            raise click.BadParameter(str(e))
        rows, path = desk.table(which, mc_paths=mc_paths, seed=seed, head=HeadConvention(head), days=days, workers=workers)
    cols = ["P0", "T", "tau", "K", "price", "published"] + (["mc_price", "mc_se", "status"] if mc_paths else [])
    _show(f"table {which}", cols, rows)
    console.print(f"wrote {len(rows)} row(s) to {path}")


@cli.command("simulate", help="simulate confidence / price paths (and the terminal density)")
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False), help="key = value run config")
@click.pass_context
def simulate_cmd(ctx: click.Context, config_path: Optional[str]):
    desk: PricingDesk = ctx.obj["desk"]
    with handled():
        written = desk.simulate(_config(config_path))
    for name, path in written.items():
        console.print(f"{name}: {path}")


@cli.command("moments", help="analytic moments of X and log S on a time grid")
@click.option("--config", "config_path", default=None, type=click.Path(dir_okay=False), help="key = value run config")
@click.pass_context
def moments_cmd(ctx: click.Context, config_path: Optional[str]):
    desk: PricingDesk = ctx.obj["desk"]
    with handled():
        rows, path = desk.moments(_config(config_path))
    _show("moments", ["t", "mean_X", "var_X", "mean_log_S", "var_log_S"], rows, limit=20)
    console.print(f"wrote {len(rows)} row(s) to {path}")
