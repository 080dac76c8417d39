"""Utility functions for gtcnn."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_FLOAT_DIGITS = 17


def configure_logging(level: str | int = "INFO") -> None:
    """Send log records to stderr through a single rich handler.

    stdout stays free for results.
    """
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    logging.basicConfig(
        level=level if isinstance(level, int) else level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )


def format_float(value: float, digits: int = DEFAULT_FLOAT_DIGITS) -> str:
    """Format a float for CSV output so identical values give identical text.

    Examples:
        >>> format_float(0.1)
        '0.10000000000000001'
        >>> format_float(2.0)
        '2'
        >>> format_float(float("nan"))
        'nan'
    """
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, f".{digits}g")


def format_cell(value, digits: int = DEFAULT_FLOAT_DIGITS) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value, digits)
    return str(value)


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent integer seeds for ``count`` sub-tasks of a seeded run."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def run_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map ``fn`` over ``items``; results come back in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def results_table(title: str, header: Sequence[str], rows: Iterable[Sequence], digits: int = 4) -> Table:
    """Rich table of experiment results with short float formatting."""
    table = Table(title=title)
    for name in header:
        table.add_column(name, justify="left" if name in ("model", "variant") else "right")
    for row in rows:
        table.add_row(*(format_cell(v, digits) for v in row))
    return table


def print_table(title: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    Console().print(results_table(title, header, rows))
