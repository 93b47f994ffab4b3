import logging
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from bicomb.env import thread_cap

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_DIGITS = re.compile(r"(\d+)")


def natural_key(identifier: str) -> tuple:
    """Sort key under which "P2" precedes "P10"."""
    parts = _DIGITS.split(identifier)
    return tuple((0, int(part)) if part.isdigit() else (1, part) for part in parts if part)


def rounded_key(coords: Iterable[float], digits: int = 12) -> tuple[float, ...]:
    return tuple(round(float(c), digits) + 0.0 for c in coords)


def run_concurrently(
    fn: Callable[[T], R], items: Sequence[T], max_workers: int | None = None
) -> list[R]:
    """Maps fn over items on a bounded thread pool, returning results in input order."""
    workers = max(1, min(max_workers or thread_cap, len(items) or 1))
    if workers == 1:
        return [fn(item) for item in items]
    logger.debug(f"Running {len(items)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def parse_point_arg(text: str) -> tuple[str, list[float]]:
    """Parses the command-line point syntax CHART:coord,coord."""
    chart, sep, coords = text.partition(":")
    if not sep or not chart or not coords:
        raise ValueError(f"point {text!r} must look like CHART:x,y")
    try:
        values = [float(c) for c in coords.split(",")]
    except ValueError as e:
        raise ValueError(f"point {text!r} has non-numeric coordinates") from e
    return chart, values
