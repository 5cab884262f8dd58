"""Order-preserving parallel map with an optional progress bar."""

from __future__ import annotations

import logging
import os
import sys
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from tqdm import tqdm

from .errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = "COLLISION_REFLEX_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """Number of worker threads, capped by ``COLLISION_REFLEX_THREADS``.

    Unset or ``0`` means automatic (one per CPU).
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    auto = os.cpu_count() or 1
    if not raw:
        return auto
    try:
        cap = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from e
    if cap < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {cap}")
    return auto if cap == 0 else cap


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    desc: str = "",
    verbose: bool = False,
) -> list[R]:
    """Apply ``fn`` to every item, possibly concurrently, keeping input order.

    Args:
        fn: Pure function to evaluate.
        items: Inputs.
        desc: Label of the progress bar.
        verbose: Show a progress bar when attached to a terminal.

    Returns:
        list: ``[fn(x) for x in items]``.
    """
    work = list(items)
    workers = min(worker_count(), len(work))
    progress = tqdm(
        total=len(work),
        desc=desc,
        unit="pt",
        disable=not verbose or not sys.stderr.isatty(),
    )
    try:
        if workers <= 1:
            results = []
            for item in work:
                results.append(fn(item))
                progress.update()
            return results
        logger.info(f"{desc or 'map'}: {len(work)} items on {workers} threads")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = []
            # Executor.map yields in submission order.
            for result in pool.map(fn, work):
                results.append(result)
                progress.update()
            return results
    finally:
        progress.close()
