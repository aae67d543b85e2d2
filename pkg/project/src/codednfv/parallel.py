"""
Deterministic fan-out of Monte Carlo work.

Trials are cut into fixed-size blocks; every block draws from its own counter-based
streams and returns a partial result that merges commutatively.
The outcome therefore does not depend on the number of workers.
"""

import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

from .errors import ConfigError

log = logging.getLogger(__name__)

WORKERS_ENV = "NFV_WORKERS"
BLOCK_SIZE = 1000

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError as e:
        raise ConfigError(WORKERS_ENV, f"expected an integer, got {raw!r}") from e
    if workers < 1:
        raise ConfigError(WORKERS_ENV, f"must be at least 1, got {workers}")
    return workers


def trial_blocks(trials: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    """`(block index, trials in block)` pairs covering `trials` trials."""
    return [
        (index, min(block_size, trials - start))
        for index, start in enumerate(range(0, trials, block_size))
    ]


def parallel_map(
    fn: Callable[[T], R], items: Sequence[T], workers: None | int = None
) -> list[R]:
    """
    `[fn(item) for item in items]`, spread over a process pool if `workers > 1`.

    `fn` has to be picklable, i.e. a module level function or a `functools.partial`
    of one.
    """
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    log.debug("distributing %d work items over %d processes", len(items), workers)
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))
