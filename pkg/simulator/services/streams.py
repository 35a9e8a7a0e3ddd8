"""
Seeded random substreams and an order-preserving worker pool.

Every Monte Carlo trial (and every sweep point) draws from its own
generator keyed by (seed, stream, index), so results never depend on how
work is scheduled across threads.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Stream identifiers keep the scenario and channel draws of one trial apart.
SCENARIO_STREAM = 0
CHANNEL_STREAM = 1
ORACLE_STREAM = 2
SWEEP_STREAM = 3


def trial_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Return the generator of trial `index` within `stream` for `seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream, int(index)]))


def map_ordered(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    logger: Optional[logging.Logger] = None,
) -> List[R]:
    """Apply `fn` to every item and return the results in input order."""
    items = list(items)
    logger = logger or logging.getLogger(__name__)

    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(threads, len(items))
    logger.debug(f"Dispatching {len(items)} tasks to {workers} worker threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def blocks(n: int, size: int) -> List[range]:
    """Split range(n) into consecutive blocks of at most `size` indices."""
    size = max(1, size)
    return [range(start, min(start + size, n)) for start in range(0, n, size)]


def point_seed(seed: int, index: int) -> int:
    """Derive the 64-bit seed of sweep point `index` from the run seed."""
    state = np.random.SeedSequence([int(seed), SWEEP_STREAM, int(index)]).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0])
